"""Numerical identity suite for the harmonic core, run by ``spoofoptics shcheck``."""

import math
from typing import NamedTuple

import numpy as np
from numpy.polynomial import legendre

from .sh import (
    SHCoeffs,
    direct_irradiance,
    funk_hecke_convolve,
    lambertian_kernel,
    make_quadrature,
    sh_basis,
    sh_product,
    sh_synthesize,
    sh_transform,
    zonal,
)


class Check(NamedTuple):
    name: str
    error: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.error <= self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<48s} err={self.error:.3e}  tol={self.tolerance:.0e}"


def _poly_zonal(power_coeffs):
    """Zonal SH coefficients of a polynomial in cos(theta) (power basis)."""
    leg = legendre.poly2leg(power_coeffs)
    return zonal([c * math.sqrt(4 * math.pi / (2 * l + 1)) for l, c in enumerate(leg)])


def check_orthonormality(order=6):
    grid = make_quadrature(order + 1)
    basis = sh_basis(grid.dirs, order)
    gram = basis.T @ (grid.weights[:, None] * basis)
    err = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    return Check(f"basis orthonormal up to degree {order}", err, 1e-12)


def check_odd_kernel():
    k = lambertian_kernel(6)
    return Check("kernel odd degrees 3, 5 vanish", max(abs(k[3]), abs(k[5])), 1e-9)


def check_kernel_values():
    k = lambertian_kernel(6)
    # 2 pi int_0^1 t P_l(t) dt in closed form: pi, 2 pi / 3, pi / 4
    expected = (math.pi, 2 * math.pi / 3, math.pi / 4)
    err = max(abs(k[l] - e) for l, e in enumerate(expected))
    return Check("kernel k0, k1, k2 closed form", err, 1e-9)


def check_funk_hecke(n_lights=50, order=6, seed=0):
    """SH-domain irradiance vs brute-force spatial convolution, relative error."""
    rng = np.random.default_rng(seed)
    kernel = lambertian_kernel(order)
    grid = make_quadrature(order + 2)
    worst = 0.0
    for _ in range(n_lights):
        light = SHCoeffs(order, rng.normal(size=(order + 1) ** 2))
        brute = direct_irradiance(lambda u: sh_synthesize(light, u), grid.dirs, n=order + 2)
        got = sh_transform(grid, brute, order).values
        want = funk_hecke_convolve(light, kernel).values
        sig = np.abs(want) > 1e-6
        rel = np.abs(got[sig] - want[sig]) / np.abs(want[sig])
        worst = max(worst, float(rel.max()), float(np.abs(got[~sig]).max(initial=0.0)))
    return Check(f"Funk-Hecke vs brute force ({n_lights} lights, L={order})", worst, 1e-3)


def check_product_identity():
    """cos(t) cos(2t) = (cos(t) + cos(3t)) / 2, coefficientwise."""
    cos1 = _poly_zonal([0, 1])
    cos2 = _poly_zonal([-1, 0, 2])
    cos3 = _poly_zonal([0, -3, 0, 4])
    prod = sh_product(cos1, cos2, 3)
    expected = (cos1 + cos3) * 0.5
    err = float(np.max(np.abs(prod.values - expected.values)))
    return Check("cos(t)cos(2t) = (cos(t) + cos(3t))/2", err, 1e-8)


def check_parseval(order=6, seed=1):
    rng = np.random.default_rng(seed)
    c = SHCoeffs(order, rng.normal(size=(order + 1) ** 2))
    grid = make_quadrature(order + 2)
    f = sh_synthesize(c, grid.dirs)
    err = abs(grid.integrate(f * f) - float(c.values @ c.values))
    return Check(f"Parseval at degree {order}", err, 1e-9)


def run_all(seed=0, n_lights=50):
    return [
        check_orthonormality(),
        check_odd_kernel(),
        check_kernel_values(),
        check_funk_hecke(n_lights=n_lights, seed=seed),
        check_product_identity(),
        check_parseval(seed=seed + 1),
    ]
