"""Real spherical harmonics on the unit sphere.

Convention
----------
Orthonormal real harmonics, *without* the Condon-Shortley phase::

    Y_l^0        = K_l^0 P_l(z)
    Y_l^m  (m>0) = sqrt(2) K_l^m P_l^m(z) cos(m phi)
    Y_l^-m (m>0) = sqrt(2) K_l^m P_l^m(z) sin(m phi)

with K_l^m = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) and P_l^m carrying no
(-1)^m factor. Hence Y_1^1 = sqrt(3/4pi) x, Y_1^-1 = sqrt(3/4pi) y and
Y_1^0 = sqrt(3/4pi) z. Coefficients are stored flat at index l*l + l + m.

Lambertian kernel scaling
-------------------------
``lambertian_kernel`` returns the Funk-Hecke multipliers

    k[l] = 2 pi * integral_{-1}^{1} max(0, t) P_l(t) dt
         = sqrt(4 pi / (2l + 1)) * (zonal SH coefficient of max(0, cos theta)),

so that the irradiance i(v) = integral r(u) max(0, u.v) du has coefficients
i[l][m] = k[l] r[l][m]. Numerically k = (pi, 2pi/3, pi/4, 0, -pi/24, ...).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from . import kernels
from .errors import ValidationError

MAX_ORDER = 16
_UNIT_TOL = 1e-10


def num_coeffs(order):
    return (order + 1) ** 2


def coeff_index(l, m):
    if l < 0 or abs(m) > l:
        raise ValidationError(f"invalid SH index (l={l}, m={m})")
    return l * l + l + m


@dataclass(frozen=True, eq=False)
class SHCoeffs:
    """Real SH coefficients c[l][m] for 0 <= l <= order, flat storage."""

    order: int
    values: np.ndarray

    def __post_init__(self):
        if self.order < 0:
            raise ValidationError("SH order must be >= 0")
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size != num_coeffs(self.order):
            raise ValidationError(
                f"order {self.order} needs {num_coeffs(self.order)} coefficients, got {v.size}"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("SH coefficients must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, order):
        return cls(order, np.zeros(num_coeffs(order)))

    @classmethod
    def from_dict(cls, order, entries):
        """Build from ``{(l, m): value}``; unspecified entries are zero."""
        v = np.zeros(num_coeffs(order))
        for (l, m), value in entries.items():
            if l > order:
                raise ValidationError(f"degree {l} exceeds order {order}")
            v[coeff_index(l, m)] = value
        return cls(order, v)

    def __getitem__(self, lm):
        l, m = lm
        if l > self.order:
            raise ValidationError(f"degree {l} exceeds order {self.order}")
        return float(self.values[coeff_index(l, m)])

    def degree(self, l):
        """Coefficients of degree ``l`` ordered m = -l..l."""
        return self.values[l * l : (l + 1) * (l + 1)]

    def resized(self, order):
        """Truncate or zero-pad to ``order``."""
        v = np.zeros(num_coeffs(order))
        k = min(num_coeffs(order), self.values.size)
        v[:k] = self.values[:k]
        return SHCoeffs(order, v)

    def __add__(self, other):
        order = max(self.order, other.order)
        return SHCoeffs(order, self.resized(order).values + other.resized(order).values)

    def __mul__(self, scalar):
        return SHCoeffs(self.order, self.values * float(scalar))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SHCoeffs):
            return NotImplemented
        return self.order == other.order and np.array_equal(self.values, other.values)

    __hash__ = None


@lru_cache(maxsize=None)
def _norm_table(order):
    norm = np.zeros((order + 1, order + 1))
    for l in range(order + 1):
        for m in range(l + 1):
            k = math.sqrt(
                (2 * l + 1) / (4 * math.pi) * math.exp(math.lgamma(l - m + 1) - math.lgamma(l + m + 1))
            )
            norm[l, m] = k if m == 0 else math.sqrt(2.0) * k
    norm.setflags(write=False)
    return norm


def _as_dirs(d):
    d = np.asarray(d, dtype=np.float64)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    if d.shape[1] != 3:
        raise ValidationError(f"directions must have 3 components, got shape {d.shape}")
    if d.size and np.max(np.abs(np.einsum("ij,ij->i", d, d) - 1.0)) > _UNIT_TOL:
        raise ValidationError("directions must be unit vectors")
    return np.ascontiguousarray(d), single


def sh_basis(dirs, order):
    """Matrix of all Y_l^m (columns, flat index) at the (N, 3) unit ``dirs``."""
    if not 0 <= order <= MAX_ORDER:
        raise ValidationError(f"order must be in [0, {MAX_ORDER}]")
    d, _ = _as_dirs(dirs)
    return kernels.real_sh_basis(d, int(order), np.ascontiguousarray(_norm_table(order)))


def sh_eval(l, m, d):
    """Value of Y_l^m at unit direction(s) ``d``."""
    if not isinstance(l, (int, np.integer)) or not isinstance(m, (int, np.integer)):
        raise ValidationError("SH indices must be integers")
    idx = coeff_index(int(l), int(m))
    dirs, single = _as_dirs(d)
    vals = sh_basis(dirs, int(l))[:, idx]
    return float(vals[0]) if single else vals


def sh_synthesize(c, d):
    """Evaluate sum_{l,m} c[l][m] Y_l^m at direction(s) ``d``."""
    dirs, single = _as_dirs(d)
    vals = sh_basis(dirs, c.order) @ c.values
    return float(vals[0]) if single else vals


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Product quadrature on the sphere.

    ``n`` Gauss-Legendre nodes in cos(theta) times ``2n`` uniform azimuths.
    Integrates every polynomial of degree <= ``design_order`` = 2n - 1
    exactly (up to rounding), so SH products with total degree <= 2n - 1 are
    exact.
    """

    n: int
    dirs: np.ndarray
    weights: np.ndarray
    design_order: int

    def integrate(self, samples):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[0] != self.weights.size:
            raise ValidationError(f"expected {self.weights.size} samples, got {samples.shape[0]}")
        return self.weights @ samples


@lru_cache(maxsize=64)
def make_quadrature(n):
    if n < 2:
        raise ValidationError("quadrature resolution must be >= 2")
    t, wt = legendre.leggauss(n)
    n_phi = 2 * n
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    tt, pp = np.meshgrid(t, phi, indexing="ij")
    st = np.sqrt(1.0 - tt * tt)
    dirs = np.stack([st * np.cos(pp), st * np.sin(pp), tt], axis=-1).reshape(-1, 3)
    # renormalise to kill rounding in sqrt(1 - t^2)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    weights = np.repeat(wt * (2.0 * np.pi / n_phi), n_phi)
    dirs.setflags(write=False)
    weights.setflags(write=False)
    return SphereGrid(n, dirs, weights, 2 * n - 1)


def quadrature_for_order(design_order):
    """Smallest grid whose design order is at least ``design_order``."""
    return make_quadrature(max(2, (design_order + 2) // 2))


def sh_transform(grid, samples, order):
    """SH coefficients c[l][m] = sum_nodes w * sample * Y_l^m(node)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (grid.weights.size,):
        raise ValidationError(
            f"sample count {samples.size} does not match grid node count {grid.weights.size}"
        )
    if grid.design_order < 2 * order:
        raise ValidationError(
            f"grid design order {grid.design_order} < 2 * {order}; transform would not be exact"
        )
    basis = sh_basis(grid.dirs, order)
    return SHCoeffs(order, basis.T @ (grid.weights * samples))


@dataclass(frozen=True, eq=False)
class LambertianKernel:
    """Funk-Hecke multipliers k[0..order] of the clipped cosine max(0, cos)."""

    order: int
    values: np.ndarray

    def __getitem__(self, l):
        return float(self.values[l])

    def per_coefficient(self, order=None):
        """k[l] repeated across the 2l+1 coefficients of each degree."""
        order = self.order if order is None else order
        return np.repeat(self.values[: order + 1], 2 * np.arange(order + 1) + 1)


def lambertian_kernel(order, grid=None):
    """Clipped-cosine kernel coefficients up to ``order``.

    The 1-D integral 2 pi int_0^1 t P_l(t) dt is evaluated with ``grid.n``
    Gauss-Legendre nodes mapped onto [0, 1], which is exact for polynomials
    up to the grid's design order. Splitting at t = 0 removes the kink of
    max(0, t), so odd degrees > 1 come out zero to rounding.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValidationError(f"kernel order must be in [0, {MAX_ORDER}]")
    if grid is None:
        grid = quadrature_for_order(order + 2)
    if grid.design_order < order + 2:
        raise ValidationError(f"grid design order {grid.design_order} < {order + 2}")
    x, w = legendre.leggauss(grid.n)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    vals = np.empty(order + 1)
    for l in range(order + 1):
        unit = np.zeros(l + 1)
        unit[l] = 1.0
        vals[l] = 2.0 * np.pi * np.sum(w * t * legendre.legval(t, unit))
    vals.setflags(write=False)
    return LambertianKernel(order, vals)


def funk_hecke_convolve(light, kernel):
    """Irradiance coefficients i[l][m] = k[l] * light[l][m]."""
    if kernel.order < light.order:
        raise ValidationError(
            f"kernel order {kernel.order} is below light order {light.order}"
        )
    return SHCoeffs(light.order, light.values * kernel.per_coefficient(light.order))


def sh_product(f, g, order_out, grid=None):
    """SH coefficients (to ``order_out``) of the pointwise product f * g."""
    needed = f.order + g.order + order_out
    if grid is None:
        grid = quadrature_for_order(needed)
    elif grid.design_order < needed:
        raise ValidationError(
            f"grid design order {grid.design_order} < {needed} needed for an exact product"
        )
    basis = sh_basis(grid.dirs, max(f.order, g.order, order_out))
    fv = basis[:, : num_coeffs(f.order)] @ f.values
    gv = basis[:, : num_coeffs(g.order)] @ g.values
    out = basis[:, : num_coeffs(order_out)].T @ (grid.weights * fv * gv)
    return SHCoeffs(order_out, out)


def band_energy(c, l):
    """Sum over m of c[l][m]^2."""
    if not 0 <= l <= c.order:
        raise ValidationError(f"degree {l} outside 0..{c.order}")
    band = c.degree(l)
    return float(band @ band)


def band_energies(c):
    return np.array([band_energy(c, l) for l in range(c.order + 1)])


def zonal(per_degree):
    """Zonal coefficients: ``per_degree[l]`` placed at (l, 0)."""
    per_degree = np.asarray(per_degree, dtype=np.float64)
    order = per_degree.size - 1
    v = np.zeros(num_coeffs(order))
    for l, value in enumerate(per_degree):
        v[l * l + l] = value
    return SHCoeffs(order, v)


def zonal_projection(func, order, nodes=64, lower=-1.0):
    """Zonal SH coefficients of f(cos theta) supported on [lower, 1].

    Uses Gauss-Legendre on [lower, 1]; pass the kink location as ``lower``
    when ``func`` vanishes below it, so the rule sees a smooth integrand.
    """
    x, w = legendre.leggauss(nodes)
    half = 0.5 * (1.0 - lower)
    t = lower + half * (x + 1.0)
    w = half * w
    ft = np.asarray(func(t), dtype=np.float64)
    per_degree = np.empty(order + 1)
    for l in range(order + 1):
        unit = np.zeros(l + 1)
        unit[l] = 1.0
        norm = math.sqrt((2 * l + 1) / (4 * math.pi))
        per_degree[l] = 2.0 * np.pi * norm * np.sum(w * ft * legendre.legval(t, unit))
    return zonal(per_degree)


def _frame(v):
    """Orthonormal frame (rows e1, e2, v) with v as the third axis."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, v)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v, e1)
    return np.stack([e1, e2, v])


def direct_irradiance(light_fn, normals, n=16):
    """Evaluate i(v) = int r(u) max(0, u.v) du directly in the spatial domain.

    For each normal v the integral runs over the hemisphere around v with
    Gauss-Legendre in u.v on [0, 1] times 2n uniform azimuths, so the kink of
    max(0, .) sits on the boundary of the rule. For polynomial (band-limited)
    ``light_fn`` of degree <= 2n - 2 the result is exact to rounding. No
    harmonic machinery is involved beyond whatever ``light_fn`` does.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    x, w = legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    n_phi = 2 * n
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    tt, pp = np.meshgrid(t, phi, indexing="ij")
    st = np.sqrt(1.0 - tt * tt)
    local = np.stack([st * np.cos(pp), st * np.sin(pp), tt], axis=-1).reshape(-1, 3)
    local /= np.linalg.norm(local, axis=1, keepdims=True)
    weights = np.repeat(w * (2.0 * np.pi / n_phi), n_phi) * local[:, 2]
    out = np.empty(normals.shape[0])
    for i, v in enumerate(normals):
        u = local @ _frame(v)
        out[i] = weights @ light_fn(u)
    return out
