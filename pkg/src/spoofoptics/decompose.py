"""Physics-based image decomposition with known geometry.

The shading model is a band-limited irradiance over the per-pixel normals,
``shading(n) = sum_{l <= order} s[l][m] Y_l^m(n)``, fitted to the image by
linear least squares under a white-albedo assumption. For orders <= 2 the
irradiance coefficients map one-to-one onto lighting coefficients through the
Lambertian kernel (``lighting = s / k``). Degree 3 has k[3] = 0, so an
order-3 fit is only meaningful in irradiance terms: it measures structure no
distant Lambertian lighting can produce.

Albedo artefacts are operationalised two ways: the *leakage score* (share of
image energy explained by degree 3 but not by degree <= 2) and the
gradient energy of the recovered albedo.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import FitError, ValidationError
from .image import Image
from .sh import SHCoeffs, num_coeffs, sh_basis

_RANK_TOL = 1e-10
DEFAULT_FLOOR_FRACTION = 1e-4


class AlbedoStats(NamedTuple):
    mean: float
    variance: float
    gradient_energy: float


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    lighting: SHCoeffs  # distant lighting, order <= 2
    irradiance: SHCoeffs  # fitted shading coefficients
    shading: Image
    albedo: Image
    residual: Image  # image - shading, signed
    leakage: float
    residual_fraction: float  # order-2 residual energy / image energy


def _design(normals, order):
    if order not in (0, 1, 2, 3):
        raise ValidationError(f"fit order must be 0..3, got {order}")
    return sh_basis(normals.valid_normals(), order)


def _check_inputs(img, normals):
    if img.shape != normals.shape:
        raise ValidationError(f"image shape {img.shape} != normal map shape {normals.shape}")
    if img.mask is not None and not np.array_equal(img.mask, normals.mask):
        raise ValidationError("image mask differs from normal-map mask")


def _solve(design, target):
    gtg, gty, _ = kernels.gram(np.ascontiguousarray(design), np.ascontiguousarray(target))
    scale = np.sqrt(np.diag(gtg))
    if np.any(scale == 0):
        dead = np.flatnonzero(scale == 0)
        null = np.eye(len(scale))[dead]
        raise FitError(f"design columns {dead.tolist()} are identically zero", null)
    corr = gtg / np.outer(scale, scale)
    evals, evecs = np.linalg.eigh(corr)
    small = evals < _RANK_TOL * evals[-1]
    if np.any(small):
        null = (evecs[:, small] / scale[:, None]).T
        null /= np.linalg.norm(null, axis=1, keepdims=True)
        raise FitError(
            f"rank-deficient design: {int(small.sum())} degenerate direction(s) in coefficient space",
            null,
        )
    return (evecs @ ((evecs.T @ (gty / scale)) / evals)) / scale


def fit_sh_lighting(img, normals, kernel, order=2):
    """Least-squares band-limited shading fit.

    Returns ``(irradiance, shading)``: the irradiance coefficients s[l][m]
    minimising sum_valid (img - sum s[l][m] Y_l^m(n))^2 and the shading image
    they synthesise. ``kernel`` must cover ``order`` (it is what converts the
    result to lighting via :func:`lighting_from_irradiance`).
    """
    _check_inputs(img, normals)
    if kernel.order < order:
        raise ValidationError(f"kernel order {kernel.order} < fit order {order}")
    design = _design(normals, order)
    if design.shape[0] < num_coeffs(order):
        raise ValidationError(
            f"need at least {num_coeffs(order)} valid pixels for an order-{order} fit"
        )
    coeffs = _solve(design, img.pixels[normals.mask])
    px = np.zeros(img.shape)
    px[normals.mask] = design @ coeffs
    return SHCoeffs(order, coeffs), Image(px, normals.mask)


def lighting_from_irradiance(irradiance, kernel):
    """Invert the Funk-Hecke multipliers for degrees where k[l] != 0 (l <= 2)."""
    if irradiance.order > 2:
        raise ValidationError("lighting is only identifiable up to degree 2")
    return SHCoeffs(irradiance.order, irradiance.values / kernel.per_coefficient(irradiance.order))


def residual_energy(img, normals, order):
    """Sum of squared residuals of the order-``order`` fit over valid pixels."""
    design = _design(normals, order)
    target = img.pixels[normals.mask]
    coeffs = _solve(design, target)
    r = target - design @ coeffs
    return float(r @ r)


def recover_albedo(img, shading, floor):
    """Albedo = img / max(shading, floor), masked like ``img``."""
    if floor <= 0:
        raise ValidationError("shading floor must be positive")
    return img.masked(img.pixels / np.maximum(shading.pixels, floor))


def leakage_score(img, normals, kernel=None):
    """(residual energy at order 2 - at order 3) / total image energy, in [0, 1].

    ``kernel`` is accepted for interface symmetry with the other fits; the
    score is defined on irradiance and does not depend on it.
    """
    _check_inputs(img, normals)
    target = img.pixels[normals.mask]
    total = float(target @ target)
    if total == 0.0:
        return 0.0
    design = _design(normals, 3)
    energies = []
    for order in (2, 3):
        cols = design[:, : num_coeffs(order)]
        r = target - cols @ _solve(cols, target)
        energies.append(float(r @ r))
    return float(np.clip((energies[0] - energies[1]) / total, 0.0, 1.0))


def albedo_artifact_stats(albedo, region=None):
    """Mean, variance and gradient energy of ``albedo`` over its mask.

    Gradient energy is the mean of squared forward differences
    (dx^2 + dy^2) over pixels whose right and lower neighbours are also in the
    region. ``region`` optionally narrows the mask.
    """
    valid = albedo.valid if region is None else (albedo.valid & region)
    if not valid.any():
        raise ValidationError("albedo statistics need at least one valid pixel")
    vals = albedo.pixels[valid]
    px = albedo.pixels
    inner = valid[:-1, :-1] & valid[1:, :-1] & valid[:-1, 1:]
    if inner.any():
        dy = px[1:, :-1] - px[:-1, :-1]
        dx = px[:-1, 1:] - px[:-1, :-1]
        grad = float(np.mean((dx * dx + dy * dy)[inner]))
    else:
        grad = 0.0
    return AlbedoStats(float(vals.mean()), float(vals.var()), grad)


def decompose(img, normals, kernel, floor=None):
    """Order-2 decomposition into lighting, shading, albedo and residual."""
    irradiance, shading = fit_sh_lighting(img, normals, kernel, order=2)
    if floor is None:
        peak = float(np.max(img.values())) if img.values().size else 0.0
        floor = DEFAULT_FLOOR_FRACTION * peak if peak > 0 else DEFAULT_FLOOR_FRACTION
    albedo = recover_albedo(img, shading, floor)
    residual = img.masked(img.pixels - shading.pixels)
    res = residual.values()
    total = float(img.values() @ img.values())
    return DecompositionResult(
        lighting=lighting_from_irradiance(irradiance, kernel),
        irradiance=irradiance,
        shading=shading,
        albedo=albedo,
        residual=residual,
        leakage=leakage_score(img, normals, kernel),
        residual_fraction=float(res @ res) / total if total > 0 else 0.0,
    )
