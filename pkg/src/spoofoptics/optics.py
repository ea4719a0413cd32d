"""Rendering of live sphere images and simulated re-capture of printed photos.

Geometry: a sphere of radius ``R`` centred at the origin, seen by an
orthographic camera looking along -z. The image spans [-R, R] in x and y, so
the pixel at normalised coordinates (x, y) shows the surface normal
(x, y, sqrt(1 - x^2 - y^2)). A printed photo lies in the plane z = 0 with
half-width ``h``; its normalised coordinates are the same (x, y).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .errors import RenderError, ValidationError
from .image import Image, pixel_coords, sphere_normal_map
from .sh import (
    SHCoeffs,
    band_energies,
    funk_hecke_convolve,
    sh_basis,
    sh_product,
    zonal_projection,
)

logger = logging.getLogger(__name__)

MAX_CLAMPED_FRACTION = 0.01
_Y1 = np.sqrt(3.0 / (4.0 * np.pi))
# texture statistics are pinned on this fixed sampling of the visible disk
_REFERENCE_RESOLUTION = 64


@lru_cache(maxsize=1)
def _reference_normals():
    return sphere_normal_map(_REFERENCE_RESOLUTION).valid_normals()


@lru_cache(maxsize=8)
def _reference_projector(degree):
    """(basis, pseudo-inverse) of SH degrees <= ``degree`` on the reference disk."""
    basis = sh_basis(_reference_normals(), degree)
    return basis, np.linalg.pinv(basis)


@dataclass(frozen=True)
class AlbedoTexture:
    """Procedural albedo defined on the unit sphere of normals.

    A sum of signed Gaussian blobs (in angular distance) plus an optional
    linear ramp. The harmonics of degree <= ``detail_degree`` are projected
    out (least squares over a fixed reference sampling of the visible disk),
    so the albedo is pure detail and leaves low frequencies to shading. The
    result is standardised over the same sampling, mapped to
    ``mean * (1 + contrast * u)`` and clipped to [low, high]. Every seed thus
    has the same coefficient of variation and differs only in pattern. All
    randomness comes from ``numpy.random.default_rng(seed)``.
    """

    seed: int
    n_blobs: int = 300
    blob_width: float = 0.045
    mean: float = 0.6
    contrast: float = 0.2
    low: float = 0.05
    high: float = 1.0
    ramp: float = 0.0
    detail_degree: int = 6

    def __post_init__(self):
        if not 0.0 < self.low < self.high <= 1.0:
            raise ValidationError("albedo range must satisfy 0 < low < high <= 1")
        if not self.low <= self.mean <= self.high:
            raise ValidationError("mean albedo must lie in [low, high]")
        if self.contrast < 0:
            raise ValidationError("texture contrast must be non-negative")
        if self.blob_width <= 0:
            raise ValidationError("blob width must be positive")
        if not -1 <= self.detail_degree <= 8:
            raise ValidationError("detail_degree must be in [-1, 8] (-1 keeps all degrees)")

    def _params(self):
        rng = np.random.default_rng(self.seed)
        centres = rng.normal(size=(self.n_blobs, 3))
        centres[:, 2] = np.abs(centres[:, 2])  # keep blobs on the visible side
        centres /= np.linalg.norm(centres, axis=1, keepdims=True)
        amps = rng.choice([-1.0, 1.0], size=self.n_blobs) * rng.uniform(0.6, 1.2, size=self.n_blobs)
        widths = self.blob_width * rng.uniform(0.7, 1.3, size=self.n_blobs)
        ramp_dir = rng.normal(size=3)
        ramp_dir /= np.linalg.norm(ramp_dir)
        return centres, amps, widths, ramp_dir

    def _raw(self, normals, params):
        centres, amps, widths, ramp_dir = params
        cosang = normals @ centres.T
        return np.exp((cosang - 1.0) / widths**2) @ amps + self.ramp * (normals @ ramp_dir)

    def __call__(self, normals):
        normals = np.atleast_2d(normals)
        params = self._params()
        t = self._raw(normals, params)
        ref = self._raw(_reference_normals(), params)
        if self.detail_degree >= 0:
            basis, pinv = _reference_projector(self.detail_degree)
            low = pinv @ ref
            ref = ref - basis @ low
            t = t - sh_basis(normals, self.detail_degree) @ low
        sd = ref.std()
        u = (t - ref.mean()) / sd if sd > 0 else np.zeros_like(t)
        return np.clip(self.mean * (1.0 + self.contrast * u), self.low, self.high)


@dataclass(frozen=True)
class SphereScene:
    """Textured Lambertian sphere. ``texture=None`` means white albedo (1)."""

    resolution: int = 64
    radius: float = 1.0
    texture: AlbedoTexture = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("sphere radius must be positive")
        if self.resolution < 2:
            raise ValidationError("resolution must be >= 2")

    def normal_map(self):
        return sphere_normal_map(self.resolution)

    def albedo(self, normals):
        if self.texture is None:
            return np.ones(len(normals))
        return self.texture(normals)

    def albedo_image(self):
        nm = self.normal_map()
        px = np.zeros(nm.shape)
        px[nm.mask] = self.albedo(nm.valid_normals())
        return Image(px, nm.mask)


@dataclass(frozen=True)
class PointLight:
    position: np.ndarray
    intensity: float = 1.0

    def __post_init__(self):
        p = np.array(self.position, dtype=np.float64).reshape(3)
        if self.intensity <= 0:
            raise ValidationError("light intensity must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class PlanarIlluminationField:
    """Affine intensity a*x + b*y + c over normalised photo coordinates."""

    a: float
    b: float
    c: float

    def __call__(self, x, y):
        return self.a * np.asarray(x) + self.b * np.asarray(y) + self.c

    @property
    def is_positive(self):
        # minimum of an affine function over the square is at a corner
        return self.c - abs(self.a) - abs(self.b) > 0

    def require_positive(self):
        if not self.is_positive:
            raise ValidationError(f"illumination field {self} is not positive over the photo")
        return self

    def as_image(self, height, width):
        x, y = pixel_coords(height, width)
        return self(x, y)

    def as_sh(self):
        """The field as an order-1 SH function of the normal (x = n_x, y = n_y)."""
        return SHCoeffs.from_dict(
            1,
            {(0, 0): self.c * 2.0 * np.sqrt(np.pi), (1, 1): self.a / _Y1, (1, -1): self.b / _Y1},
        )


class PlanarFit(NamedTuple):
    field: PlanarIlluminationField
    exact: Callable  # exact(x, y) over normalised photo coordinates


def distant_irradiance(light, kernel, normals):
    """Irradiance at unit ``normals`` under distant SH lighting (unclamped)."""
    irr = funk_hecke_convolve(light, kernel)
    return sh_basis(normals, irr.order) @ irr.values


def render_live_distant(scene, light, kernel, max_clamped=MAX_CLAMPED_FRACTION):
    """Image of the scene under distant lighting ``light`` (SH coefficients).

    Negative irradiance (possible for band-limited lights) is clamped to 0;
    more than ``max_clamped`` of the silhouette clamped raises RenderError.
    """
    nm = scene.normal_map()
    normals = nm.valid_normals()
    shading = distant_irradiance(light, kernel, normals)
    negative = shading < 0
    frac = negative.mean() if negative.size else 0.0
    if frac > max_clamped:
        raise RenderError(f"lighting clamps {frac:.2%} of pixels (limit {max_clamped:.0%})")
    if negative.any():
        logger.debug("clamped %d negative-irradiance pixels", int(negative.sum()))
    px = np.zeros(nm.shape)
    px[nm.mask] = scene.albedo(normals) * np.maximum(shading, 0.0)
    return Image(px, nm.mask)


def near_irradiance(light, radius, normals):
    """Irradiance I max(0, n.l) / d^2 at sphere points radius * n."""
    normals = np.atleast_2d(normals)
    to_light = light.position[None, :] - radius * normals
    dist = np.linalg.norm(to_light, axis=1)
    cos_in = np.einsum("ij,ij->i", normals, to_light) / dist
    return light.intensity * np.maximum(cos_in, 0.0) / dist**2


def render_live_near(scene, light):
    """Image under a point light, single bounce, no cast shadows."""
    if np.linalg.norm(light.position) <= scene.radius:
        raise ValidationError("point light must be outside the sphere")
    nm = scene.normal_map()
    normals = nm.valid_normals()
    px = np.zeros(nm.shape)
    px[nm.mask] = scene.albedo(normals) * near_irradiance(light, scene.radius, normals)
    return Image(px, nm.mask)


def near_light_band_fractions(distance, radius=1.0, order=8, nodes=96):
    """Per-degree energy fractions of the irradiance-over-normals function.

    The light sits at ``distance`` from the sphere centre. The irradiance is
    zonal about the light axis and band energies are rotation invariant, so a
    1-D Legendre analysis on [R/D, 1] (the lit cap) is exact up to the rule.
    Fractions are relative to the total energy integral of E^2 on the sphere.
    """
    if distance <= radius:
        raise ValidationError("light must be outside the sphere")
    d, r = float(distance), float(radius)

    def irradiance(t):
        return (d * t - r) / (d * d + r * r - 2 * d * r * t) ** 1.5

    lower = r / d
    coeffs = zonal_projection(irradiance, order, nodes=nodes, lower=lower)
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (1.0 - lower)
    t = lower + half * (x + 1.0)
    total = 2.0 * np.pi * half * np.sum(w * irradiance(t) ** 2)
    return band_energies(coeffs) / total


def planar_illumination(light, photo_halfwidth, obliquity=False, samples=129):
    """Affine least-squares fit to the illumination a point light casts on a photo.

    The photo occupies [-h, h]^2 in the plane z = 0 and the light must be in
    front of it (z > 0). The exact field is intensity / d^2, i.e. the light
    arriving at each point; with ``obliquity=True`` it also carries the
    cosine of the incidence angle (irradiance on the paper).
    """
    if photo_halfwidth <= 0:
        raise ValidationError("photo half-width must be positive")
    if light.position[2] <= 0:
        raise ValidationError("light must be in front of the photo plane (z > 0)")
    h = float(photo_halfwidth)
    px, py, pz = light.position

    def exact(x, y):
        dx = px - h * np.asarray(x)
        dy = py - h * np.asarray(y)
        d2 = dx * dx + dy * dy + pz * pz
        e = light.intensity / d2
        if obliquity:
            e = e * pz / np.sqrt(d2)
        return e

    u = np.linspace(-1.0, 1.0, samples)
    gx, gy = np.meshgrid(u, u)
    design = np.stack([gx.ravel(), gy.ravel(), np.ones(gx.size)], axis=1)
    coef, *_ = np.linalg.lstsq(design, exact(gx, gy).ravel(), rcond=None)
    return PlanarFit(PlanarIlluminationField(*map(float, coef)), exact)


def print_tone(photo, gamma):
    """Print contrast loss: mean + gamma * (v - mean) over the valid pixels."""
    if not 0.0 < gamma <= 1.0:
        raise ValidationError(f"contrast factor must be in (0, 1], got {gamma}")
    if gamma == 1.0:
        return photo.pixels
    mean = photo.values().mean()
    return mean + gamma * (photo.pixels - mean)


def capture_spoof(photo, field, gamma=1.0):
    """Re-photograph ``photo`` printed with contrast ``gamma`` under ``field``."""
    field.require_positive()
    x, y = pixel_coords(*photo.shape)
    return photo.masked(field(x, y) * print_tone(photo, gamma))


def spoof_irradiance(irradiance, field):
    """SH coefficients of field(n_x, n_y) * irradiance(n); order grows by one."""
    return sh_product(field.as_sh(), irradiance, irradiance.order + 1)
