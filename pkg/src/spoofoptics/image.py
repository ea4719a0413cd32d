"""Grayscale linear-intensity images and per-pixel normal maps."""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def pixel_coords(height, width):
    """Normalised pixel-centre coordinates in [-1, 1].

    ``x`` grows to the right along columns, ``y`` grows upward, so row 0 is
    the top of the image (y close to +1).
    """
    xs = (2.0 * np.arange(width) + 1.0) / width - 1.0
    ys = 1.0 - (2.0 * np.arange(height) + 1.0) / height
    return np.meshgrid(xs, ys)


@dataclass(frozen=True, eq=False)
class Image:
    """Row-major (height, width) float64 pixels with an optional validity mask.

    Pixels are linear intensities. Rendered and captured images are
    non-negative; residual images produced by decomposition are signed, so
    non-negativity is checked by :meth:`require_nonnegative` rather than here.
    """

    pixels: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ValidationError(f"image must be 2-D, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValidationError("image has non-finite pixels")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if self.mask is not None:
            m = np.array(self.mask, dtype=bool)
            if m.shape != px.shape:
                raise ValidationError(f"mask shape {m.shape} != image shape {px.shape}")
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def valid(self):
        """Boolean validity mask (all True when no mask is attached)."""
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    def values(self):
        """1-D array of the valid pixels in row-major order."""
        return self.pixels[self.valid]

    def masked(self, pixels):
        """New image with ``pixels`` zeroed outside this image's mask."""
        pixels = np.asarray(pixels, dtype=np.float64)
        if self.mask is not None:
            pixels = np.where(self.mask, pixels, 0.0)
        return Image(pixels, self.mask)

    def require_nonnegative(self):
        if np.any(self.values() < 0):
            raise ValidationError("image has negative pixels")
        return self

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        if (self.mask is None) != (other.mask is None):
            return False
        same_mask = self.mask is None or np.array_equal(self.mask, other.mask)
        return same_mask and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class NormalMap:
    """Per-pixel unit normals, shape (height, width, 3), with a validity mask."""

    normals: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        n = np.array(self.normals, dtype=np.float64)
        m = np.array(self.mask, dtype=bool)
        if n.ndim != 3 or n.shape[2] != 3 or m.shape != n.shape[:2]:
            raise ValidationError("normal map must be (H, W, 3) with an (H, W) mask")
        if m.any():
            lengths = np.linalg.norm(n[m], axis=1)
            if np.max(np.abs(lengths - 1.0)) > 1e-9:
                raise ValidationError("normals must be unit length where valid")
        n.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "mask", m)

    @property
    def shape(self):
        return self.mask.shape

    def valid_normals(self):
        """(N, 3) array of valid normals in row-major pixel order."""
        return self.normals[self.mask]


def sphere_normal_map(resolution):
    """Normals of a sphere filling a square orthographic view.

    The camera looks along -z, so visible normals have z > 0. A pixel is
    inside the silhouette when its centre lies strictly inside the unit disk.
    """
    if resolution < 2:
        raise ValidationError("resolution must be at least 2")
    x, y = pixel_coords(resolution, resolution)
    r2 = x * x + y * y
    mask = r2 < 1.0
    z = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    normals = np.stack([x, y, z], axis=-1)
    normals[~mask] = (0.0, 0.0, 1.0)
    return NormalMap(normals, mask)
