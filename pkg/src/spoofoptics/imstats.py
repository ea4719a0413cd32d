"""Contrast statistics, histogram equalisation and planar gain regression."""

from typing import NamedTuple

import numpy as np

from .errors import FitError, ValidationError
from .image import pixel_coords
from .optics import PlanarIlluminationField

DEFAULT_BINS = 256


class ClassContrast(NamedTuple):
    mean: float
    std: float
    count: int


def rms_contrast(img):
    """Root mean square of the mean-subtracted valid pixels."""
    vals = img.values()
    if vals.size == 0:
        raise ValidationError("contrast needs at least one valid pixel")
    centred = vals - vals.mean()
    return float(np.sqrt(np.mean(centred * centred)))


def contrast_stats(images, labels):
    """Per-label mean and (population) standard deviation of rms_contrast."""
    values = np.array([rms_contrast(im) for im in images])
    labels = np.asarray(labels)
    out = {}
    for lab in np.unique(labels):
        v = values[labels == lab]
        out[lab.item() if hasattr(lab, "item") else lab] = ClassContrast(
            float(v.mean()), float(v.std()), int(v.size)
        )
    return out


def histogram_equalize(img, bins=DEFAULT_BINS, value_range=(0.0, 1.0)):
    """CDF remapping over the valid pixels; output in [0, 1].

    Pixels are clipped to ``value_range`` and binned into ``bins`` equal bins;
    each pixel maps to the cumulative fraction of valid pixels in its bin or
    below. The map is monotone, so pixel order is preserved. A constant image
    has a one-bin histogram and maps to 1 everywhere.
    """
    if bins < 2:
        raise ValidationError("need at least 2 bins")
    lo, hi = value_range
    if not hi > lo:
        raise ValidationError("value range must be increasing")
    valid = img.valid
    scaled = (np.clip(img.pixels, lo, hi) - lo) / (hi - lo)
    idx = np.minimum((scaled * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx[valid], minlength=bins)
    total = counts.sum()
    if total == 0:
        return img
    cdf = np.cumsum(counts) / total
    return img.masked(cdf[idx])


def _planar_design(live):
    x, y = pixel_coords(*live.shape)
    v = live.valid
    lv = live.pixels[v]
    return np.stack([x[v] * lv, y[v] * lv, lv], axis=1)


def fit_planar_gain(live, spoof, return_stderr=False):
    """Least-squares (a, b, c) minimising sum (spoof - (a x + b y + c) live)^2.

    With ``return_stderr`` also returns the residual-based standard errors of
    (a, b, c) (ordinary least-squares formula).
    """
    if live.shape != spoof.shape:
        raise ValidationError(f"shape mismatch {live.shape} vs {spoof.shape}")
    if not np.array_equal(live.valid, spoof.valid):
        raise ValidationError("live and spoof masks differ")
    if not np.any(live.values()):
        raise ValidationError("live image is identically zero")
    design = _planar_design(live)
    target = spoof.pixels[live.valid]
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    if s[-1] <= 1e-12 * s[0]:
        raise FitError("planar gain design is degenerate", vt[s <= 1e-12 * s[0]])
    coef = vt.T @ ((u.T @ target) / s)
    field = PlanarIlluminationField(*map(float, coef))
    if not return_stderr:
        return field
    resid = target - design @ coef
    dof = max(len(target) - 3, 1)
    sigma2 = float(resid @ resid) / dof
    cov = (vt.T / s**2) @ vt * sigma2
    return field, np.sqrt(np.diag(cov))


def apply_gain(img, field):
    """Pixelwise img * field(x, y)."""
    field.require_positive()
    x, y = pixel_coords(*img.shape)
    return img.masked(img.pixels * field(x, y))


def equalize_all(images, bins=DEFAULT_BINS):
    return [histogram_equalize(im, bins) for im in images]

