"""Occlusion attribution: how much the liveness score drops when a patch is greyed out."""

import numpy as np

from ..errors import ValidationError
from ..image import Image


def patch_positions(size, patch, stride):
    starts = list(range(0, size - patch + 1, stride))
    if starts[-1] != size - patch:
        starts.append(size - patch)
    return starts


def occlusion_attribution(score_fn, img, patch=8, stride=4):
    """Heat map of ``score_fn(img) - score_fn(occluded)`` averaged over covering patches.

    ``score_fn`` maps an Image to a scalar liveness score. Occluded pixels are
    replaced by the mean of the valid pixels. Pixels covered by no patch (or
    outside the mask) get zero heat.
    """
    h, w = img.shape
    if not (1 <= patch <= min(h, w)):
        raise ValidationError(f"patch {patch} must be in 1..{min(h, w)}")
    if stride < 1:
        raise ValidationError("stride must be positive")
    vals = img.values()
    grey = float(vals.mean()) if vals.size else 0.0
    base = float(score_fn(img))
    total = np.zeros((h, w))
    count = np.zeros((h, w))
    for r in patch_positions(h, patch, stride):
        for c in patch_positions(w, patch, stride):
            px = np.array(img.pixels)
            px[r : r + patch, c : c + patch] = grey
            occluded = img.masked(px)
            drop = base - float(score_fn(occluded))
            total[r : r + patch, c : c + patch] += drop
            count[r : r + patch, c : c + patch] += 1
    heat = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    return Image(heat, img.mask)
