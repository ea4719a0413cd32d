"""Three-stream feature vectors: image, recovered albedo, shading."""

from dataclasses import dataclass

import numpy as np

from ..decompose import albedo_artifact_stats, decompose
from ..errors import ValidationError
from ..imstats import histogram_equalize, rms_contrast

STREAMS = {
    "image": ("contrast", "mean", "variance", "gradient_energy"),
    "albedo": ("albedo_mean", "albedo_variance", "albedo_gradient_energy", "leakage"),
    "shading": ("shading_deg0", "shading_deg1", "shading_deg2", "residual_fraction"),
}
FEATURE_NAMES = tuple(name for names in STREAMS.values() for name in names)
N_FEATURES = len(FEATURE_NAMES)

STREAM_SLICES = {}
_start = 0
for _stream, _names in STREAMS.items():
    STREAM_SLICES[_stream] = slice(_start, _start + len(_names))
    _start += len(_names)

STREAM_PRESETS = {
    "full": ("image", "albedo", "shading"),
    "no-albedo": ("image", "shading"),
    "no-shading": ("image", "albedo"),
    "no-image": ("albedo", "shading"),
}

# gradient and albedo statistics skip the silhouette rim, where shading -> 0
# and the recovered albedo is ill conditioned
INTERIOR_MIN_NZ = 0.3


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size != N_FEATURES:
            raise ValidationError(f"feature vector needs {N_FEATURES} entries")
        if not np.all(np.isfinite(v)):
            raise ValidationError("feature vector has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def stream(self, name):
        return self.values[STREAM_SLICES[name]]

    def as_dict(self):
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


# every entry is a non-negative scale-like statistic; classifiers and the
# live prior work on their logs so multiplicative nuisances (exposure,
# texture strength) become additive shifts
LOG_FLOOR = 1e-12


def log_features(features):
    return np.log(np.maximum(np.asarray(features, dtype=np.float64), LOG_FLOOR))


def parse_streams(spec):
    """Selection tuple from a preset name or a comma list such as ``image,albedo``.

    Entries are stream names or single feature names (``contrast``), so a
    one-column classifier can be expressed in the same syntax.
    """
    if isinstance(spec, (tuple, list)):
        names = tuple(spec)
    elif spec in STREAM_PRESETS:
        names = STREAM_PRESETS[spec]
    else:
        names = tuple(s.strip() for s in str(spec).split(",") if s.strip())
    if not names:
        raise ValidationError("stream selection must keep at least one stream")
    unknown = [n for n in names if n not in STREAMS and n not in FEATURE_NAMES]
    if unknown:
        raise ValidationError(
            f"unknown stream(s) {unknown}; choose from {list(STREAMS)} or a feature name"
        )
    order = list(STREAMS) + list(FEATURE_NAMES)
    return tuple(n for n in order if n in names)


def stream_columns(streams):
    """Column indices of the selected streams, in canonical order."""
    cols = set()
    for name in parse_streams(streams):
        if name in STREAM_SLICES:
            sl = STREAM_SLICES[name]
            cols.update(range(sl.start, sl.stop))
        else:
            cols.add(FEATURE_NAMES.index(name))
    return np.array(sorted(cols), dtype=np.int64)


def interior_gradient_energy(img, normals):
    """Mean squared forward difference over the interior, per unit length^2.

    A horizontal (vertical) difference counts when both pixels are inside
    the silhouette and the mean n_z of the pair is >= INTERIOR_MIN_NZ. Judging
    membership at the pair midpoint keeps the region boundary where it is;
    requiring both pixels to pass would shrink it by half a pixel exactly
    where gradients peak. Pixel pitch is 2 / width in normalised units.
    """
    valid = normals.mask
    nz = normals.normals[..., 2]
    px = img.pixels
    horiz = valid[:, :-1] & valid[:, 1:] & (0.5 * (nz[:, :-1] + nz[:, 1:]) >= INTERIOR_MIN_NZ)
    vert = valid[:-1, :] & valid[1:, :] & (0.5 * (nz[:-1, :] + nz[1:, :]) >= INTERIOR_MIN_NZ)
    energy = 0.0
    for diffs, keep in ((np.diff(px, axis=1), horiz), (np.diff(px, axis=0), vert)):
        if keep.any():
            energy += float(np.mean(diffs[keep] ** 2))
    return energy * (img.width / 2.0) ** 2


def extract_features(img, dec, normals):
    """Deterministic statistics of the image and its decomposition."""
    if img.shape != normals.shape:
        raise ValidationError("image and normal map shapes differ")
    img_stats = albedo_artifact_stats(img)
    interior = normals.mask & (normals.normals[..., 2] >= INTERIOR_MIN_NZ)
    alb_stats = albedo_artifact_stats(dec.albedo, region=interior)
    band = [float(np.linalg.norm(dec.irradiance.degree(l))) for l in range(3)]
    values = [
        rms_contrast(img),
        img_stats.mean,
        img_stats.variance,
        interior_gradient_energy(img, normals),
        alb_stats.mean,
        alb_stats.variance,
        interior_gradient_energy(dec.albedo, normals),
        dec.leakage,
        *band,
        dec.residual_fraction,
    ]
    return FeatureVector(np.array(values))


def featurize(img, normals, kernel, equalize=False):
    """Decompose ``img`` (optionally histogram-equalised first) and extract features."""
    if equalize:
        img = histogram_equalize(img)
    return extract_features(img, decompose(img, normals, kernel), normals)


def feature_matrix(images, normals, kernel, equalize=False):
    """Stack feature vectors of ``images`` (all sharing one normal map) row-wise."""
    rows = [featurize(im, normals, kernel, equalize).values for im in images]
    return np.array(rows).reshape(len(rows), N_FEATURES)
