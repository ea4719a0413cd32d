"""Deterministic synthetic corpus of matched live/spoof sphere images.

Scene ``i`` is driven entirely by ``scene_seed``, the first 32-bit word
generated from ``SeedSequence([master_seed, i])``. From it come the albedo
texture, the distant lighting (redrawn until it passes the render gate), the
spoof's illumination field and the print contrast factor. Samples are thus
independent of generation order and thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import RenderError, SpoofOpticsError, ValidationError
from ..optics import (
    AlbedoTexture,
    PlanarIlluminationField,
    SphereScene,
    capture_spoof,
    render_live_distant,
)
from ..sh import SHCoeffs, lambertian_kernel, num_coeffs
from .imageio import load_image, save_image
from .manifest import Manifest, SampleRecord, save_manifest

MANIFEST_NAME = "manifest.tsv"
LIGHT_ORDER = 2
_Y00 = 0.5 / np.sqrt(np.pi)
_MAX_LIGHT_TRIES = 1000


class GenerationError(SpoofOpticsError, OSError):
    """Writing a sample failed; the message names the sample."""


@dataclass(frozen=True)
class CorpusConfig:
    n_per_class: int = 200
    resolution: int = 64
    seed: int = 0
    # mean irradiance level (the DC term of the shading), uniform in range
    ambient_min: float = 0.48
    ambient_max: float = 0.52
    # each degree-1 (degree-2) lighting coefficient is uniform in
    # +-light_rel1 * DC (+-light_rel2 * DC)
    light_rel1: float = 0.1
    light_rel2: float = 0.4
    albedo_mean: float = 0.6
    albedo_contrast: float = 0.2
    albedo_low: float = 0.05
    albedo_high: float = 1.0
    n_blobs: int = 300
    blob_width: float = 0.045
    detail_degree: int = 6
    # spoof field: slope magnitude sqrt(a^2 + b^2) / c uniform in range,
    # direction uniform; c uniform in [gain_min, gain_max]
    slope_min: float = 0.0
    slope_max: float = 0.15
    gain_min: float = 0.97
    gain_max: float = 1.03
    gamma_min: float = 0.7
    gamma_max: float = 0.95

    def __post_init__(self):
        checks = [
            (self.n_per_class >= 0, "n_per_class must be >= 0"),
            (self.resolution >= 32, "resolution must be >= 32"),
            (0 < self.ambient_min <= self.ambient_max, "need 0 < ambient_min <= ambient_max"),
            (0 <= self.light_rel1 <= 0.4, "light_rel1 must be in [0, 0.4]"),
            (0 <= self.light_rel2 <= 0.4, "light_rel2 must be in [0, 0.4]"),
            (0 < self.albedo_low < self.albedo_high <= 1, "need 0 < albedo_low < albedo_high <= 1"),
            (self.albedo_low <= self.albedo_mean <= self.albedo_high, "albedo_mean outside range"),
            (self.albedo_contrast >= 0, "albedo_contrast must be >= 0"),
            (self.n_blobs >= 0 and self.blob_width > 0, "bad texture parameters"),
            (0 <= self.slope_min <= self.slope_max <= 0.5, "need 0 <= slope_min <= slope_max <= 0.5"),
            (0 < self.gain_min <= self.gain_max, "need 0 < gain_min <= gain_max"),
            (0 < self.gamma_min <= self.gamma_max <= 1, "need 0 < gamma_min <= gamma_max <= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string values (config files, manifest echo)."""
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ValidationError(f"unknown corpus option {key!r}")
            caster = int if known[key] in (int, "int") else float
            try:
                kwargs[key] = caster(value)
            except ValueError:
                raise ValidationError(f"option {key}={value!r} is not a number") from None
        return cls(**kwargs)

    def as_strings(self):
        return {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(self).items()}


def scene_seed(master_seed, index):
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


@dataclass(frozen=True)
class ScenePair:
    live_record: SampleRecord
    spoof_record: SampleRecord
    live: object
    spoof: object


def texture_for(cfg, seed):
    return AlbedoTexture(
        seed=seed,
        n_blobs=cfg.n_blobs,
        blob_width=cfg.blob_width,
        mean=cfg.albedo_mean,
        contrast=cfg.albedo_contrast,
        low=cfg.albedo_low,
        high=cfg.albedo_high,
        detail_degree=cfg.detail_degree,
    )


def sample_lighting(rng, cfg):
    ambient = rng.uniform(cfg.ambient_min, cfg.ambient_max)
    dc = ambient / (np.pi * _Y00)
    v = np.empty(num_coeffs(LIGHT_ORDER))
    v[0] = dc
    v[1:4] = rng.uniform(-cfg.light_rel1, cfg.light_rel1, 3) * dc
    v[4:] = rng.uniform(-cfg.light_rel2, cfg.light_rel2, 5) * dc
    return SHCoeffs(LIGHT_ORDER, v)


def sample_field(rng, cfg):
    c = rng.uniform(cfg.gain_min, cfg.gain_max)
    slope = rng.uniform(cfg.slope_min, cfg.slope_max)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    return PlanarIlluminationField(slope * c * np.cos(phi), slope * c * np.sin(phi), c)


def make_pair(cfg, index, kernel=None):
    """Render live scene ``index`` and its spoof; nothing touches the disk."""
    kernel = kernel or lambertian_kernel(LIGHT_ORDER)
    seed = scene_seed(cfg.seed, index)
    rng = np.random.default_rng(seed)
    scene = SphereScene(cfg.resolution, 1.0, texture_for(cfg, seed))
    for _ in range(_MAX_LIGHT_TRIES):
        light = sample_lighting(rng, cfg)
        try:
            live = render_live_distant(scene, light, kernel)
            break
        except RenderError:
            continue
    else:
        raise ValidationError(f"scene {index}: no admissible lighting in {_MAX_LIGHT_TRIES} draws")
    # stored images are float32; quantise before capture so the spoof is
    # reproducible from the stored live image
    live = live.masked(live.pixels.astype(np.float32).astype(np.float64))
    field = sample_field(rng, cfg)
    gamma = rng.uniform(cfg.gamma_min, cfg.gamma_max)
    spoof = capture_spoof(live, field, gamma)
    spoof = spoof.masked(spoof.pixels.astype(np.float32).astype(np.float64))
    live_id, spoof_id = f"live-{index:05d}", f"spoof-{index:05d}"
    lighting = tuple(float(v) for v in light.values)
    live_rec = SampleRecord(live_id, "live", seed, lighting, live_id + ".pfm")
    spoof_rec = SampleRecord(
        spoof_id,
        "spoof",
        seed,
        lighting,
        spoof_id + ".pfm",
        source=live_id,
        gamma=float(gamma),
        field=(field.a, field.b, field.c),
    )
    return ScenePair(live_rec, spoof_rec, live, spoof)


def resolve_threads(threads=None):
    """Explicit value, else SPOOFOPTICS_THREADS, else 1; 0 means all cores."""
    if threads is None:
        env = os.environ.get("SPOOFOPTICS_THREADS", "").strip()
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ValidationError(f"SPOOFOPTICS_THREADS={env!r} is not an integer") from None
    if threads < 0:
        raise ValidationError("thread count must be >= 0")
    return threads or (os.cpu_count() or 1)


def generate_pairs(cfg, threads=None):
    """All scene pairs in index order (rendered in memory)."""
    kernel = lambertian_kernel(LIGHT_ORDER)
    n = resolve_threads(threads)
    if n == 1:
        return [make_pair(cfg, i, kernel) for i in range(cfg.n_per_class)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda i: make_pair(cfg, i, kernel), range(cfg.n_per_class)))


def generate_corpus(cfg, out_dir, threads=None):
    """Render the corpus into ``out_dir`` and write its manifest."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise GenerationError(f"cannot create {out_dir}: {exc}") from exc
    pairs = generate_pairs(cfg, threads)
    for pair in pairs:
        for rec, img in ((pair.live_record, pair.live), (pair.spoof_record, pair.spoof)):
            try:
                save_image(os.path.join(out_dir, rec.path), img)
            except OSError as exc:
                raise GenerationError(f"sample {rec.id}: {exc}") from exc
    records = [p.live_record for p in pairs] + [p.spoof_record for p in pairs]
    manifest = Manifest(cfg.as_strings(), records)
    try:
        save_manifest(os.path.join(out_dir, MANIFEST_NAME), manifest)
    except OSError as exc:
        raise GenerationError(f"manifest: {exc}") from exc
    return manifest


def load_sample(corpus_dir, record):
    return load_image(os.path.join(corpus_dir, record.path))


def reproduce_spoof(live, record):
    """Re-run the capture for a spoof record on its (stored) live source."""
    a, b, c = record.field
    spoof = capture_spoof(live, PlanarIlluminationField(a, b, c), record.gamma)
    return spoof.masked(spoof.pixels.astype(np.float32).astype(np.float64))
