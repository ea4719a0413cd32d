"""Synthetic live/spoof corpus: generation, image files and manifest."""

from .generate import (
    MANIFEST_NAME,
    CorpusConfig,
    GenerationError,
    generate_corpus,
    generate_pairs,
    load_sample,
    make_pair,
    reproduce_spoof,
    scene_seed,
)
from .imageio import load_image, mask_path, save_image
from .manifest import Manifest, SampleRecord, load_manifest, save_manifest

__all__ = [
    "CorpusConfig",
    "GenerationError",
    "MANIFEST_NAME",
    "Manifest",
    "SampleRecord",
    "generate_corpus",
    "generate_pairs",
    "load_image",
    "load_manifest",
    "load_sample",
    "make_pair",
    "mask_path",
    "reproduce_spoof",
    "save_image",
    "save_manifest",
    "scene_seed",
]
