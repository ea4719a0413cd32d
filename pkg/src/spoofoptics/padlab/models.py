"""Logistic-regression classifier and the detector pipeline built around it."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError, ValidationError
from .features import STREAM_PRESETS, log_features, parse_streams, stream_columns
from .metrics import evaluate_scores
from .supcon import EmbeddingConfig, train_embedding


@dataclass
class ClassifierConfig:
    l2: float = 1e-3
    learning_rate: float = 0.5
    steps: int = 2000
    seed: int = 0


@dataclass
class ClassifierModel:
    """p(live | x) = sigmoid(w . (x - mean) / scale + b); accept when p >= threshold."""

    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: float
    threshold: float = 0.5

    def decision(self, inputs):
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        return ((x - self.mean) / self.scale) @ self.weights + self.bias

    def score(self, inputs):
        return _sigmoid(self.decision(inputs))

    def predict(self, inputs):
        return (self.score(inputs) >= self.threshold).astype(np.int64)


def _sigmoid(t):
    out = np.empty_like(t, dtype=np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def train_classifier(inputs, labels, cfg=None):
    """L2-regularised logistic regression by full-batch gradient descent.

    Inputs are standardised per column first. The seed only drives the
    initial weights, which are small, so results are reproducible and
    essentially independent of it.
    """
    cfg = cfg or ClassifierConfig()
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValidationError("inputs and labels differ in length")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValidationError("classifier training needs both live (1) and spoof (0) samples")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    xs = (x - mean) / scale
    rng = np.random.default_rng(cfg.seed)
    w = rng.normal(scale=1e-3, size=x.shape[1])
    b = 0.0
    n = len(y)
    for step in range(cfg.steps):
        p = _sigmoid(xs @ w + b)
        r = p - y
        gw = xs.T @ r / n + cfg.l2 * w
        gb = float(r.mean())
        w = w - cfg.learning_rate * gw
        b -= cfg.learning_rate * gb
        if not np.all(np.isfinite(w)):
            raise TrainingError(f"weights diverged at step {step}", step)
    return ClassifierModel(mean, scale, w, float(b))


@dataclass
class Detector:
    """Stream selection, optional contrastive embedding, then a classifier.

    Operates on full feature matrices: features are log-transformed, the
    stream mask picks columns, the embedding (if any) maps them to the unit
    sphere and the classifier scores the result. The
    ``equalize`` flag records whether features were computed from
    histogram-equalised images, so the same preprocessing is applied at
    scoring time.
    """

    streams: tuple
    classifier: ClassifierModel
    embedding: object = None
    equalize: bool = False
    columns: np.ndarray = field(init=False)

    def __post_init__(self):
        self.streams = parse_streams(self.streams)
        self.columns = stream_columns(self.streams)

    @property
    def threshold(self):
        return self.classifier.threshold

    def transform(self, features):
        x = log_features(np.atleast_2d(features))[:, self.columns]
        if self.embedding is not None:
            x = self.embedding.embed(x)
        return x

    def score(self, features):
        return self.classifier.score(self.transform(features))


def train_detector(
    features,
    labels,
    streams="full",
    supcon=False,
    equalize=False,
    classifier_cfg=None,
    embedding_cfg=None,
):
    cols = stream_columns(streams)
    x = log_features(np.atleast_2d(features))[:, cols]
    embedding = None
    if supcon:
        embedding = train_embedding(x, labels, embedding_cfg or EmbeddingConfig())
        x = embedding.embed(x)
    clf = train_classifier(x, labels, classifier_cfg)
    return Detector(streams, clf, embedding, equalize)


def fold_indices(labels, folds, seed=0):
    """Stratified fold assignment: an int array of fold ids, one per sample."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    out = np.empty(len(labels), dtype=np.int64)
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        out[rng.permutation(idx)] = np.arange(idx.size) % folds
    return out


def cross_val_scores(features, labels, streams="full", folds=5, seed=0, **train_kw):
    """Out-of-fold scores from ``folds`` stratified train/test splits."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = np.asarray(labels)
    if folds < 2:
        raise ValidationError("cross-validation needs at least 2 folds")
    fold = fold_indices(labels, folds, seed)
    scores = np.empty(len(labels))
    for f in range(folds):
        test = fold == f
        det = train_detector(x[~test], labels[~test], streams, **train_kw)
        scores[test] = det.score(x[test])
    return scores


def ablate_streams(
    features,
    labels,
    configurations=("full", "no-albedo", "no-shading"),
    folds=5,
    seed=0,
    classifier_cfg=None,
    repeats=1,
):
    """Cross-validated metrics of one classifier per stream selection.

    Every configuration sees the same folds, so differences come from the
    streams alone. With ``repeats > 1`` the cross-validation is rerun on
    reshuffled folds (seeds ``seed .. seed + repeats - 1``) and the
    out-of-fold scores of all runs are pooled before computing metrics.
    """
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")
    labels = np.asarray(labels)
    pooled_labels = np.tile(labels, repeats)
    out = {}
    for name in configurations:
        spec = STREAM_PRESETS.get(name, name)
        scores = np.concatenate([
            cross_val_scores(features, labels, spec, folds, seed + r, classifier_cfg=classifier_cfg)
            for r in range(repeats)
        ])
        out[name] = evaluate_scores(scores, pooled_labels, ClassifierModel.threshold)
    return out
