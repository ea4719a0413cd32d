"""Feature streams, contrastive embedding, classifiers, metrics and attribution."""

from .anomaly import LivePrior, live_prior_anomaly
from .attribution import occlusion_attribution
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    STREAMS,
    FeatureVector,
    extract_features,
    feature_matrix,
    featurize,
)
from .metrics import Metrics, evaluate, evaluate_scores, roc_curve, tpr_at_fpr
from .models import (
    ClassifierConfig,
    ClassifierModel,
    Detector,
    ablate_streams,
    train_classifier,
    train_detector,
)
from .supcon import EmbeddingConfig, EmbeddingModel, supcon_loss, train_embedding

__all__ = [
    "ClassifierConfig",
    "ClassifierModel",
    "Detector",
    "EmbeddingConfig",
    "EmbeddingModel",
    "FEATURE_NAMES",
    "FeatureVector",
    "LivePrior",
    "Metrics",
    "N_FEATURES",
    "STREAMS",
    "ablate_streams",
    "evaluate",
    "evaluate_scores",
    "extract_features",
    "feature_matrix",
    "featurize",
    "live_prior_anomaly",
    "occlusion_attribution",
    "roc_curve",
    "supcon_loss",
    "tpr_at_fpr",
    "train_classifier",
    "train_detector",
    "train_embedding",
]
