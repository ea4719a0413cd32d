"""Live-only prior: Mahalanobis distance to the live feature distribution."""

from dataclasses import dataclass

import numpy as np

from ..errors import FitError, ValidationError
from .features import log_features

REGULARIZATION = 1e-3
# the acceptance radius is this quantile of the training live distances
RADIUS_QUANTILE = 0.99


@dataclass(frozen=True, eq=False)
class LivePrior:
    """Scores are distances; higher means further from live (more spoof-like).

    ``radius`` is the decision boundary: samples farther than it are flagged.
    """

    mean: np.ndarray
    precision_chol: np.ndarray  # W with precision = W W^T
    columns: np.ndarray = None
    log: bool = True
    radius: float = np.inf

    def _prepare(self, features):
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return log_features(x) if self.log else x

    def score(self, features):
        x = self._prepare(features)
        if self.columns is not None:
            x = x[:, self.columns]
        d = (x - self.mean) @ self.precision_chol
        return np.sqrt(np.sum(d * d, axis=1))


def live_prior_anomaly(live_features, reg=REGULARIZATION, columns=None, log=True):
    """Fit mean and covariance + reg * trace/dim * I on live samples only.

    With ``log`` (the default) the model lives in log-feature space, like
    the classifiers.
    """
    x = np.atleast_2d(np.asarray(live_features, dtype=np.float64))
    if log:
        x = log_features(x)
    if columns is not None:
        columns = np.asarray(columns, dtype=np.int64)
        x = x[:, columns]
    n, dim = x.shape
    if n < dim + 1:
        raise ValidationError(f"need at least {dim + 1} live samples, got {n}")
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, bias=False).reshape(dim, dim)
    cov = cov + reg * np.trace(cov) / dim * np.eye(dim)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        evals, evecs = np.linalg.eigh(cov)
        raise FitError("live covariance is singular after regularisation", evecs[:, evals <= 0].T) from exc
    # precision = cov^-1 = L^-T L^-1, so whiten with L^-T
    inv_l = np.linalg.solve(chol, np.eye(dim))
    d = (x - mean) @ inv_l.T
    radius = float(np.quantile(np.sqrt(np.sum(d * d, axis=1)), RADIUS_QUANTILE))
    return LivePrior(mean, inv_l.T, columns, log, radius)
