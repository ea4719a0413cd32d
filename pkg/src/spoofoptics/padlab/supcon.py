"""Supervised contrastive loss with analytic gradients, and a small embedding net.

Loss (sum over anchors i that have at least one positive)::

    L = sum_i -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau) )

where z are the L2-normalised inputs and P(i) the other samples sharing i's
label. The 1/|P(i)| factor sits outside the log.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError, ValidationError


def _normalise(v):
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValidationError("cannot normalise a zero embedding")
    return v / norms, norms


def supcon_loss(embeddings, labels, temperature=0.1):
    """Return ``(loss, grad)``; grad is d loss / d (pre-normalisation) embeddings."""
    v = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    n = v.shape[0]
    if n < 2:
        raise ValidationError("supervised contrastive loss needs a batch of at least 2")
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    z, norms = _normalise(v)
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    n_pos = same.sum(axis=1)
    anchors = n_pos > 0
    if not anchors.any():
        raise ValidationError("no anchor has a positive in this batch")

    logits = z @ z.T / temperature
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    denom = exp.sum(axis=1, keepdims=True)
    log_prob = logits - row_max - np.log(denom)
    prob = exp / denom

    pos_weight = np.zeros_like(logits)
    pos_weight[anchors] = same[anchors] / n_pos[anchors, None]
    np.fill_diagonal(log_prob, 0.0)
    loss = 0.0 - float(np.sum(pos_weight * log_prob))  # 0.0 rather than -0.0

    # d loss / d logits for anchor rows: softmax - positive weights
    coef = np.where(anchors[:, None], prob - pos_weight, 0.0)
    grad_z = (coef @ z + coef.T @ z) / temperature
    radial = np.sum(grad_z * z, axis=1, keepdims=True)
    grad_v = (grad_z - radial * z) / norms
    return loss, grad_v


@dataclass
class EmbeddingConfig:
    hidden: int = 16
    dim: int = 8
    temperature: float = 0.1
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 60
    batch_size: int = 32
    jitter: float = 0.05  # feature-space noise (standardised units) per view
    seed: int = 0


@dataclass
class EmbeddingModel:
    """Two-layer tanh network whose output is projected to the unit sphere."""

    mean: np.ndarray
    scale: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    losses: list = field(default_factory=list)

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def _forward(self, x):
        h = np.tanh(x @ self.w1 + self.b1)
        return h, h @ self.w2 + self.b2

    def embed(self, inputs):
        x = (np.atleast_2d(np.asarray(inputs, dtype=np.float64)) - self.mean) / self.scale
        _, out = self._forward(x)
        z, _ = _normalise(out)
        return z


def _standardiser(x):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def init_embedding(inputs, cfg):
    x = np.asarray(inputs, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    mean, scale = _standardiser(x)
    d = x.shape[1]
    return EmbeddingModel(
        mean=mean,
        scale=scale,
        w1=rng.normal(scale=1.0 / np.sqrt(d), size=(d, cfg.hidden)),
        b1=np.zeros(cfg.hidden),
        w2=rng.normal(scale=1.0 / np.sqrt(cfg.hidden), size=(cfg.hidden, cfg.dim)),
        b2=np.zeros(cfg.dim),
    )


def train_embedding(inputs, labels, cfg=None):
    """Mini-batch SGD (with momentum) on the supervised contrastive loss.

    Each batch holds two jittered views of every sample, so every anchor has
    at least one positive. The recorded loss is the per-anchor mean.
    """
    cfg = cfg or EmbeddingConfig()
    x_raw = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise ValidationError("embedding training needs at least two classes")
    model = init_embedding(x_raw, cfg)
    x = (x_raw - model.mean) / model.scale
    rng = np.random.default_rng(cfg.seed + 1)
    velocity = {k: np.zeros_like(v) for k, v in model.params().items()}
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if idx.size < 2:
                continue
            xb = np.concatenate([x[idx], x[idx]])
            xb = xb + cfg.jitter * rng.normal(size=xb.shape)
            yb = np.concatenate([labels[idx], labels[idx]])
            h, out = model._forward(xb)
            loss, g_out = supcon_loss(out, yb, cfg.temperature)
            n_anchor = len(yb)
            loss /= n_anchor
            g_out /= n_anchor
            if not np.isfinite(loss):
                raise TrainingError(f"loss became {loss} at step {step}", step)
            grads = {
                "w2": h.T @ g_out,
                "b2": g_out.sum(axis=0),
            }
            g_h = (g_out @ model.w2.T) * (1.0 - h * h)
            grads["w1"] = xb.T @ g_h
            grads["b1"] = g_h.sum(axis=0)
            for name, param in model.params().items():
                velocity[name] = cfg.momentum * velocity[name] - cfg.learning_rate * grads[name]
                param += velocity[name]
            model.losses.append(loss)
            step += 1
    return model


def cosine_separation(z, labels):
    """(mean intra-class, mean inter-class) cosine similarity, self-pairs excluded."""
    z = np.asarray(z)
    labels = np.asarray(labels)
    sim = z @ z.T
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(z), dtype=bool)
    return float(sim[same & off].mean()), float(sim[~same].mean())
