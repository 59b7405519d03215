"""Posterior score estimation: logistic regression trained by gradient descent.

The estimator targets P(Y=1 | A=a, X=x).  Two layouts are supported: a joint
model over the features with a one-hot group encoding appended (one weight
vector, group-specific intercepts), and per-group models with independent
weights, which is the right layout when the groups' score directions differ.
Features are standardized inside ``fit_logistic`` using statistics of the
training data only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset

_fit_calls = 0


def fit_count() -> int:
    """Number of fit_logistic calls since the last reset (for audit tests)."""
    return _fit_calls


def reset_fit_count() -> None:
    global _fit_calls
    _fit_calls = 0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 400
    batch_size: Optional[int] = None  # None: full batch
    seed: int = 0
    per_group: bool = False
    l2: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass(frozen=True)
class LogisticModel:
    """Fitted weights plus the standardization applied to incoming features."""

    kind: str  # "joint" | "per-group"
    n_groups: int
    dim: int
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    weights: np.ndarray  # joint: (dim + n_groups,); per-group: (n_groups, dim)
    bias: np.ndarray  # joint: (1,); per-group: (n_groups,)
    loss_history: tuple


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(theta: np.ndarray, design: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean cross-entropy of a linear logit (bias folded into the design).

    Returns (loss, gradient).  The loss uses the softplus form, stable for
    any logit magnitude.
    """
    z = design @ theta
    # softplus(z) - y z = -log p(y | z)
    loss = float(np.mean(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - y * z))
    grad = design.T @ (_sigmoid(z) - y) / design.shape[0]
    if l2:
        loss += 0.5 * l2 * float(theta @ theta)
        grad = grad + l2 * theta
    return loss, grad


def _descend(design, y, config: TrainConfig) -> tuple:
    """Gradient descent with halving on loss increase; returns (theta, history).

    Full-batch epochs never increase the recorded loss: a step that would is
    retried with a halved rate.  Mini-batch mode shuffles with the seeded rng
    and records the full-batch loss once per epoch, without the guarantee.
    """
    theta = np.zeros(design.shape[1])
    lr = config.learning_rate
    loss, grad = loss_and_grad(theta, design, y, config.l2)
    history = [loss]
    if config.batch_size is None:
        for _ in range(config.epochs):
            for _ in range(60):
                cand = theta - lr * grad
                new_loss, new_grad = loss_and_grad(cand, design, y, config.l2)
                if new_loss <= loss + 1e-12:
                    break
                lr *= 0.5
            theta, loss, grad = cand, new_loss, new_grad
            history.append(loss)
    else:
        rng = np.random.default_rng(config.seed)
        n = design.shape[0]
        for _ in range(config.epochs):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                _, g = loss_and_grad(theta, design[idx], y[idx], config.l2)
                theta = theta - lr * g
            loss, grad = loss_and_grad(theta, design, y, config.l2)
            history.append(loss)
    return theta, tuple(history)


def fit_logistic(data: Dataset, config: TrainConfig = TrainConfig()) -> LogisticModel:
    """Train the score model on a dataset; increments the fit counter."""
    global _fit_calls
    _fit_calls += 1

    x = data.features
    y = data.label.astype(np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    xs = (x - mean) / scale

    if config.per_group:
        weights = np.zeros((data.n_groups, data.dim))
        bias = np.zeros(data.n_groups)
        history = None
        for a in range(data.n_groups):
            in_a = data.group == a
            design = np.hstack([xs[in_a], np.ones((int(in_a.sum()), 1))])
            theta, hist = _descend(design, y[in_a], config)
            weights[a] = theta[:-1]
            bias[a] = theta[-1]
            # keep the first group's trace as the representative history
            history = hist if history is None else history
        kind = "per-group"
    else:
        onehot = np.eye(data.n_groups)[data.group]
        design = np.hstack([xs, onehot])
        theta, history = _descend(design, y, config)
        weights = theta
        bias = np.zeros(1)
        kind = "joint"

    if not np.all(np.isfinite(weights)) or not np.all(np.isfinite(bias)):
        raise ValueError("training diverged to non-finite weights")
    return LogisticModel(
        kind=kind,
        n_groups=data.n_groups,
        dim=data.dim,
        feat_mean=mean,
        feat_scale=scale,
        weights=weights,
        bias=bias,
        loss_history=history,
    )


def predict_proba(model: LogisticModel, x, a):
    """Estimated P(Y=1 | A=a, X=x); accepts single rows or batches."""
    xs = np.asarray(x, dtype=np.float64)
    single = xs.ndim == 1
    if single:
        xs = xs[None, :]
    if xs.shape[1] != model.dim:
        raise ValueError("dimension mismatch")
    groups = np.broadcast_to(np.asarray(a, dtype=np.int64), (xs.shape[0],))
    if groups.size and (groups.min() < 0 or groups.max() >= model.n_groups):
        raise ValueError("group label out of range")
    std = (xs - model.feat_mean) / model.feat_scale
    if model.kind == "joint":
        onehot = np.eye(model.n_groups)[groups]
        z = np.hstack([std, onehot]) @ model.weights + model.bias[0]
    else:
        z = np.einsum("ij,ij->i", std, model.weights[groups]) + model.bias[groups]
    out = _sigmoid(z)
    return float(out[0]) if single else out


def score_dataset(model: LogisticModel, data: Dataset) -> np.ndarray:
    return predict_proba(model, data.features, data.group)


# ---------------------------------------------------------------------------
# Plain-text persistence (full-precision float round trip via repr)
# ---------------------------------------------------------------------------


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def save_model(model: LogisticModel, path) -> None:
    lines = [
        f"kind={model.kind}",
        f"n_groups={model.n_groups}",
        f"dim={model.dim}",
        f"feat_mean={_fmt(model.feat_mean)}",
        f"feat_scale={_fmt(model.feat_scale)}",
        f"bias={_fmt(model.bias)}",
    ]
    if model.kind == "joint":
        lines.append(f"weights={_fmt(model.weights)}")
    else:
        for a in range(model.n_groups):
            lines.append(f"weights{a}={_fmt(model.weights[a])}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> LogisticModel:
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                fields[key] = value
    kind = fields["kind"]
    n_groups = int(fields["n_groups"])
    dim = int(fields["dim"])
    parse = lambda s: np.array([float(v) for v in s.split()]) if s else np.array([])
    if kind == "joint":
        weights = parse(fields["weights"])
    else:
        weights = np.stack([parse(fields[f"weights{a}"]) for a in range(n_groups)])
    return LogisticModel(
        kind=kind,
        n_groups=n_groups,
        dim=dim,
        feat_mean=parse(fields["feat_mean"]),
        feat_scale=parse(fields["feat_scale"]),
        weights=weights,
        bias=parse(fields["bias"]),
        loss_history=(),
    )
