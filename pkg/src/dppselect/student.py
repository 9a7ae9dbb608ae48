"""A small distilled scorer for per-image inclusion probabilities.

Two-layer MLP with an exact (erf-based) GELU and inverted dropout, trained
to match teacher marginals with a probability-matching loss plus a squared
cardinality penalty. Backpropagation is written out by hand so it can be
checked against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import erf

from .errors import DivergenceError, InvalidInput
from .records import ArticleRecord, DppLabels

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Reported probabilities stay inside the open unit interval.
_PROB_EPS = 1e-12


def softplus(x) -> np.ndarray:
    """Numerically stable log(1 + exp(x))."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gelu(x) -> np.ndarray:
    """Exact Gaussian-error-linear unit, x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x) -> np.ndarray:
    """Derivative of the exact GELU: Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    phi = np.exp(-0.5 * x * x) * _INV_SQRT2PI
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * phi


@dataclass
class StudentModel:
    """Parameters of the two-layer scorer.

    W1 maps embeddings to the hidden layer, W2 reduces the (dropped-out)
    GELU activations to one logit per image.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    hidden_dim: int
    dropout_rate: float
    seed: int

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        self.b2 = float(self.b2)
        if self.W1.shape != (self.hidden_dim, self.input_dim):
            raise InvalidInput(f"W1 has shape {self.W1.shape}")
        if self.b1.shape != (self.hidden_dim,) or self.W2.shape != (self.hidden_dim,):
            raise InvalidInput("b1 and W2 must match the hidden width")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInput("dropout_rate must lie in [0, 1)")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Distillation hyperparameters."""

    learning_rate: float = 1e-3
    epochs: int = 100
    alpha: float = 0.3
    mu: float = 3.0
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0.0):
            raise InvalidInput("learning_rate must be a nonnegative real")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise InvalidInput("epochs must be a positive integer")
        if not (np.isfinite(self.alpha) and self.alpha >= 0.0):
            raise InvalidInput("alpha must be nonnegative")
        if not (np.isfinite(self.mu) and self.mu > 0.0):
            raise InvalidInput("mu must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidInput(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class SelectionResult:
    """Hard selection for one article plus the full probability vector."""

    image_ids: tuple
    probabilities: np.ndarray
    rule: str

    def __post_init__(self):
        object.__setattr__(self, "image_ids", tuple(self.image_ids))
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.min() <= 0.0 or p.max() >= 1.0:
            raise InvalidInput("probabilities must lie strictly inside (0, 1)")
        object.__setattr__(self, "probabilities", p)


def init_student(dim: int, hidden_dim: int = 256, dropout_rate: float = 0.1,
                 seed: int = 0) -> StudentModel:
    """Uniform fan-in/fan-out initialization with zero biases."""
    if dim < 1 or hidden_dim < 1:
        raise InvalidInput("dimensions must be positive")
    rng = np.random.default_rng(seed)
    lim1 = math.sqrt(6.0 / (dim + hidden_dim))
    lim2 = math.sqrt(6.0 / (hidden_dim + 1))
    return StudentModel(
        W1=rng.uniform(-lim1, lim1, size=(hidden_dim, dim)),
        b1=np.zeros(hidden_dim),
        W2=rng.uniform(-lim2, lim2, size=hidden_dim),
        b2=0.0,
        hidden_dim=hidden_dim,
        dropout_rate=dropout_rate,
        seed=seed,
    )


def _forward_cached(model: StudentModel, v: np.ndarray, train_mode: bool,
                    rng: Optional[np.random.Generator]):
    a = v @ model.W1.T + model.b1
    act = gelu(a)
    if train_mode and model.dropout_rate > 0.0:
        if rng is None:
            raise InvalidInput("train-mode dropout needs an explicit rng")
        keep = 1.0 - model.dropout_rate
        mask = (rng.random(act.shape) < keep) / keep
    else:
        mask = np.ones_like(act)
    h = act * mask
    z = h @ model.W2 + model.b2
    return a, h, mask, z


def student_forward(model: StudentModel, v, train_mode: bool = False,
                    rng: Optional[np.random.Generator] = None):
    """Logits for one embedding (1-d input) or a stack of them (2-d input).

    Dropout fires only in train mode, scaled by 1/keep so the expectation
    matches the eval path; the rng makes it reproducible.
    """
    arr = np.asarray(v, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.input_dim:
        raise InvalidInput(
            f"expected embeddings of dimension {model.input_dim}, got shape {np.shape(v)}"
        )
    _, _, _, z = _forward_cached(model, arr, train_mode, rng)
    return float(z[0]) if single else z


def distillation_loss(z, pi, mu: float, alpha: float):
    """Probability-matching loss with a squared cardinality penalty.

    loss = mean_i(softplus(z_i) - pi_i * z_i) + alpha * (sum_i sigmoid(z_i) - mu)**2

    Returns the loss and its exact gradient with respect to z:
    (sigmoid(z_i) - pi_i) / k + 2 * alpha * (sum sigmoid(z) - mu) * sigmoid'(z_i).
    """
    z = np.asarray(z, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if z.ndim != 1 or z.shape != pi.shape or z.size == 0:
        raise InvalidInput("z and pi must be matching nonempty 1-d vectors")
    if pi.min() < 0.0 or pi.max() > 1.0:
        raise InvalidInput("target marginals must lie in [0, 1]")
    k = z.size
    p = sigmoid(z)
    gap = float(p.sum() - mu)
    loss = float(np.mean(softplus(z) - pi * z) + alpha * gap * gap)
    grad = (p - pi) / k + 2.0 * alpha * gap * p * (1.0 - p)
    return loss, grad


def backprop_student(model: StudentModel, batch: Sequence, config: TrainConfig,
                     train_mode: bool = False,
                     rng: Optional[np.random.Generator] = None):
    """Loss and exact parameter gradients over a batch of articles.

    ``batch`` holds (embeddings, pi) pairs, one per article; the loss is the
    mean of the per-article losses, so the cardinality penalty sees one
    article's probabilities at a time. The dropout mask drawn on the
    forward pass is reused exactly on the backward pass.
    """
    if not batch:
        raise InvalidInput("batch must be nonempty")
    grads = {
        "W1": np.zeros_like(model.W1),
        "b1": np.zeros_like(model.b1),
        "W2": np.zeros_like(model.W2),
        "b2": 0.0,
    }
    total = 0.0
    n_articles = len(batch)
    for v, pi in batch:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != model.input_dim:
            raise InvalidInput("each article needs a (k, dim) embedding matrix")
        a, h, mask, z = _forward_cached(model, v, train_mode, rng)
        loss, dz = distillation_loss(z, pi, config.mu, config.alpha)
        total += loss
        grads["W2"] += dz @ h
        grads["b2"] += float(dz.sum())
        dh = np.outer(dz, model.W2)
        da = dh * mask * gelu_grad(a)
        grads["W1"] += da.T @ v
        grads["b1"] += da.sum(axis=0)
    for key in grads:
        grads[key] = grads[key] / n_articles
    return total / n_articles, grads


class _AdamState:
    """Bias-corrected first and second moment accumulators."""

    def __init__(self, model: StudentModel, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step = 0
        self.m = {k: np.zeros_like(g) for k, g in _param_view(model).items()}
        self.v = {k: np.zeros_like(g) for k, g in _param_view(model).items()}

    def update(self, model: StudentModel, grads: dict, lr: float) -> None:
        self.step += 1
        b1c = 1.0 - self.beta1**self.step
        b2c = 1.0 - self.beta2**self.step
        params = _param_view(model)
        for key, g in grads.items():
            g = np.asarray(g, dtype=np.float64)
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            step = lr * (self.m[key] / b1c) / (np.sqrt(self.v[key] / b2c) + self.eps)
            params[key] -= step
        model.b2 = float(params["b2"])


def _param_view(model: StudentModel) -> dict:
    # b2 is a scalar; wrap it in a 0-d array so updates are uniform.
    return {"W1": model.W1, "b1": model.b1, "W2": model.W2,
            "b2": np.asarray(model.b2, dtype=np.float64)}


def _sgd_update(model: StudentModel, grads: dict, lr: float) -> None:
    model.W1 -= lr * grads["W1"]
    model.b1 -= lr * grads["b1"]
    model.W2 -= lr * grads["W2"]
    model.b2 -= lr * grads["b2"]


def train_student(dataset: Sequence, config: TrainConfig,
                  hidden_dim: int = 256, dropout_rate: float = 0.1):
    """Distill teacher marginals into a fresh student.

    ``dataset`` pairs each :class:`ArticleRecord` with its labels (anything
    exposing a ``pi`` vector of per-image marginals). One optimizer step is
    taken per article, in an order reshuffled each epoch from the config
    seed, so runs with equal seeds are bitwise identical. Returns the model
    and the per-epoch loss curve, where each entry is the mean per-article
    loss with dropout off.

    Raises :class:`DivergenceError` (carrying the epoch index) if the loss
    ever turns non-finite.
    """
    if not dataset:
        raise InvalidInput("dataset must be nonempty")
    prepared = []
    for article, labels in dataset:
        pi = np.asarray(labels.pi, dtype=np.float64)
        if pi.size != article.n_images:
            raise InvalidInput(
                f"article {article.id}: {article.n_images} images but {pi.size} labels"
            )
        prepared.append((article.image_matrix, pi))
    dim = prepared[0][0].shape[1]
    if any(v.shape[1] != dim for v, _ in prepared):
        raise InvalidInput("all articles must share one embedding dimension")

    model = init_student(dim, hidden_dim, dropout_rate, seed=config.seed)
    rng = np.random.default_rng(config.seed)
    adam = _AdamState(model) if config.optimizer == "adam" else None
    loss_curve = []
    for epoch in range(config.epochs):
        for j in rng.permutation(len(prepared)):
            loss, grads = backprop_student(
                model, [prepared[j]], config, train_mode=True, rng=rng
            )
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            if adam is not None:
                adam.update(model, grads, config.learning_rate)
            else:
                _sgd_update(model, grads, config.learning_rate)
        epoch_loss, _ = backprop_student(model, prepared, config, train_mode=False)
        if not math.isfinite(epoch_loss):
            raise DivergenceError(epoch)
        loss_curve.append(epoch_loss)
    return model, loss_curve


def predict_probabilities(model: StudentModel, article: ArticleRecord) -> np.ndarray:
    """Eval-mode inclusion probabilities for every candidate in the pool."""
    z = student_forward(model, article.image_matrix, train_mode=False)
    return np.clip(sigmoid(z), _PROB_EPS, 1.0 - _PROB_EPS)


def topk_indices(scores, budget: int) -> list:
    """Indices of the ``budget`` largest scores, ties toward lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[:budget]]


def save_student(model: StudentModel, path: str) -> None:
    """Persist a student to versioned JSON; floats round-trip bit for bit."""
    from .io import save_arrays

    meta = {
        "hidden_dim": model.hidden_dim,
        "dropout_rate": model.dropout_rate,
        "seed": model.seed,
    }
    save_arrays(path, "student", meta, [
        ("W1", model.W1),
        ("b1", model.b1),
        ("W2", model.W2),
        ("b2", np.asarray(model.b2)),
    ])


def load_student(path: str) -> StudentModel:
    """Read a student saved by :func:`save_student`."""
    from .io import load_arrays

    meta, arrays = load_arrays(path, "student")
    return StudentModel(
        W1=arrays["W1"],
        b1=arrays["b1"],
        W2=arrays["W2"],
        b2=float(arrays["b2"]),
        hidden_dim=int(meta["hidden_dim"]),
        dropout_rate=float(meta["dropout_rate"]),
        seed=int(meta["seed"]),
    )


def select_images(model: StudentModel, article: ArticleRecord, rule: str = "topk",
                  budget: int = 3, threshold: float = 0.5) -> SelectionResult:
    """Hard selection from student probabilities.

    ``topk`` returns the ``budget`` most probable images in descending
    probability order with ties broken toward the lower index; ``threshold``
    keeps every image with probability >= threshold in pool order.
    """
    p = predict_probabilities(model, article)
    if rule == "topk":
        if int(budget) != budget or budget < 1:
            raise InvalidInput("budget must be a positive integer")
        chosen = topk_indices(p, budget)
    elif rule == "threshold":
        if not np.isfinite(threshold):
            raise InvalidInput("threshold must be finite")
        chosen = [i for i in range(article.n_images) if p[i] >= threshold]
    else:
        raise InvalidInput(f"unknown selection rule {rule!r}")
    ids = [article.images[i].id for i in chosen]
    return SelectionResult(image_ids=ids, probabilities=p, rule=rule)
