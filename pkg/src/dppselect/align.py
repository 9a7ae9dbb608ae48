"""Sigmoid-contrastive alignment between text and pooled image embeddings.

The anchor article's student text embedding is pulled toward its pooled
visual signature and pushed from in-batch negatives; a third term keeps the
frozen reference text embeddings of the negatives away from the anchor's
visuals. Only the student text embedding receives a gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegeneratePool, DegenerateProjection, InvalidInput
from .student import sigmoid, softplus

_NORM_TOL = 1e-6
_ZERO_NORM = 1e-12


def _check_unit_rows(name: str, arr: np.ndarray) -> None:
    norms = np.linalg.norm(arr, axis=-1)
    if np.abs(norms - 1.0).max() > _NORM_TOL:
        raise InvalidInput(f"{name} must contain unit vectors")


@dataclass(frozen=True)
class AlignBatch:
    """One alignment step: the anchor's trainable text embedding plus the
    per-article reference text and pooled visual embeddings, all unit norm.

    ``negatives`` indexes the articles used as in-batch negatives.
    """

    t_stu: np.ndarray
    t_sig: np.ndarray
    v_sig: np.ndarray
    negatives: tuple
    tau: float = 1.0

    def __post_init__(self):
        t_stu = np.asarray(self.t_stu, dtype=np.float64)
        t_sig = np.asarray(self.t_sig, dtype=np.float64)
        v_sig = np.asarray(self.v_sig, dtype=np.float64)
        if t_stu.ndim != 1:
            raise InvalidInput("t_stu must be a 1-d vector")
        if t_sig.ndim != 2 or v_sig.shape != t_sig.shape:
            raise InvalidInput("t_sig and v_sig must be matching (n, d) stacks")
        if t_sig.shape[1] != t_stu.size:
            raise InvalidInput("embedding dimensions must agree")
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise InvalidInput("tau must be positive")
        _check_unit_rows("t_stu", t_stu)
        _check_unit_rows("t_sig", t_sig)
        _check_unit_rows("v_sig", v_sig)
        negatives = tuple(int(j) for j in self.negatives)
        n = t_sig.shape[0]
        if len(set(negatives)) != len(negatives):
            raise InvalidInput("negative indices must be distinct")
        if any(not 0 <= j < n for j in negatives):
            raise InvalidInput("negative indices out of range")
        object.__setattr__(self, "t_stu", t_stu)
        object.__setattr__(self, "t_sig", t_sig)
        object.__setattr__(self, "v_sig", v_sig)
        object.__setattr__(self, "negatives", negatives)

    @property
    def n_articles(self) -> int:
        return self.t_sig.shape[0]


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights for the combined objective."""

    lambda_align: float = 1.0
    lambda_distill: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lambda_align) and self.lambda_align >= 0.0):
            raise InvalidInput("lambda_align must be nonnegative")
        if not (np.isfinite(self.lambda_distill) and self.lambda_distill >= 0.0):
            raise InvalidInput("lambda_distill must be nonnegative")


def pooled_visual_embedding(embeddings) -> np.ndarray:
    """Unit-normalized mean of a nonempty stack of unit image embeddings.

    Raises :class:`DegeneratePool` when the mean cancels to (numerically)
    zero and no direction survives.
    """
    arr = np.asarray(embeddings, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidInput("expected a nonempty (k, d) stack of embeddings")
    _check_unit_rows("image embeddings", arr)
    mean = arr.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < _ZERO_NORM:
        raise DegeneratePool("mean image embedding is zero")
    return mean / norm


def alignment_loss(batch: AlignBatch, a: int):
    """Three-term sigmoid-contrastive loss for anchor article ``a``.

    With z(x, y) = x.y / tau and S the negative set:

    loss = -log sigmoid(z(t_stu, v_sig[a]))
           - mean_j log(1 - sigmoid(z(t_stu, v_sig[j])))
           - mean_j log(1 - sigmoid(z(t_sig[j], v_sig[a])))

    Returns the loss and its exact gradient with respect to ``t_stu`` (the
    third term does not involve t_stu, so it contributes nothing there).
    An empty negative set drops the two negative terms. The anchor must
    not appear among the negatives.
    """
    if not 0 <= a < batch.n_articles:
        raise InvalidInput(f"anchor index {a} out of range")
    if a in batch.negatives:
        raise InvalidInput("anchor must not appear among the negatives")
    tau = batch.tau
    v_a = batch.v_sig[a]
    z_pos = float(batch.t_stu @ v_a) / tau
    # -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    loss = float(softplus(-z_pos))
    grad = -float(sigmoid(-z_pos)) * v_a / tau
    if batch.negatives:
        neg = list(batch.negatives)
        v_neg = batch.v_sig[neg]
        z_stu = v_neg @ batch.t_stu / tau
        loss += float(np.mean(softplus(z_stu)))
        grad = grad + (sigmoid(z_stu) @ v_neg) / (len(neg) * tau)
        z_sig = batch.t_sig[neg] @ v_a / tau
        loss += float(np.mean(softplus(z_sig)))
    return loss, grad


def mean_pool_decoder(states) -> np.ndarray:
    """Mean over the sequence axis of decoder hidden states, shape (d,)."""
    arr = np.asarray(states, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidInput("expected a nonempty (t, d) stack of states")
    return arr.mean(axis=0)


def project_text(vector, weight) -> np.ndarray:
    """Map a pooled decoder state into the alignment space and normalize.

    Raises :class:`DegenerateProjection` when the image of the vector is
    (numerically) zero.
    """
    v = np.asarray(vector, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    if v.ndim != 1 or w.ndim != 2 or w.shape[1] != v.size:
        raise InvalidInput("weight must be (d_p, d) and vector (d,)")
    out = w @ v
    norm = float(np.linalg.norm(out))
    if norm < _ZERO_NORM:
        raise DegenerateProjection("projected text embedding is zero")
    return out / norm


def combine_losses(l_lm: Optional[float], l_align: float, l_distill: float,
                   weights: LossWeights) -> float:
    """Weighted total: l_lm + lambda_align * l_align + lambda_distill * l_distill.

    An absent language-model term counts as zero, which covers runs driven
    purely by the auxiliary objectives.
    """
    base = 0.0 if l_lm is None else float(l_lm)
    return base + weights.lambda_align * float(l_align) + weights.lambda_distill * float(l_distill)
