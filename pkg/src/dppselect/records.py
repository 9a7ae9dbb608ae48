"""Shared data records: articles, image candidates, and soft labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInput
from .linalg import EigenPair

# Unit-norm tolerance applied after ingestion renormalization.
_NORM_TOL = 1e-6


def unit_normalize(v) -> np.ndarray:
    """Scale a vector to unit Euclidean norm; the zero vector is rejected."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInput(f"expected a nonempty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("vector entries must be finite")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise InvalidInput("cannot normalize the zero vector")
    return arr / norm


def _check_unit(name: str, arr: np.ndarray) -> None:
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > _NORM_TOL:
        raise InvalidInput(f"{name} must have unit norm, got {norm!r}")


@dataclass(frozen=True)
class ImageRecord:
    """One candidate image: an id, a unit embedding, optional gold flag."""

    id: str
    embedding: np.ndarray
    gold: Optional[bool] = None

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=np.float64)
        if emb.ndim != 1 or emb.size == 0:
            raise InvalidInput(f"image {self.id}: embedding must be a 1-d vector")
        if not np.all(np.isfinite(emb)):
            raise InvalidInput(f"image {self.id}: embedding entries must be finite")
        _check_unit(f"image {self.id} embedding", emb)
        object.__setattr__(self, "embedding", emb)


@dataclass(frozen=True)
class ArticleRecord:
    """One document with its text embedding and candidate image pool.

    All embeddings share one dimension and carry unit norm (within 1e-6,
    which ingestion guarantees by renormalizing).
    """

    id: str
    text_embedding: np.ndarray
    images: tuple

    def __post_init__(self):
        text = np.asarray(self.text_embedding, dtype=np.float64)
        if text.ndim != 1 or text.size == 0:
            raise InvalidInput(f"article {self.id}: text embedding must be 1-d")
        if not np.all(np.isfinite(text)):
            raise InvalidInput(f"article {self.id}: text embedding must be finite")
        _check_unit(f"article {self.id} text embedding", text)
        images = tuple(self.images)
        if not images:
            raise InvalidInput(f"article {self.id}: needs at least one image")
        for img in images:
            if img.embedding.shape != text.shape:
                raise InvalidInput(
                    f"article {self.id}: image {img.id} has dimension "
                    f"{img.embedding.size}, expected {text.size}"
                )
        object.__setattr__(self, "text_embedding", text)
        object.__setattr__(self, "images", images)

    @property
    def n_images(self) -> int:
        return len(self.images)

    @property
    def dim(self) -> int:
        return self.text_embedding.size

    @property
    def image_ids(self) -> list:
        return [img.id for img in self.images]

    @property
    def image_matrix(self) -> np.ndarray:
        """Candidate embeddings stacked row-wise, shape (n_images, dim)."""
        return np.stack([img.embedding for img in self.images])

    def gold_ids(self) -> set:
        """Ids of images flagged gold; empty when no flags are present."""
        return {img.id for img in self.images if img.gold}

    def has_gold(self) -> bool:
        return any(img.gold is not None for img in self.images)


@dataclass(frozen=True)
class DppLabels:
    """Calibrated soft labels for one article's candidate pool.

    ``eigen`` holds the kernel eigendecomposition when the labels were
    produced in-process; labels re-read from disk carry ``None`` there.
    """

    t_star: float
    pi: np.ndarray
    eigen: Optional[EigenPair] = None

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.ndim != 1 or pi.size == 0:
            raise InvalidInput("pi must be a nonempty 1-d vector")
        if not np.all(np.isfinite(pi)) or pi.min() < 0.0 or pi.max() > 1.0:
            raise InvalidInput("marginals must lie in [0, 1]")
        if not (np.isfinite(self.t_star) and self.t_star >= 0.0):
            raise InvalidInput("t_star must be a finite nonnegative real")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "t_star", float(self.t_star))

    @property
    def n(self) -> int:
        return self.pi.size
