"""Selection-quality metrics: relevance filtering, pairwise diversity,
and precision against gold image sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, UndefinedMetric


@dataclass(frozen=True)
class DiversityReport:
    """Pairwise cosine-distance summary over a filtered selection.

    Distances are scaled by 100; ``n_pairs`` counts unordered pairs among
    the ``filtered_count`` surviving images.
    """

    mean_pcd: float
    max_pcd: float
    n_pairs: int
    filtered_count: int


def relevance_filter(summary_embedding, image_embeddings, threshold: float) -> list:
    """Indices of images whose cosine with the summary meets the threshold.

    Order is preserved. Inputs are compared by true cosine similarity, so
    slightly off-unit vectors are handled gracefully.
    """
    if not np.isfinite(threshold):
        raise InvalidInput("threshold must be finite")
    s = np.asarray(summary_embedding, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise InvalidInput("summary embedding must be a nonempty 1-d vector")
    s_norm = float(np.linalg.norm(s))
    if s_norm == 0.0:
        raise InvalidInput("summary embedding must be nonzero")
    kept = []
    for i, e in enumerate(image_embeddings):
        e = np.asarray(e, dtype=np.float64)
        if e.shape != s.shape:
            raise InvalidInput(f"image {i} has mismatched dimension")
        e_norm = float(np.linalg.norm(e))
        if e_norm == 0.0:
            raise InvalidInput(f"image {i} embedding must be nonzero")
        if float(s @ e) / (s_norm * e_norm) >= threshold:
            kept.append(i)
    return kept


def pairwise_cosine_distance(embeddings) -> DiversityReport:
    """Mean and max cosine distance, times 100, over unordered pairs.

    Fewer than two embeddings yield zero distances and zero pairs, which
    keeps single-image selections well defined.
    """
    rows = [np.asarray(e, dtype=np.float64) for e in embeddings]
    k = len(rows)
    if k < 2:
        return DiversityReport(mean_pcd=0.0, max_pcd=0.0, n_pairs=0, filtered_count=k)
    arr = np.stack(rows)
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInput("embeddings must be nonzero")
    unit = arr / norms[:, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    iu = np.triu_indices(k, 1)
    dist = 100.0 * (1.0 - cos[iu])
    return DiversityReport(
        mean_pcd=float(dist.mean()),
        max_pcd=float(dist.max()),
        n_pairs=dist.size,
        filtered_count=k,
    )


def image_precision(selected_ids, gold_ids) -> float:
    """Percentage of the selected ids that are gold.

    Duplicates in the selection count once. An empty selection leaves the
    metric undefined and raises :class:`UndefinedMetric`.
    """
    sel = set(selected_ids)
    if not sel:
        raise UndefinedMetric("image precision is undefined for an empty selection")
    gold = set(gold_ids)
    return 100.0 * len(sel & gold) / len(sel)
