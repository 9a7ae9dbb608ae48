"""Diversity-aware soft labeling of candidate image pools.

A relevance/diversity kernel is built from unit embeddings, an L-ensemble
temperature is calibrated so the expected selection size hits a target, and
per-image inclusion marginals are read off the marginal kernel diagonal.
An exhaustive subset enumeration doubles as an independent oracle for the
eigendecomposition path, and a greedy determinant maximizer provides hard
selections for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, OracleTooLarge
from .linalg import EigenPair, MatrixLike, SymMatrix, as_sym_matrix, principal_minor_det, sym_eig
from .records import ArticleRecord, DppLabels

# Calibration stops when the marginal-kernel trace is within this of the
# target, or after this many bisection steps.
CALIBRATION_TOL = 1e-9
_MAX_BISECTIONS = 200

# Exhaustive enumeration is capped at 2**15 subsets.
_MAX_ORACLE_N = 15


@dataclass(frozen=True)
class TeacherParams:
    """Kernel and calibration knobs.

    gamma scales relevance into quality, sigma is the similarity bandwidth,
    epsilon is the diagonal jitter, mu the target expected selection size,
    alpha the cardinality penalty passed on to distillation, and k_max the
    hard-selection budget.
    """

    gamma: float = 2.0
    sigma: float = 0.8
    epsilon: float = 1e-5
    mu: float = 3.0
    alpha: float = 0.3
    k_max: int = 3

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 0.0):
            raise InvalidInput("gamma must be a finite nonnegative real")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise InvalidInput("sigma must be positive")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise InvalidInput("epsilon must be positive")
        if not (np.isfinite(self.mu) and self.mu > 0.0):
            raise InvalidInput("mu must be positive")
        if not (np.isfinite(self.alpha) and self.alpha >= 0.0):
            raise InvalidInput("alpha must be nonnegative")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise InvalidInput("k_max must be a positive integer")


@dataclass(frozen=True)
class KernelBundle:
    """Kernel pieces for one article: relevance r, similarity s, quality q,
    the bandwidth kernel kappa, and the jittered ensemble kernel L."""

    r: np.ndarray
    s: np.ndarray
    q: np.ndarray
    kappa: np.ndarray
    L: SymMatrix

    @property
    def n(self) -> int:
        return self.r.size


def build_kernel(article: ArticleRecord, params: TeacherParams) -> KernelBundle:
    """Assemble the ensemble kernel for one article.

    r_i is the text-image cosine, q_i = exp(gamma * r_i), the pairwise
    squared distance on the unit sphere is 2 * (1 - s_ij), kappa applies a
    Gaussian bandwidth to it with an exactly-unit diagonal, and
    L = sqrt(q_i) * kappa_ij * sqrt(q_j) + epsilon on the diagonal.
    """
    e = article.image_matrix
    r = np.clip(e @ article.text_embedding, -1.0, 1.0)
    s = e @ e.T
    s = 0.5 * (s + s.T)  # exact symmetry; dot products commute
    d2 = 2.0 * (1.0 - s)
    kappa = np.exp(-d2 / (2.0 * params.sigma**2))
    np.fill_diagonal(kappa, 1.0)
    q = np.exp(params.gamma * r)
    sq = np.sqrt(q)
    # outer() keeps L exactly symmetric; chained scaling would not.
    L = np.outer(sq, sq) * kappa + params.epsilon * np.eye(article.n_images)
    return KernelBundle(r=r, s=s, q=q, kappa=kappa, L=SymMatrix(L))


def trace_of_marginal(eigen: EigenPair, t: float) -> float:
    """Trace of the marginal kernel at temperature t: sum of l/(l+t).

    Decreases monotonically in t and equals n at t = 0 when every
    eigenvalue is positive. Terms with l + t == 0 contribute zero.
    """
    if not np.isfinite(t) or t < 0.0:
        raise InvalidInput("temperature must be a finite nonnegative real")
    lam = eigen.values
    den = lam + t
    safe = np.where(den > 0.0, den, 1.0)
    return float(np.sum(np.where(den > 0.0, lam / safe, 0.0)))


def calibrate_temperature(eigen: EigenPair, mu: float, tol: float = CALIBRATION_TOL) -> float:
    """Solve trace_of_marginal(eigen, t) == mu for t by bisection.

    When mu >= n the equation has no positive solution; the temperature is
    clamped to 0. Otherwise the upper bracket starts at the largest
    eigenvalue and doubles until the trace falls below mu, and bisection
    stops once the trace is within tol of mu or after 200 steps.
    """
    if not (np.isfinite(mu) and mu > 0.0):
        raise InvalidInput("mu must be positive")
    if not (np.isfinite(tol) and tol > 0.0):
        raise InvalidInput("tol must be positive")
    n = eigen.n
    if mu >= n:
        return 0.0
    lam_max = float(eigen.values.max())
    if lam_max <= 0.0:
        return 0.0
    lo = 0.0
    hi = lam_max
    while trace_of_marginal(eigen, hi) >= mu:
        hi *= 2.0
    mid = 0.5 * (lo + hi)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        tr = trace_of_marginal(eigen, mid)
        if abs(tr - mu) <= tol:
            return mid
        if tr > mu:
            lo = mid
        else:
            hi = mid
    return mid


def marginals(eigen: EigenPair, t_star: float) -> np.ndarray:
    """Per-item inclusion marginals: the diagonal of the marginal kernel.

    pi_i = sum_l U[i, l]**2 * lam_l / (lam_l + t_star), clamped to [0, 1].
    """
    if not np.isfinite(t_star) or t_star < 0.0:
        raise InvalidInput("temperature must be a finite nonnegative real")
    lam = eigen.values
    den = lam + t_star
    safe = np.where(den > 0.0, den, 1.0)
    ratios = np.where(den > 0.0, lam / safe, 0.0)
    pi = (eigen.vectors**2) @ ratios
    return np.clip(pi, 0.0, 1.0)


def brute_force_marginals(L: MatrixLike, t: float) -> np.ndarray:
    """Inclusion marginals by exhaustive enumeration of all 2**n subsets.

    Each subset S is weighted by det(L_S) / t**|S| and the weights are
    normalized by direct summation, keeping this path independent of the
    eigendecomposition it is used to check. Limited to n <= 15.
    """
    m = as_sym_matrix(L)
    n = m.n
    if n > _MAX_ORACLE_N:
        raise OracleTooLarge(f"{n} items means 2**{n} subsets; limit is {_MAX_ORACLE_N}")
    if not (np.isfinite(t) and t > 0.0):
        raise InvalidInput("temperature must be positive for enumeration")
    total = 0.0
    acc = np.zeros(n)
    for mask in range(1 << n):
        subset = [i for i in range(n) if mask >> i & 1]
        w = principal_minor_det(m, subset) / t ** len(subset)
        total += w
        for i in subset:
            acc[i] += w
    return acc / total


def label_article(article: ArticleRecord, params: TeacherParams) -> DppLabels:
    """Produce calibrated soft labels for one article.

    Builds the kernel, eigendecomposes it, calibrates the temperature to
    the target expected size, and reads off the marginals. When mu >= n the
    pool is smaller than the target, so every image gets marginal 1 at
    temperature 0.
    """
    bundle = build_kernel(article, params)
    eigen = sym_eig(bundle.L)
    n = article.n_images
    if params.mu >= n:
        return DppLabels(t_star=0.0, pi=np.ones(n), eigen=eigen)
    t_star = calibrate_temperature(eigen, params.mu)
    pi = marginals(eigen, t_star)
    return DppLabels(t_star=t_star, pi=pi, eigen=eigen)


def greedy_map_select(L: MatrixLike, budget: int) -> list:
    """Greedy maximization of the selected principal determinant.

    Starting empty, repeatedly adds the index with the largest determinant
    ratio det(L_{S + i}) / det(L_S), breaking ties toward the lower index,
    and stops at the budget or when no remaining index keeps the
    determinant positive.
    """
    if int(budget) != budget or budget < 1:
        raise InvalidInput("budget must be a positive integer")
    m = as_sym_matrix(L)
    n = m.n
    selected: list = []
    det_s = 1.0
    while len(selected) < min(budget, n):
        best_i = -1
        best_det = 0.0
        best_ratio = 0.0
        for i in range(n):
            if i in selected:
                continue
            d = principal_minor_det(m, selected + [i])
            ratio = d / det_s
            if ratio > best_ratio:
                best_i, best_det, best_ratio = i, d, ratio
        if best_i < 0 or best_ratio <= 0.0:
            break
        selected.append(best_i)
        det_s = best_det
    return selected
