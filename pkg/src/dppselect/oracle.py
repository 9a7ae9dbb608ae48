"""Independent verification suites.

The marginal suite rebuilds every article's labels through exhaustive
subset enumeration and compares them against the eigendecomposition path;
the gradient suite compares every hand-written gradient against central
finite differences. Both return structured reports so the command-line
front end can exit with a dedicated status on violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .align import AlignBatch, alignment_loss
from .errors import DppSelectError
from .linalg import sym_eig
from .records import ArticleRecord, unit_normalize
from .student import TrainConfig, backprop_student, distillation_loss, init_student
from .teacher import (TeacherParams, brute_force_marginals, build_kernel,
                      label_article, marginals)

# Step size for central differences; loss surfaces here are smooth enough
# that truncation and roundoff are both far below the tolerances.
FD_STEP = 1e-5

_ORACLE_T_VALUES = (0.1, 1.0, 10.0)


@dataclass
class OracleReport:
    """Outcome of one suite: counters plus human-readable failures."""

    checks: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def merge(self, other: "OracleReport") -> "OracleReport":
        self.checks += other.checks
        self.failures.extend(other.failures)
        return self


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray,
                       h: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + h
        hi = f(x)
        xf[i] = orig - h
        lo = f(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2.0 * h)
    return grad


def fd_relative_error(analytic, numeric) -> float:
    """Max componentwise difference, relative with an absolute floor of 1."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    return float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n))))


def check_marginals(articles: Sequence[ArticleRecord], params: TeacherParams,
                    tol: float = 1e-8, corrupt: float = 0.0) -> OracleReport:
    """Compare eigendecomposition marginals against subset enumeration.

    For every article the calibrated labels and a sweep of fixed
    temperatures are both recomputed by brute force; any pool too large to
    enumerate is reported as a failure. ``corrupt`` shifts the analytic
    marginals and exists so the violation path itself can be exercised.
    """
    report = OracleReport()
    for article in articles:
        try:
            bundle = build_kernel(article, params)
            labels = label_article(article, params)
            eigen = sym_eig(bundle.L)
            pi_fast = labels.pi + corrupt
            if labels.t_star > 0.0:
                pi_slow = brute_force_marginals(bundle.L, labels.t_star)
                report.checks += 1
                diff = float(np.abs(pi_fast - pi_slow).max())
                if diff > tol:
                    report.failures.append(
                        f"article {article.id}: calibrated marginals differ from "
                        f"enumeration by {diff:.3e} (tol {tol:.1e})"
                    )
            for t in _ORACLE_T_VALUES:
                fast = marginals(eigen, t) + corrupt
                slow = brute_force_marginals(bundle.L, t)
                report.checks += 1
                diff = float(np.abs(fast - slow).max())
                if diff > tol:
                    report.failures.append(
                        f"article {article.id}: marginals at t={t} differ from "
                        f"enumeration by {diff:.3e} (tol {tol:.1e})"
                    )
        except DppSelectError as exc:
            report.failures.append(f"article {article.id}: {exc}")
    return report


def check_gradients(seed: int = 0, cases: int = 50, loss_tol: float = 1e-6,
                    backprop_tol: float = 1e-4) -> OracleReport:
    """Finite-difference checks of every hand-written gradient.

    Runs ``cases`` random instances of the distillation loss and of the
    alignment loss at tolerance ``loss_tol``, plus full student
    backpropagation (dropout off) at ``backprop_tol``.
    """
    report = OracleReport()
    rng = np.random.default_rng(seed)

    for case in range(cases):
        k = int(rng.integers(1, 8))
        z = rng.normal(0.0, 2.0, size=k)
        pi = rng.random(k)
        mu = float(rng.uniform(0.5, 4.0))
        alpha = float(rng.uniform(0.0, 1.0))
        _, grad = distillation_loss(z, pi, mu, alpha)
        num = central_difference(lambda zz: distillation_loss(zz, pi, mu, alpha)[0], z)
        report.checks += 1
        err = fd_relative_error(grad, num)
        if err > loss_tol:
            report.failures.append(
                f"distillation gradient case {case}: error {err:.3e} > {loss_tol:.1e}"
            )

    for case in range(cases):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(3, 9))
        t_stu = unit_normalize(rng.normal(size=d))
        t_sig = np.stack([unit_normalize(rng.normal(size=d)) for _ in range(n)])
        v_sig = np.stack([unit_normalize(rng.normal(size=d)) for _ in range(n)])
        a = int(rng.integers(0, n))
        others = [j for j in range(n) if j != a]
        rng.shuffle(others)
        neg = tuple(others[: int(rng.integers(0, len(others) + 1))])
        tau = float(rng.uniform(0.5, 2.0))
        batch = AlignBatch(t_stu=t_stu, t_sig=t_sig, v_sig=v_sig, negatives=neg, tau=tau)

        def loss_at(vec):
            # bypass the unit-norm validation while probing off-sphere
            probe = AlignBatch.__new__(AlignBatch)
            object.__setattr__(probe, "t_stu", vec)
            object.__setattr__(probe, "t_sig", t_sig)
            object.__setattr__(probe, "v_sig", v_sig)
            object.__setattr__(probe, "negatives", neg)
            object.__setattr__(probe, "tau", tau)
            return alignment_loss(probe, a)[0]

        _, grad = alignment_loss(batch, a)
        num = central_difference(loss_at, t_stu.copy())
        report.checks += 1
        err = fd_relative_error(grad, num)
        if err > loss_tol:
            report.failures.append(
                f"alignment gradient case {case}: error {err:.3e} > {loss_tol:.1e}"
            )

    for case in range(cases):
        d = int(rng.integers(3, 7))
        hidden = int(rng.integers(4, 10))
        model = init_student(d, hidden_dim=hidden, dropout_rate=0.0,
                             seed=int(rng.integers(0, 2**31)))
        batch = []
        for _ in range(int(rng.integers(1, 4))):
            k = int(rng.integers(1, 5))
            v = np.stack([unit_normalize(rng.normal(size=d)) for _ in range(k)])
            batch.append((v, rng.random(k)))
        cfg = TrainConfig(mu=float(rng.uniform(0.5, 3.0)),
                          alpha=float(rng.uniform(0.0, 1.0)))
        _, grads = backprop_student(model, batch, cfg)
        report.checks += 1
        worst = 0.0
        for key in ("W1", "b1", "W2", "b2"):
            def loss_with(val, key=key):
                saved = getattr(model, key)
                setattr(model, key, val if key != "b2" else float(val))
                out = backprop_student(model, batch, cfg)[0]
                setattr(model, key, saved)
                return out

            base = np.asarray(getattr(model, key), dtype=np.float64)
            num = central_difference(loss_with, base.copy())
            worst = max(worst, fd_relative_error(np.asarray(grads[key]), num))
        if worst > backprop_tol:
            report.failures.append(
                f"backprop case {case}: error {worst:.3e} > {backprop_tol:.1e}"
            )
    return report
