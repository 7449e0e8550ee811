"""Two-sample permutation tests for samples of rotation curves.

Three tests share one permutation engine:

* :func:`test_no_action` compares the PEMs of the two groups directly.
* :func:`test_prereg` registers ``chi1`` onto ``chi2`` once, then runs the
  plain test on the registered samples.
* :func:`test_continual` repeats the registration inside every permutation so
  that the observed and permuted statistics are treated alike.

Permutation ``0`` is always the observed split. Further splits come from a
counter-based stream keyed by ``(seed, index)``, so results do not depend on
evaluation order or parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import estimate as est
from .curves import RotCurve, stack
from .gpsim import make_rng

TIE_RULES = ("conservative", "strict")


class PermutationError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        self.index = index
        super().__init__(f"permutation {index} failed: {cause}")


@dataclass(frozen=True)
class PermutationPlan:
    """How to enumerate splits of ``n1 + n2`` pooled curves.

    ``exhaustive=None`` switches to full enumeration whenever the number of
    distinct splits does not exceed ``n_perm``; ``n_perm`` is then reduced to
    that count.
    """

    n1: int
    n2: int
    n_perm: int = 1000
    seed: int = 0
    exhaustive: bool | None = None

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("both groups need at least one curve")
        if self.n_perm < 1:
            raise ValueError("n_perm must be positive")
        total = math.comb(self.n1 + self.n2, self.n1)
        ex = self.exhaustive
        if ex is None:
            ex = total <= self.n_perm
        if ex and total > self.n_perm:
            raise ValueError(f"exhaustive enumeration needs n_perm >= {total}")
        object.__setattr__(self, "exhaustive", bool(ex))
        if ex:
            object.__setattr__(self, "n_perm", total)


def _unrank_combination(n: int, k: int, rank: int) -> np.ndarray:
    """``rank``-th k-subset of ``range(n)`` in lexicographic order."""
    out = []
    x = 0
    for remaining in range(k, 0, -1):
        while True:
            c = math.comb(n - x - 1, remaining - 1)
            if rank < c:
                break
            rank -= c
            x += 1
        out.append(x)
        x += 1
    return np.array(out, dtype=int)


def perm_stream(plan: PermutationPlan, index: int) -> np.ndarray:
    """Sorted 0-based indices of the first group for permutation ``index``.

    Index 0 is the observed split ``0 .. n1-1``.
    """
    if not 0 <= index < plan.n_perm:
        raise IndexError(f"permutation index {index} outside [0, {plan.n_perm})")
    n = plan.n1 + plan.n2
    if index == 0:
        return np.arange(plan.n1)
    if plan.exhaustive:
        return _unrank_combination(n, plan.n1, index)
    rng = make_rng(plan.seed, index)
    return np.sort(rng.permutation(n)[: plan.n1])


def p_value(stats: np.ndarray, tie_rule: str = "conservative") -> float:
    """Share of permutation statistics at least as extreme as ``stats[0]``."""
    if tie_rule == "conservative":
        r = np.count_nonzero(stats >= stats[0])
    elif tie_rule == "strict":
        r = np.count_nonzero(stats > stats[0])
    else:
        raise ValueError(f"tie_rule must be one of {TIE_RULES}")
    return r / stats.size


@dataclass(frozen=True, eq=False)
class TestReport:
    __test__ = False

    statistic_observed: float
    statistics_perm: np.ndarray
    p_value: float
    variant: str
    loss: str
    seed: int
    alpha: float
    reject: bool
    tie_rule: str = "conservative"
    exhaustive: bool = False
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"variant={self.variant}",
            f"loss={self.loss}",
            f"statistic_observed={self.statistic_observed!r}",
            f"p_value={self.p_value!r}",
            f"alpha={self.alpha!r}",
            f"reject={str(self.reject).lower()}",
            f"tie_rule={self.tie_rule}",
            f"n_perm={self.statistics_perm.size}",
            f"exhaustive={str(self.exhaustive).lower()}",
            f"seed={self.seed}",
        ]
        lines += [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in self.extra.items()]
        return "\n".join(lines) + "\n"


# --- engine --------------------------------------------------------------------


def _evaluate(statistic: Callable, plan: PermutationPlan, indices: Sequence[int]) -> list[float]:
    out = []
    n = plan.n1 + plan.n2
    for l in indices:
        g1 = perm_stream(plan, l)
        mask = np.zeros(n, dtype=bool)
        mask[g1] = True
        try:
            out.append(float(statistic(g1, np.flatnonzero(~mask))))
        except Exception as exc:  # PEM / alignment failure on this split
            raise PermutationError(l, exc) from exc
    return out


def run_permutations(statistic: Callable, plan: PermutationPlan, n_jobs: int = 1) -> np.ndarray:
    """Statistic for every permutation index, stored by index."""
    indices = list(range(plan.n_perm))
    if n_jobs == 1:
        return np.array(_evaluate(statistic, plan, indices))
    chunks = [indices[i::n_jobs] for i in range(n_jobs)]
    stats = np.empty(plan.n_perm)
    with ProcessPoolExecutor(n_jobs) as pool:
        for chunk, vals in zip(chunks, pool.map(_evaluate, [statistic] * n_jobs, [plan] * n_jobs, chunks)):
            stats[chunk] = vals
    return stats


def _as_arrays(chi1, chi2):
    if isinstance(chi1, np.ndarray):
        return chi1, chi2
    return stack(chi1), stack(chi2)


@dataclass
class _NoActionStat:
    t: np.ndarray
    X: np.ndarray
    loss: str

    def __call__(self, g1, g2):
        A = est.pem_arr(self.X[g1])
        B = est.pem_arr(self.X[g2])
        return est.curve_loss_arr(self.t, A, B, self.loss)


@dataclass
class _ContinualStat:
    t: np.ndarray
    X: np.ndarray
    n1: int
    loss: str
    opts: est.AlignOptions
    backend: str | None = None

    def _omega(self, idx):
        part1 = idx[idx < self.n1]
        part2 = idx[idx >= self.n1]
        if part1.size == 0 or part2.size == 0:
            return est.pem_arr(self.X[idx])
        eta = est.pem_arr(self.X[part2])
        aligned = est.sample_align_arr(self.t, self.X[part1], self.X[part2], self.opts, eta=eta, backend=self.backend)[0]
        gam = est.pem_arr(aligned)
        return est.pem_arr(np.stack([eta, gam]))

    def __call__(self, g1, g2):
        w1 = self._omega(g1)
        w2 = self._omega(g2)
        w1a = est.sample_align_arr(self.t, w1[None], w2[None], self.opts, eta=w2, backend=self.backend)[0][0]
        return est.curve_loss_arr(self.t, w1a, w2, self.loss)


def _report(stats, plan, variant, loss, alpha, tie_rule, extra=None) -> TestReport:
    p = p_value(stats, tie_rule)
    return TestReport(
        float(stats[0]), stats, p, variant, loss, plan.seed, alpha, bool(p < alpha), tie_rule, plan.exhaustive, extra or {}
    )


def _setup(chi1, chi2, t, plan, loss, alpha, tie_rule, n_perm, seed):
    X1, X2 = _as_arrays(chi1, chi2)
    if t is None:
        if isinstance(chi1, np.ndarray):
            raise ValueError("pass the time grid t when giving raw arrays")
        t = chi1[0].t
    est._check_loss(loss)
    if tie_rule not in TIE_RULES:
        raise ValueError(f"tie_rule must be one of {TIE_RULES}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if plan is None:
        plan = PermutationPlan(len(X1), len(X2), n_perm, seed)
    elif (plan.n1, plan.n2) != (len(X1), len(X2)):
        raise ValueError("plan group sizes do not match the samples")
    return t, X1, X2, plan


def test_no_action(
    chi1,
    chi2,
    plan: PermutationPlan | None = None,
    loss: str = "Imean",
    alpha: float = 0.05,
    tie_rule: str = "conservative",
    *,
    t: np.ndarray | None = None,
    n_perm: int = 1000,
    seed: int = 0,
    n_jobs: int = 1,
) -> TestReport:
    """Permutation test of equal center curves without any registration.

    ``chi1`` and ``chi2`` are sequences of :class:`RotCurve` or ``(N, K, 3, 3)``
    arrays (then ``t`` is required).
    """
    t, X1, X2, plan = _setup(chi1, chi2, t, plan, loss, alpha, tie_rule, n_perm, seed)
    stat = _NoActionStat(t, np.concatenate([X1, X2]), loss)
    stats = run_permutations(stat, plan, n_jobs)
    return _report(stats, plan, "none", loss, alpha, tie_rule)


def test_prereg(
    chi1,
    chi2,
    plan: PermutationPlan | None = None,
    loss: str = "Imean",
    opts: est.AlignOptions = est.AlignOptions(),
    alpha: float = 0.05,
    tie_rule: str = "conservative",
    *,
    t: np.ndarray | None = None,
    n_perm: int = 1000,
    seed: int = 0,
    n_jobs: int = 1,
    backend: str | None = None,
) -> TestReport:
    """Register ``chi1`` onto ``chi2`` once, then run :func:`test_no_action`."""
    t, X1, X2, plan = _setup(chi1, chi2, t, plan, loss, alpha, tie_rule, n_perm, seed)
    X1a, P, Q, w, unique, it, conv = est.sample_align_arr(t, X1, X2, opts, backend=backend)
    stat = _NoActionStat(t, np.concatenate([X1a, X2]), loss)
    stats = run_permutations(stat, plan, n_jobs)
    extra = {"align_iterations": it, "align_converged": str(conv).lower(), "align_unique": str(unique).lower()}
    return _report(stats, plan, "prereg", loss, alpha, tie_rule, extra)


def test_continual(
    chi1,
    chi2,
    plan: PermutationPlan | None = None,
    loss: str = "Imean",
    opts: est.AlignOptions = est.AlignOptions(),
    alpha: float = 0.05,
    tie_rule: str = "conservative",
    *,
    t: np.ndarray | None = None,
    n_perm: int = 1000,
    seed: int = 0,
    n_jobs: int = 1,
    backend: str | None = None,
) -> TestReport:
    """Permutation test with registration repeated inside every permutation.

    For each split and each group, the curves that came from ``chi1`` are
    registered onto those from ``chi2``; the group summary is the PEM of the
    two resulting PEMs. The two summaries are registered onto each other and
    their loss is the statistic. A group drawn from one origin only is
    summarized by its plain PEM.
    """
    t, X1, X2, plan = _setup(chi1, chi2, t, plan, loss, alpha, tie_rule, n_perm, seed)
    stat = _ContinualStat(t, np.concatenate([X1, X2]), len(X1), loss, opts, backend)
    stats = run_permutations(stat, plan, n_jobs)
    return _report(stats, plan, "continual", loss, alpha, tie_rule)


for _f in (test_no_action, test_prereg, test_continual):
    _f.__test__ = False
