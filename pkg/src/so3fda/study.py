"""Monte-Carlo harness for acceptance rates of the three permutation tests.

Every cell ``(model_i, model_j)`` of a table draws ``n_sims`` pairs of samples
(``chi1`` from model ``i``, ``chi2`` from model ``j``), runs one test per pair and
reports the fraction of non-rejections with its binomial standard error. In
the misaligned tables ``chi2`` is moved by the fixed marker-placement pair
``(P, Q)`` before testing.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import estimate as est
from . import gpsim
from . import testing

TABLES = {
    # name: (test variant, misalign chi2)
    "none_aligned": ("none", False),
    "none_misaligned": ("none", True),
    "prereg": ("prereg", True),
    "continual": ("continual", True),
}


@dataclass(frozen=True)
class StudyConfig:
    n: int = 10
    n_sims: int = 200
    n_perm: int = 300
    alpha: float = 0.05
    seed: int = 0
    grid_size: int = 101
    scale: float = 1.0
    loss: str = "Imean"
    tie_rule: str = "conservative"
    opts: est.AlignOptions = est.AlignOptions(use_temporal=False)
    n_jobs: int = 1

    @classmethod
    def tier(cls, name: str, **kw) -> "StudyConfig":
        """Preset sizes: ``desk`` (200 sims, 300 perms), ``smoke`` (50, 100) or ``paper`` (2000, 5000)."""
        sizes = {"desk": (200, 300), "smoke": (50, 100), "paper": (2000, 5000)}
        if name not in sizes:
            raise ValueError(f"unknown tier {name!r}; expected one of {tuple(sizes)}")
        sims, perms = sizes[name]
        return cls(n_sims=sims, n_perm=perms, **kw)


@dataclass(frozen=True, eq=False)
class CellResult:
    table: str
    model1: str
    model2: str
    accepted: int
    n_sims: int

    @property
    def rate(self) -> float:
        return self.accepted / self.n_sims

    @property
    def stderr(self) -> float:
        p = self.rate
        return float(np.sqrt(p * (1 - p) / self.n_sims))


def _sim_pvalue(cfg: StudyConfig, table: str, m1: str, m2: str, sim: int) -> float:
    variant, misalign = TABLES[table]
    t = np.linspace(0.0, 1.0, cfg.grid_size)
    i1, i2 = gpsim.MODEL_TAGS.index(m1), gpsim.MODEL_TAGS.index(m2)
    # data depend on the model pair and replicate only, so all tables see the same draws
    X1 = gpsim.sample_gp_array(gpsim.make_model(m1, t, cfg.scale), gpsim.make_rng(cfg.seed, i1, i2, sim, 1), cfg.n)
    X2 = gpsim.sample_gp_array(gpsim.make_model(m2, t, cfg.scale), gpsim.make_rng(cfg.seed, i1, i2, sim, 2), cfg.n)
    if misalign:
        P, Q = gpsim.misalignment()
        X2 = P @ X2 @ Q
    perm_seed = int(gpsim.make_rng(cfg.seed, i1, i2, sim, 3).integers(2**63))
    plan = testing.PermutationPlan(cfg.n, cfg.n, cfg.n_perm, perm_seed)
    kw = dict(t=t, plan=plan, loss=cfg.loss, alpha=cfg.alpha, tie_rule=cfg.tie_rule)
    if variant == "none":
        rep = testing.test_no_action(X1, X2, **kw)
    elif variant == "prereg":
        rep = testing.test_prereg(X1, X2, opts=cfg.opts, **kw)
    else:
        rep = testing.test_continual(X1, X2, opts=cfg.opts, **kw)
    return rep.p_value


def _sim_batch(cfg, table, m1, m2, sims):
    return [_sim_pvalue(cfg, table, m1, m2, s) for s in sims]


def run_cell(cfg: StudyConfig, table: str, m1: str, m2: str) -> CellResult:
    if table not in TABLES:
        raise ValueError(f"unknown table {table!r}; expected one of {tuple(TABLES)}")
    sims = list(range(cfg.n_sims))
    if cfg.n_jobs == 1:
        pvals = _sim_batch(cfg, table, m1, m2, sims)
    else:
        chunks = [sims[k :: cfg.n_jobs] for k in range(cfg.n_jobs)]
        pvals = [0.0] * cfg.n_sims
        serial = replace(cfg, n_jobs=1)
        with ProcessPoolExecutor(cfg.n_jobs) as pool:
            futs = [pool.submit(_sim_batch, serial, table, m1, m2, c) for c in chunks]
            for c, f in zip(chunks, futs):
                for s, p in zip(c, f.result()):
                    pvals[s] = p
    accepted = sum(p >= cfg.alpha for p in pvals)
    return CellResult(table, m1, m2, int(accepted), cfg.n_sims)


def model_pairs(models=gpsim.MODEL_TAGS):
    """Upper-triangle pairs ``(m_i, m_j)``, ``i <= j``."""
    return list(itertools.combinations_with_replacement(models, 2))


def run_table(cfg: StudyConfig, table: str, pairs=None, progress=None) -> list[CellResult]:
    out = []
    for m1, m2 in pairs or model_pairs():
        cell = run_cell(cfg, table, m1, m2)
        if progress is not None:
            progress(cell)
        out.append(cell)
    return out


def format_table(cells: list[CellResult], models=gpsim.MODEL_TAGS) -> str:
    """Acceptance percentages (standard error in brackets) as a text grid."""
    lookup = {(c.model1, c.model2): c for c in cells}
    width = 16
    lines = [cells[0].table if cells else "", "".ljust(6) + "".join(m.rjust(width) for m in models)]
    for m1 in models:
        row = m1.ljust(6)
        for m2 in models:
            c = lookup.get((m1, m2))
            row += (f"{100 * c.rate:.1f} ({100 * c.stderr:.1f})" if c else "").rjust(width)
        lines.append(row)
    return "\n".join(lines) + "\n"


def cells_to_csv(cells: list[CellResult]) -> str:
    lines = ["table,model1,model2,accepted,n_sims,rate,stderr"]
    for c in cells:
        lines.append(f"{c.table},{c.model1},{c.model2},{c.accepted},{c.n_sims},{c.rate!r},{c.stderr!r}")
    return "\n".join(lines) + "\n"
