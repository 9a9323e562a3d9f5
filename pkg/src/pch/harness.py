"""Monte Carlo replication harness.

Each (config, replication) pair is scored independently from its own RNG
stream. Aggregation happens after all replications finish, in a fixed
order, so the report does not depend on how work was scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .baselines import Method, run_baseline
from .core_stats import projection_operator
from .dgp import SimConfig, generate
from .inference import ConfidenceInterval, SignPrior, infer, true_direction
from .pipeline import pch

PCH = "PCH"
ALL_METHODS = (PCH, Method.TSHT.value, Method.EGGER.value, Method.IVW.value)
GRID = (-1.0, -0.6, -0.2, 0.2, 0.6, 1.0)
CASES = ("a", "b", "c", "d")


def case_effects(case: str, beta: float) -> tuple[float, float]:
    """``(beta_xy, beta_yx)`` for a simulation case at grid value ``beta``.

    a: Y->X only. b: X->Y only. c: X->Y fixed at 0.5, Y->X varies.
    d: Y->X fixed at 0.5, X->Y varies.
    """
    table = {
        "a": (0.0, beta),
        "b": (beta, 0.0),
        "c": (0.5, beta),
        "d": (beta, 0.5),
    }
    if case not in table:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    return table[case]


def case_grid(cases: Iterable[str] = CASES, grid: Iterable[float] = GRID, **overrides) -> list[SimConfig]:
    configs = []
    for case in cases:
        for b in grid:
            bxy, byx = case_effects(case, float(b))
            configs.append(SimConfig(beta_xy=bxy, beta_yx=byx, case=case, **overrides))
    return configs


@dataclass(frozen=True)
class MethodOutcome:
    """One method applied to one replication."""

    h_hat: int | None
    beta_xy: float | None
    beta_yx: float | None
    ci_xy: ConfidenceInterval | None
    ci_yx: ConfidenceInterval | None
    error: str | None = None


def _failed(msg: str) -> MethodOutcome:
    return MethodOutcome(None, None, None, None, None, msg)


def run_replication(cfg: SimConfig, rep: int, methods: Sequence[str] = ALL_METHODS,
                    sign_prior: SignPrior | str = SignPrior.MAGNITUDE_LT_1,
                    alpha: float = 0.05) -> dict[str, MethodOutcome]:
    """Generate one dataset and score every requested method on it.

    Failures are captured per method (or for the whole replication when
    generation fails) instead of propagating.
    """
    try:
        data = generate(cfg, rep)
        proj = projection_operator(data.Z)
    except (np.linalg.LinAlgError, ValueError) as exc:
        return {m: _failed(f"{type(exc).__name__}: {exc}") for m in methods}

    out: dict[str, MethodOutcome] = {}
    for m in methods:
        try:
            if m == PCH:
                res = infer(pch(data.X, data.Y, data.Z, proj=proj),
                            pch(data.Y, data.X, data.Z, proj=proj),
                            data.n, alpha=alpha, sign_prior=sign_prior)
                out[m] = MethodOutcome(res.h_hat, res.beta_xy_hat, res.beta_yx_hat, res.ci_xy, res.ci_yx)
            else:
                res = run_baseline(data, m, alpha=alpha, proj=proj)
                out[m] = MethodOutcome(res.h_call, res.beta_xy, res.beta_yx, res.ci_xy, res.ci_yx)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            out[m] = _failed(f"{type(exc).__name__}: {exc}")
    return out


@dataclass(frozen=True)
class ReportRow:
    """Aggregate over the replications of one config for one method.

    RMSE and coverage use only replications where the estimate exists; the
    ``na_*`` counts say how many were dropped.
    """

    case: str
    beta_xy: float
    beta_yx: float
    method: str
    replications: int
    accuracy: float
    rmse_xy: float | None
    rmse_yx: float | None
    coverage_xy: float | None
    coverage_yx: float | None
    na_xy: int
    na_yx: int
    failures: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[ReportRow, ...]
    configs: tuple[SimConfig, ...]
    sign_prior: str

    def row(self, case: str, beta_xy: float, beta_yx: float, method: str = PCH) -> ReportRow:
        for r in self.rows:
            if (r.case, r.method) == (case, method) and math.isclose(r.beta_xy, beta_xy) \
                    and math.isclose(r.beta_yx, beta_yx):
                return r
        raise KeyError((case, beta_xy, beta_yx, method))

    def summary(self) -> dict[str, dict[str, float | None]]:
        """Per-method means of accuracy and coverage across all rows."""
        out = {}
        for m in dict.fromkeys(r.method for r in self.rows):
            rows = [r for r in self.rows if r.method == m]

            def avg(vals):
                vals = [v for v in vals if v is not None]
                return math.fsum(vals) / len(vals) if vals else None

            out[m] = {
                "accuracy": avg(r.accuracy for r in rows),
                "coverage_xy": avg(r.coverage_xy for r in rows),
                "coverage_yx": avg(r.coverage_yx for r in rows),
            }
        return out


def _score(truth: float, outcomes: list[MethodOutcome], attr: str):
    est = [getattr(o, f"beta_{attr}") for o in outcomes]
    cis = [getattr(o, f"ci_{attr}") for o in outcomes]
    keep = [i for i, b in enumerate(est) if b is not None]
    na = len(est) - len(keep)
    if not keep:
        return None, None, na
    rmse = math.sqrt(math.fsum((est[i] - truth) ** 2 for i in keep) / len(keep))
    covered = [cis[i].contains(truth) for i in keep if cis[i] is not None and not cis[i].is_na]
    coverage = sum(covered) / len(covered) if covered else None
    return rmse, coverage, na


def aggregate(cfg: SimConfig, method: str, outcomes: list[MethodOutcome]) -> ReportRow:
    h_true = true_direction(cfg.beta_xy, cfg.beta_yx)
    rmse_xy, cov_xy, na_xy = _score(cfg.beta_xy, outcomes, "xy")
    rmse_yx, cov_yx, na_yx = _score(cfg.beta_yx, outcomes, "yx")
    hits = sum(o.h_hat == h_true for o in outcomes)
    return ReportRow(
        case=cfg.case,
        beta_xy=cfg.beta_xy,
        beta_yx=cfg.beta_yx,
        method=method,
        replications=len(outcomes),
        accuracy=hits / len(outcomes),
        rmse_xy=rmse_xy,
        rmse_yx=rmse_yx,
        coverage_xy=cov_xy,
        coverage_yx=cov_yx,
        na_xy=na_xy,
        na_yx=na_yx,
        failures=sum(o.error is not None for o in outcomes),
    )


def _task(args):
    cfg, rep, methods, prior, alpha = args
    return run_replication(cfg, rep, methods, prior, alpha)


THREADS_ENV = "PCH_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, value)


def run_experiment(configs: Sequence[SimConfig], methods: Sequence[str] = ALL_METHODS,
                   sign_prior: SignPrior | str = SignPrior.MAGNITUDE_LT_1,
                   alpha: float = 0.05, threads: int | None = None,
                   replications: int | None = None) -> ExperimentReport:
    """Run every config for its number of replications and aggregate.

    ``replications`` overrides the per-config count. ``threads`` > 1 farms
    replications out to worker processes; the report is identical either way.
    """
    methods = tuple(Method(m).value if m != PCH else PCH for m in methods)
    prior = SignPrior(sign_prior)
    if replications is not None:
        configs = [replace(c, replications=replications) for c in configs]
    configs = tuple(configs)
    threads = default_threads() if threads is None else max(1, int(threads))

    tasks = [(c, r, methods, prior, alpha) for c in configs for r in range(c.replications)]
    if threads == 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))

    rows = []
    pos = 0
    for cfg in configs:
        chunk = results[pos: pos + cfg.replications]
        pos += cfg.replications
        for m in methods:
            rows.append(aggregate(cfg, m, [res[m] for res in chunk]))
    return ExperimentReport(tuple(rows), configs, prior.value)
