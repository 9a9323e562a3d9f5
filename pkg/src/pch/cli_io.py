"""Command line entry points: analyze a CSV, run simulation sweeps, query the oracle.

Machine-readable output is one JSON object per line. Missing estimates are
written as the string ``"NA"`` and oracle infinities as ``"INF"``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .baselines import Method, run_baseline
from .core_stats import Dataset, SingularDesignError, projection_operator
from .harness import (ALL_METHODS, CASES, GRID, PCH, ExperimentReport, case_effects,
                      default_threads, run_experiment)
from .dgp import SimConfig
from .inference import ConfidenceInterval, SignPrior, infer
from .oracle import INF, PopulationSpec, oracle_pch, simulation_population
from .pipeline import PCHOutput, pch

NA = "NA"


class DataError(ValueError):
    """Malformed input table; the message names the offending location."""


class ConfigError(ValueError):
    """Invalid simulation or oracle configuration."""


# ---------------------------------------------------------------- ingestion

def load_dataset(path, x: str | None = None, y: str | None = None,
                 z: Sequence[str] | None = None) -> tuple[Dataset, dict[str, Any]]:
    """Read a comma-separated file with a header row.

    By default the first column is X, the second Y and every remaining
    column an instrument. Returns the centered dataset and the resolved
    column names.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        rows = list(reader)

    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"{path}: duplicate column names {dupes}")
    if len(header) < 3 and z is None:
        raise DataError(f"{path}: need at least three columns (X, Y and one instrument)")

    x = header[0] if x is None else x
    y = header[1] if y is None else y
    z = [h for h in header if h not in (x, y)] if z is None else list(z)
    for role, name in [("X", x), ("Y", y)] + [("Z", c) for c in z]:
        if name not in header:
            raise DataError(f"{path}: column {name!r} (role {role}) not found; header is {header}")
    if not z:
        raise DataError(f"{path}: no instrument columns")
    if x == y or x in z or y in z:
        raise DataError(f"{path}: a column cannot play two roles")

    cols = [header.index(c) for c in [x, y, *z]]
    values = np.empty((len(rows), len(cols)))
    for r, row in enumerate(rows):
        line = r + 2  # 1-based, after the header
        if len(row) != len(header):
            raise DataError(f"{path}: row {line} has {len(row)} fields, expected {len(header)}")
        for k, c in enumerate(cols):
            cell = row[c].strip()
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                what = "blank" if cell == "" else f"non-numeric value {cell!r}"
                raise DataError(f"{path}: row {line}, column {header[c]!r}: {what}")
            values[r, k] = v
    data = Dataset.from_arrays(values[:, 0], values[:, 1], values[:, 2:])
    return data, {"x": x, "y": y, "z": z}


def write_dataset(path, data: Dataset, names: dict[str, Any] | None = None) -> None:
    """Write a dataset as CSV with full float precision."""
    names = names or {"x": "X", "y": "Y", "z": [f"Z{j + 1}" for j in range(data.p)]}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([names["x"], names["y"], *names["z"]])
        for i in range(data.n):
            w.writerow([repr(float(v)) for v in (data.X[i], data.Y[i], *data.Z[i])])


# ---------------------------------------------------------------- records

@dataclass(frozen=True)
class AnalysisRequest:
    data_path: str
    x: str | None = None
    y: str | None = None
    z: tuple[str, ...] | None = None
    alpha: float = 0.05
    sign_prior: SignPrior = SignPrior.XY_POS_YX_NEG
    baselines: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "sign_prior", SignPrior(self.sign_prior))


@dataclass(frozen=True)
class ReportRecord:
    method: str
    h_hat: int | None
    beta_xy: float | None
    ci_xy: tuple[float | None, float | None]
    beta_yx: float | None
    ci_yx: tuple[float | None, float | None]
    alpha: float
    branch_taken: str | None = None
    valid_set_sizes: tuple[int | None, int | None] = (None, None)
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(_encode(asdict(self)))

    @classmethod
    def from_json(cls, line: str) -> "ReportRecord":
        raw = _decode(json.loads(line))
        for key in ("ci_xy", "ci_yx", "valid_set_sizes"):
            raw[key] = tuple(raw[key])
        names = {f.name for f in fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ValueError(f"unknown record fields {sorted(unknown)}")
        return cls(**raw)


def _encode(obj):
    if obj is None:
        return NA
    if obj is INF:
        return "INF"
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _decode(obj):
    if obj == NA:
        return None
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def _bounds(c: ConfidenceInterval) -> tuple[float | None, float | None]:
    return (c.lower, c.upper)


def _side_diag(out: PCHOutput) -> dict[str, Any]:
    sel = out.diagnostics.selection
    return {
        "mode_unique": None if sel is None else sel.mode_unique,
        "relevant": None if sel is None else len(sel.relevant),
        "ch_statistic": out.diagnostics.ch_statistic,
        "ch_passed": out.diagnostics.ch_passed,
    }


def analyze_dataset(data: Dataset, alpha: float = 0.05,
                    sign_prior: SignPrior | str = SignPrior.XY_POS_YX_NEG,
                    baselines: bool = False) -> list[ReportRecord]:
    proj = projection_operator(data.Z)
    side_i = pch(data.X, data.Y, data.Z, proj=proj)
    side_ii = pch(data.Y, data.X, data.Z, proj=proj)
    res = infer(side_i, side_ii, data.n, alpha=alpha, sign_prior=sign_prior)
    records = [ReportRecord(
        method=PCH,
        h_hat=res.h_hat,
        beta_xy=res.beta_xy_hat,
        ci_xy=_bounds(res.ci_xy),
        beta_yx=res.beta_yx_hat,
        ci_yx=_bounds(res.ci_yx),
        alpha=alpha,
        branch_taken=res.branch_taken.value,
        valid_set_sizes=(len(side_i.valid_set), len(side_ii.valid_set)),
        diagnostics={"I": _side_diag(side_i), "II": _side_diag(side_ii),
                     "sign_prior": res.sign_prior.value, "messages": list(res.diagnostics)},
    )]
    if baselines:
        for m in (Method.TSHT, Method.EGGER, Method.IVW):
            b = run_baseline(data, m, alpha=alpha, proj=proj)
            records.append(ReportRecord(m.value, b.h_call, b.beta_xy, _bounds(b.ci_xy),
                                        b.beta_yx, _bounds(b.ci_yx), alpha))
    return records


def cmd_analyze(req: AnalysisRequest) -> list[ReportRecord]:
    data, _ = load_dataset(req.data_path, req.x, req.y, req.z)
    return analyze_dataset(data, req.alpha, req.sign_prior, req.baselines)


def _fmt(v, digits=4) -> str:
    return NA if v is None else f"{v:.{digits}f}"


def _fmt_ci(ci) -> str:
    lo, hi = ci
    return NA if lo is None else f"({lo:.4f}, {hi:.4f})"


TABLE_COLUMNS = ("method", "H_hat", "beta_xy", "CI_xy", "beta_yx", "CI_yx")


def format_table(records: Sequence[ReportRecord]) -> str:
    rows = [TABLE_COLUMNS] + [
        (r.method, NA if r.h_hat is None else str(r.h_hat), _fmt(r.beta_xy), _fmt_ci(r.ci_xy),
         _fmt(r.beta_yx), _fmt_ci(r.ci_yx))
        for r in records
    ]
    widths = [max(len(row[k]) for row in rows) for k in range(len(TABLE_COLUMNS))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)


# ---------------------------------------------------------------- simulate

SIM_KEYS = {
    "n": int, "p": int, "s_x": int, "s_xy": int, "s_y": int,
    "pi_strength_x": float, "pi_strength_y": float, "seed": int, "replications": int,
    "cases": list, "grid": list, "methods": list, "sign_prior": str, "alpha": float,
    "threads": int,
}


def bundled_config_path(name: str = "desk.yaml") -> Path:
    return Path(str(resources.files("pch").joinpath("configs", name)))


def _check_type(key, value, kind) -> str | None:
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind) and not isinstance(value, bool)
    return None if ok else f"{key}: expected {kind.__name__}, got {type(value).__name__}"


def load_sim_config(path) -> dict[str, Any]:
    """Parse and validate a YAML simulation config; all problems are reported at once."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    problems = [f"{k}: unknown key" for k in raw if k not in SIM_KEYS]
    problems += [msg for k, v in raw.items() if k in SIM_KEYS
                 for msg in [_check_type(k, v, SIM_KEYS[k])] if msg]
    cfg = dict(raw)
    for c in cfg.get("cases", []) if isinstance(cfg.get("cases"), list) else []:
        if c not in CASES:
            problems.append(f"cases: unknown case {c!r}")
    for m in cfg.get("methods", []) if isinstance(cfg.get("methods"), list) else []:
        if m not in ALL_METHODS:
            problems.append(f"methods: unknown method {m!r}")
    grid = cfg.get("grid", [])
    if isinstance(grid, list) and not all(isinstance(g, (int, float)) and not isinstance(g, bool)
                                           for g in grid):
        problems.append("grid: entries must be numbers")
    if "sign_prior" in cfg and cfg["sign_prior"] not in SignPrior.__members__:
        problems.append(f"sign_prior: must be one of {list(SignPrior.__members__)}")
    if problems:
        raise ConfigError(f"{path}: invalid config\n  " + "\n  ".join(problems))
    return cfg


def configs_from(cfg: dict[str, Any]) -> list[SimConfig]:
    base = {k: cfg[k] for k in ("n", "p", "s_x", "s_xy", "s_y", "pi_strength_x",
                                "pi_strength_y", "seed", "replications") if k in cfg}
    out = []
    try:
        for case in cfg.get("cases", list(CASES)):
            for b in cfg.get("grid", list(GRID)):
                bxy, byx = case_effects(case, float(b))
                out.append(SimConfig(beta_xy=bxy, beta_yx=byx, case=case, **base))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return out


def _num(v):
    return NA if v is None else repr(float(v))


def write_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "rows": out_dir / "report.jsonl",
        "summary": out_dir / "summary.json",
        "plot": out_dir / "plot_data.csv",
    }
    with paths["rows"].open("w") as fh:
        for row in report.rows:
            fh.write(json.dumps(_encode(row.to_dict())) + "\n")
    paths["summary"].write_text(json.dumps(_encode({
        "sign_prior": report.sign_prior,
        "configs": len(report.configs),
        "methods": report.summary(),
    }), indent=2, sort_keys=True) + "\n")
    # long format: one line per (case, method, metric, grid value), as in a faceted plot
    with paths["plot"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "method", "metric", "x", "y"])
        for row in report.rows:
            x = row.beta_yx if row.case in ("a", "c") else row.beta_xy
            for metric in ("accuracy", "rmse_xy", "rmse_yx", "coverage_xy", "coverage_yx"):
                w.writerow([row.case, row.method, metric, repr(float(x)), _num(getattr(row, metric))])
    return paths


def cmd_simulate(config_path, out_dir, threads: int | None = None) -> ExperimentReport:
    cfg = load_sim_config(config_path)
    configs = configs_from(cfg)
    report = run_experiment(
        configs,
        methods=cfg.get("methods", list(ALL_METHODS)),
        sign_prior=cfg.get("sign_prior", SignPrior.MAGNITUDE_LT_1.value),
        alpha=cfg.get("alpha", 0.05),
        threads=threads if threads is not None else cfg.get("threads"),
    )
    write_report(report, out_dir)
    return report


# ---------------------------------------------------------------- oracle

ORACLE_KEYS = {"beta_xy", "beta_yx", "p", "s_x", "s_xy", "s_y", "pi_strength_x",
               "pi_strength_y", "pi_x", "pi_y", "sigma", "m_zeta", "m_eta", "m_cross"}


def population_from(cfg: dict[str, Any]) -> PopulationSpec:
    """Either the simulation design (scalar keys) or explicit vectors."""
    unknown = sorted(set(cfg) - ORACLE_KEYS)
    missing = sorted({"beta_xy", "beta_yx"} - set(cfg))
    if unknown or missing:
        raise ConfigError("oracle spec: " + "; ".join(
            [f"unknown keys {unknown}"] * bool(unknown) + [f"missing keys {missing}"] * bool(missing)))
    bxy, byx = float(cfg["beta_xy"]), float(cfg["beta_yx"])
    try:
        if "pi_x" in cfg:
            need = {"pi_y", "sigma", "m_zeta", "m_eta"} - set(cfg)
            if need:
                raise ConfigError(f"oracle spec: explicit form needs {sorted(need)}")
            arr = {k: np.asarray(cfg[k], dtype=float) for k in ("pi_x", "pi_y", "sigma", "m_zeta", "m_eta")}
            cross = np.asarray(cfg["m_cross"], dtype=float) if "m_cross" in cfg else None
            return PopulationSpec(bxy, byx, arr["pi_x"], arr["pi_y"], arr["sigma"],
                                  arr["m_zeta"], arr["m_eta"], cross)
        kw = {k: cfg[k] for k in ("s_x", "s_xy", "s_y", "pi_strength_x", "pi_strength_y") if k in cfg}
        return simulation_population(bxy, byx, int(cfg.get("p", 100)), **kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"oracle spec: {exc}") from exc


def cmd_oracle(spec_path) -> list[dict[str, Any]]:
    try:
        cfg = yaml.safe_load(Path(spec_path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{spec_path}: not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{spec_path}: top level must be a mapping")
    spec = population_from(cfg)
    out = []
    for side, direction in (("I", "X"), ("II", "Y")):
        t = oracle_pch(spec, direction)
        out.append({"side": side, "exposure": direction, "beta_fwd": t.beta_fwd,
                    "beta_rev": t.beta_rev, "valid_set": list(t.valid_set)})
    return out


# ---------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="estimate causal direction and effects from a CSV")
    a.add_argument("--data", required=True, help="comma-separated file with a header row")
    a.add_argument("--x", help="exposure column (default: first column)")
    a.add_argument("--y", help="outcome column (default: second column)")
    a.add_argument("--z", nargs="+", help="instrument columns (default: all remaining)")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--sign-prior", choices=[s.value for s in SignPrior],
                   default=SignPrior.XY_POS_YX_NEG.value)
    a.add_argument("--baselines", action="store_true", help="also report TSHT, Egger and IVW")
    a.add_argument("--out", help="write JSON lines here instead of stdout")
    a.add_argument("--table", action="store_true", help="print a human-readable table")

    s = sub.add_parser("simulate", help="run a simulation sweep from a YAML config")
    s.add_argument("--config", default=None, help="YAML config (default: bundled desk config)")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $PCH_THREADS or 1)")

    o = sub.add_parser("oracle", help="population PCH from a YAML parameter spec")
    o.add_argument("--spec", required=True)
    return parser


EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SINGULAR = 0, 2, 1, 3


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            req = AnalysisRequest(args.data, args.x, args.y, tuple(args.z) if args.z else None,
                                  args.alpha, args.sign_prior, args.baselines)
            records = cmd_analyze(req)
            lines = "".join(r.to_json() + "\n" for r in records)
            if args.out:
                Path(args.out).write_text(lines)
            else:
                sys.stdout.write(lines)
            if args.table or args.out:
                print(format_table(records))
        elif args.command == "simulate":
            threads = args.threads if args.threads is not None else default_threads()
            report = cmd_simulate(args.config or bundled_config_path(), args.out_dir, threads)
            print(json.dumps(_encode(report.summary()), indent=2, sort_keys=True))
        else:
            for rec in cmd_oracle(args.spec):
                print(json.dumps(_encode(rec)))
    except SingularDesignError as exc:
        print(f"error: singular design: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
