"""Monte-Carlo experiment runner, fairness tables and the power model.

An experiment file uses the same ``key = value`` format as scenario files::

    scenario = desk.cfg        # optional, relative to this file
    solver = MR, GMR, SR
    sweep = p_max              # p_max | L | N
    values = 0, 5, 10
    trials = 20
    output = out/pmax          # relative to this file
    trace = false
    p_max_dbm = 10             # any scenario key overrides the scenario file

Trial t of every cell uses seed ``config.seed + t``, so all solvers and
sweep values see the same channel draws. Each finished cell is stored as a
small JSON file under ``<output>/cells``; a rerun skips cells already there.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import CONFIG_KEYS, ConfigError, SystemConfig, dbm_to_watts, desk_config, format_config, parse_config_text
from .rates import STDDEV_DISPLAY_FLOOR

log = logging.getLogger(__name__)

SOLVERS = ("MR", "GMR", "SR")
SWEEPS = {"p_max": ("p_max_dbm", float), "L": ("num_layers", int), "N": ("meta_atoms", int)}
METRICS = ("min_rate", "sum_rate", "gm_rate", "rate_stddev", "min_max_ratio")
COLUMNS = ("kind", "solver", "sweep", "value", "trial", "seed", "status", *METRICS, "iterations", "rates", "error")
SEED_ENV = "SIMBF_SEED"


class ExperimentError(ValueError):
    """Malformed or inconsistent experiment file."""


@dataclass(frozen=True)
class PowerModel:
    p_rf_dbm: float = 30.0
    p0_dbm: float = 40.0
    p_sim_dbm: float = 10.0

    def __post_init__(self):
        for name in ("p_rf_dbm", "p0_dbm", "p_sim_dbm"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def total_power(model: PowerModel, p_max_dbm: float, m: int, l: int, n: int) -> float:
    """Transmit power plus M RF chains, the base load and L*N meta-atoms, in watts."""
    if min(m, l, n) < 0:
        raise ValueError("counts must be non-negative")
    return float(
        dbm_to_watts(p_max_dbm)
        + m * dbm_to_watts(model.p_rf_dbm)
        + dbm_to_watts(model.p0_dbm)
        + l * n * dbm_to_watts(model.p_sim_dbm)
    )


@dataclass
class ExperimentSpec:
    solvers: tuple[str, ...]
    sweep: str
    values: tuple
    trials: int
    output: Path
    config: SystemConfig
    trace: bool = False
    source: str = ""  # path of the experiment file, informational

    def validate(self):
        if self.trials < 1:
            raise ExperimentError("trials must be >= 1")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad or not self.solvers:
            raise ExperimentError(f"solver must be among {SOLVERS}, got {self.solvers}")
        if self.sweep not in SWEEPS:
            raise ExperimentError(f"sweep must be one of {tuple(SWEEPS)}, got {self.sweep!r}")
        if not self.values:
            raise ExperimentError("values must not be empty")
        for v in self.values:
            try:
                self.cell_config(v, 0)
            except ConfigError as exc:
                raise ExperimentError(f"sweep value {v!r} is invalid: {exc}") from None

    def cell_config(self, value, trial: int) -> SystemConfig:
        name, _ = SWEEPS[self.sweep]
        return replace(self.config, **{name: value, "seed": self.config.seed + trial})

    def cells(self):
        for solver in self.solvers:
            for value in self.values:
                for trial in range(self.trials):
                    yield solver, value, trial

    def fingerprint(self) -> dict:
        return {
            "solvers": list(self.solvers),
            "sweep": self.sweep,
            "values": list(self.values),
            "trials": self.trials,
            "config": format_config(self.config),
        }


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def parse_spec_text(text: str, base_dir=".", full_scale: bool = False, env=None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from experiment-file text.

    Scenario defaults are the desk-scale instance unless ``full_scale``.
    ``env`` (default ``os.environ``) may carry ``SIMBF_SEED``.
    """
    env = os.environ if env is None else env
    base_dir = Path(base_dir)
    own, overrides = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ExperimentError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key in ("scenario", "solver", "sweep", "values", "trials", "output", "trace"):
            own[key] = val
        elif key in CONFIG_KEYS:
            overrides.append(f"{key} = {val}")
        else:
            raise ExperimentError(f"line {lineno}: unknown key {key!r}")
    for key in ("solver", "sweep", "values", "output"):
        if key not in own:
            raise ExperimentError(f"missing key {key!r}")
    try:
        base = SystemConfig() if full_scale else desk_config()
        if "scenario" in own:
            base = parse_config_text((base_dir / own["scenario"]).read_text(encoding="utf-8"), base)
        cfg = parse_config_text("\n".join(overrides), base)
        if SEED_ENV in env:
            cfg = replace(cfg, seed=int(env[SEED_ENV]))
    except (ConfigError, OSError, ValueError) as exc:
        raise ExperimentError(f"scenario: {exc}") from None

    sweep = own["sweep"]
    if sweep not in SWEEPS:
        raise ExperimentError(f"sweep must be one of {tuple(SWEEPS)}, got {sweep!r}")
    conv = SWEEPS[sweep][1]
    try:
        values = tuple(conv(v) for v in own["values"].replace(",", " ").split())
        trials = int(own.get("trials", "1"))
        trace = _parse_bool(own.get("trace", "false"))
    except ValueError as exc:
        raise ExperimentError(str(exc)) from None
    spec = ExperimentSpec(
        solvers=tuple(s.strip().upper() for s in own["solver"].split(",") if s.strip()),
        sweep=sweep,
        values=values,
        trials=trials,
        output=base_dir / own["output"],
        config=cfg,
        trace=trace,
    )
    spec.validate()
    return spec


def load_spec(path, full_scale: bool = False, env=None) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ExperimentError(str(exc)) from None
    spec = parse_spec_text(text, path.parent, full_scale, env)
    spec.source = str(path)
    return spec


# ---------------------------------------------------------------------------
# running


def solve(channels, cfg: SystemConfig, solver: str, trace_sink=None):
    """Dispatch to one of the three solvers; returns ``(report, iterations)``."""
    from .gmr_ao import solve_gmr
    from .mr_admm import solve_mr

    if solver == "MR":
        res = solve_mr(channels, cfg, trace_sink=trace_sink)
        return res.report, res.outer_iterations
    res = solve_gmr(channels, cfg, mode=solver, trace_sink=trace_sink)
    return res.report, res.iterations


def cell_name(solver, sweep, value, trial) -> str:
    return f"{solver}_{sweep}={value}_t{trial:04d}"


def run_cell(args) -> dict:
    """Worker entry point: one (solver, sweep value, trial) cell -> a data row."""
    from .scenario import generate_channels

    solver, sweep, value, trial, cfg, trace_path = args
    row = {"kind": "data", "solver": solver, "sweep": sweep, "value": value, "trial": trial, "seed": cfg.seed}
    sink, fh = None, None
    try:
        if trace_path is not None:
            fh = open(trace_path, "w", encoding="utf-8")

            def sink(rec):
                fh.write(json.dumps({"solver": solver, **rec}) + "\n")

        report, iters = solve(generate_channels(cfg), cfg, solver, sink)
        row.update({m: float(getattr(report, m)) for m in METRICS})
        row.update(status="ok", iterations=int(iters), rates=[float(r) for r in report.rate], error="")
    except Exception as exc:  # recorded in the row, the run goes on
        log.warning("cell %s failed: %s", cell_name(solver, sweep, value, trial), exc)
        row.update({m: None for m in METRICS})
        row.update(status="failed", iterations=None, rates=None, error=f"{type(exc).__name__}: {exc}")
    finally:
        if fh is not None:
            fh.close()
    return row


@dataclass
class ExperimentResult:
    rows: list  # data rows then aggregate rows, in table order
    csv_path: Path
    fairness_path: Path
    failures: int = 0
    skipped: int = 0
    ran: int = 0


def aggregate(rows, solvers, values, sweep) -> list[dict]:
    """One mean row per (solver, value) over the successful trial rows."""
    out = []
    for solver in solvers:
        for value in values:
            group = [r for r in rows if r["solver"] == solver and r["value"] == value]
            ok = [r for r in group if r["status"] == "ok"]
            agg = {"kind": "mean", "solver": solver, "sweep": sweep, "value": value, "trial": None, "seed": None}
            agg["status"] = f"{len(ok)}/{len(group)}"
            for m in (*METRICS, "iterations"):
                agg[m] = float(np.mean([r[m] for r in ok])) if ok else None
            agg["rates"] = [float(x) for x in np.mean([r["rates"] for r in ok], axis=0)] if ok else None
            agg["error"] = ""
            out.append(agg)
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(repr(float(x)) for x in v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in COLUMNS])
    return buf.getvalue()


def emit_fairness_tables(rows) -> str:
    """Per solver and sweep value: mean rate standard deviation and min/max ratio.

    ``rate_stddev`` is the display value (0 below the display floor);
    ``rate_stddev_raw`` keeps the unrounded mean.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("solver", "sweep", "value", "trials", "rate_stddev", "rate_stddev_raw", "min_max_ratio"))
    for r in rows:
        if r["kind"] != "mean" or r["rate_stddev"] is None:
            continue
        std = r["rate_stddev"]
        shown = 0.0 if std < STDDEV_DISPLAY_FLOOR else std
        w.writerow((r["solver"], r["sweep"], _fmt(r["value"]), r["status"], f"{shown:.4g}", repr(std), f"{r['min_max_ratio']:.6f}"))
    return buf.getvalue()


def _load_cell(path: Path):
    try:
        row = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None
    return row if row.get("status") == "ok" else None


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentResult:
    """Run every missing cell, then rewrite ``results.csv`` and ``fairness.csv``."""
    out = Path(spec.output)
    cells_dir = out / "cells"
    traces_dir = out / "traces"
    cells_dir.mkdir(parents=True, exist_ok=True)
    if spec.trace:
        traces_dir.mkdir(exist_ok=True)
    stamp = out / "spec.json"
    fp = spec.fingerprint()
    if stamp.exists():
        old = json.loads(stamp.read_text(encoding="utf-8"))
        if old != fp:
            raise ExperimentError(f"{out} holds results for a different experiment; use a fresh output directory")
    else:
        stamp.write_text(json.dumps(fp, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    done, todo = {}, []
    for solver, value, trial in spec.cells():
        name = cell_name(solver, spec.sweep, value, trial)
        row = _load_cell(cells_dir / f"{name}.json")
        if row is not None:
            done[name] = row
            continue
        trace_path = traces_dir / f"{name}.jsonl" if spec.trace else None
        todo.append((solver, spec.sweep, value, trial, spec.cell_config(value, trial), trace_path))
    skipped = len(done)
    log.info("%d cells to run, %d already done", len(todo), skipped)

    def store(row):
        name = cell_name(row["solver"], row["sweep"], row["value"], row["trial"])
        (cells_dir / f"{name}.json").write_text(json.dumps(row, sort_keys=True) + "\n", encoding="utf-8")
        done[name] = row

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for row in pool.map(run_cell, todo):
                store(row)
    else:
        for args in todo:
            store(run_cell(args))

    data = [done[cell_name(s, spec.sweep, v, t)] for s, v, t in spec.cells()]
    rows = data + aggregate(data, spec.solvers, spec.values, spec.sweep)
    csv_path = out / "results.csv"
    csv_path.write_text(rows_to_csv(rows), encoding="utf-8")
    fair_path = out / "fairness.csv"
    fair_path.write_text(emit_fairness_tables(rows), encoding="utf-8")
    failures = sum(r["status"] != "ok" for r in data)
    return ExperimentResult(rows, csv_path, fair_path, failures, skipped, len(todo))

