"""Experiment orchestration: single runs, verification suites and sweeps.

Every experiment writes into its own output directory:

    timeseries.csv     one DiagnosticsRecord per row
    final_state.csv    cell values at the last time reached
    summary.json       verdicts, bounds, margins, fitted rates
    dist.svg           ‖u−ū‖∞, ‖v−v̄‖∞, ‖w−w_target‖∞ against t (log scale)
    lyapunov.svg       E (and E1 when defined) against t (log scale)
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Any

import numpy as np

from . import svg
from .config import ExperimentConfig, Kind, config_to_dict
from .diagnostics import DiagnosticsRecord, default_tau, fit_decay_rate, window_integrals_from_series
from .errors import ConfigError, InsufficientData, SolverError
from .grid import write_snapshot
from .model import check_theory_conditions, positive_constant_rate, stability_regime_check
from .oracle import homogeneous_solve
from .solver import DiagnosticsPlan, SimulationResult, run

logger = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

# tolerances shared by the verification kinds
W_BOUND_TOL = 1e-8
MASS_BOUND_TOL = 1e-6
LYAPUNOV_SLACK = 1e-6
LYAPUNOV_AFTER = 1.0
RATE_MIN_THM13 = 0.1
R2_MIN_THM13 = 0.95
ORACLE_REL_TOL = 1e-3


@dataclass
class ExperimentReport:
    exit_status: int
    artifacts: list[str]
    summary: dict[str, Any]
    result: SimulationResult | None = field(default=None, repr=False)


# -- serialisation ----------------------------------------------------------------


def timeseries_csv(records: list[DiagnosticsRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DiagnosticsRecord.columns())
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


# -- checks on a finished run ---------------------------------------------------------


def bounds_check(result: SimulationResult) -> dict:
    st, b = result.stats, result.bounds
    return {
        "max_sup_w": st.max_sup_w,
        "max_mass_u": st.max_mass_u,
        "max_mass_v": st.max_mass_v,
        "min_value": st.min_value,
        "w_bound_holds": st.max_sup_w <= b.M + W_BOUND_TOL,
        "mass_u_bound_holds": st.max_mass_u <= b.M1 + MASS_BOUND_TOL,
        "mass_v_bound_holds": st.max_mass_v <= b.M2 + MASS_BOUND_TOL,
        "nonnegative": st.min_value >= 0,
        "passed": (
            st.max_sup_w <= b.M + W_BOUND_TOL
            and st.max_mass_u <= b.M1 + MASS_BOUND_TOL
            and st.max_mass_v <= b.M2 + MASS_BOUND_TOL
            and st.min_value >= 0
        ),
    }


def lyapunov_E_check(result: SimulationResult, params, supply, slack: float = LYAPUNOV_SLACK) -> dict:
    """Discrete E(t_{k+1}) − E(t_k) ≤ (χ²ūM/2) ∫∫ r + slack·(1 + E(t_k))."""
    t = result.times
    E = result.column("lyap_E")
    coef = params.chi**2 * result.steady.ubar * result.bounds.M / 2
    measure = result.final.grid.measure
    worst = -math.inf
    checked = 0
    for k in range(len(t) - 1):
        if not (math.isfinite(E[k]) and math.isfinite(E[k + 1])):
            continue
        allowance = coef * supply.integral(t[k], t[k + 1], measure) + slack * (1 + abs(E[k]))
        worst = max(worst, (E[k + 1] - E[k]) - allowance)
        checked += 1
    return {"pairs_checked": checked, "worst_excess": worst if checked else None, "passed": checked > 0 and worst <= 0}


def lyapunov_E1_check(result: SimulationResult, after: float = LYAPUNOV_AFTER, slack: float = LYAPUNOV_SLACK) -> dict:
    """E1 nonincreasing between consecutive records after ``after``, up to slack·(1 + E1)."""
    t = result.times
    E1 = result.column("lyap_E1")
    worst = -math.inf
    checked = 0
    for k in range(len(t) - 1):
        if t[k] < after or not (math.isfinite(E1[k]) and math.isfinite(E1[k + 1])):
            continue
        worst = max(worst, (E1[k + 1] - E1[k]) - slack * (1 + abs(E1[k])))
        checked += 1
    return {"pairs_checked": checked, "worst_excess": worst if checked else None, "passed": checked > 0 and worst <= 0}


def _fit(result: SimulationResult, column: str) -> dict:
    try:
        fit = fit_decay_rate(result.times, result.column(column))
    except InsufficientData as exc:
        return {"column": column, "error": str(exc)}
    return {"column": column, "lambda": fit.lam, "c0": fit.c0, "window": list(fit.window), "r2": fit.r2}


def final_distance(result: SimulationResult) -> float:
    last = result.records[-1]
    return last.dist_u + last.dist_v + last.dist_w


def window_check(result: SimulationResult, alpha: float, after: float = 1.0, factor: float = 10.0) -> dict:
    """Boundedness in t of ∫_t^{t+τ}∫u^α: max over windows after ``after`` vs the first window."""
    t = result.times
    if len(t) < 2 or t[-1] <= t[0]:
        return {"passed": False, "error": "series too short"}
    tau = default_tau(t[-1] - t[0])
    wi = window_integrals_from_series(t, result.int_u_alpha, tau, p=alpha)
    first = float(wi.values[0])
    later = wi.values[wi.starts >= after]
    worst = float(later.max()) if later.size else first
    return {"tau": tau, "first": first, "max_after": worst, "passed": worst <= factor * first}


# -- running -------------------------------------------------------------------------


def _simulate(cfg: ExperimentConfig, plan: DiagnosticsPlan | None = None):
    initial = cfg.initial_state()
    try:
        return run(initial, cfg.params, cfg.supply, cfg.solver, plan or cfg.plan), None
    except SolverError as err:
        return err.partial, err


def _base_summary(cfg: ExperimentConfig, result: SimulationResult | None, err: SolverError | None) -> dict:
    verdict = check_theory_conditions(cfg.params)
    summary: dict[str, Any] = {
        "kind": cfg.kind.value,
        "config": config_to_dict(cfg),
        "theory": {"regime": verdict.regime.value, "reason": verdict.reason, "exploratory": verdict.exploratory},
        "solver_error": None if err is None else {"type": type(err).__name__, "message": str(err), "t": err.t},
    }
    if result is not None:
        summary["apriori_bounds"] = asdict(result.bounds)
        summary["steady_states"] = asdict(result.steady)
        summary["observed"] = {
            "t_reached": result.final.t,
            "max_sup_u": result.stats.max_sup_u,
            "max_sup_v": result.stats.max_sup_v,
            "steps": result.stats.steps,
            "rejected_steps": result.stats.rejected,
            "min_dt": result.stats.min_dt if result.stats.steps else None,
            "max_dt": result.stats.max_dt if result.stats.steps else None,
            "max_mass_defect_u": result.stats.max_mass_defect_u,
            "max_mass_defect_v": result.stats.max_mass_defect_v,
            **bounds_check(result),
        }
        r = positive_constant_rate(cfg.supply)
        if r is not None:
            margins = stability_regime_check(cfg.params, r, result.bounds.M, result.Mu)
            summary["regime_margins"] = {"L1": margins.L1, "L2": margins.L2, "regime_holds": margins.regime_holds, "Mu": result.Mu}
        if result.records:
            summary["final_distance"] = final_distance(result)
    return summary


def _write_run_artifacts(out: Path, result: SimulationResult | None) -> list[str]:
    if result is None:
        return []
    files = []
    path = out / "timeseries.csv"
    path.write_text(timeseries_csv(result.records))
    files.append(path)
    path = out / "final_state.csv"
    write_snapshot(result.final, path)
    files.append(path)
    for t, state in sorted(result.snapshots.items()):
        path = out / f"snapshot_t{t:.6g}.csv"
        write_snapshot(state, path)
        files.append(path)
    t = result.times
    path = out / "dist.svg"
    svg.write(
        path,
        svg.line_plot(
            t,
            {"dist_u": result.column("dist_u"), "dist_v": result.column("dist_v"), "dist_w": result.column("dist_w")},
            title="distance to steady state",
            ylabel="sup-norm distance",
            log_y=True,
        ),
    )
    files.append(path)
    lyap = {"E": result.column("lyap_E")}
    if np.isfinite(result.column("lyap_E1")).any():
        lyap["E1"] = result.column("lyap_E1")
    path = out / "lyapunov.svg"
    svg.write(path, svg.line_plot(t, lyap, title="entropy functionals", ylabel="value", log_y=True))
    files.append(path)
    return [str(f) for f in files]


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None, seed: int | None = None) -> ExperimentReport:
    """Run one configured experiment and write its artifacts."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind is Kind.SWEEP:
        return sweep(cfg, out)
    if cfg.kind is Kind.ORACLE_COMPARE:
        return _oracle_compare(cfg, out, seed)

    r = positive_constant_rate(cfg.supply)
    if cfg.kind is Kind.VERIFY_THEOREM13 and r is not None:
        raise ConfigError("supply", "verify_theorem13 needs an integrable supply (exp_decay, tabulated, or r = 0)")
    if cfg.kind is Kind.VERIFY_THEOREM14 and r is None:
        raise ConfigError("supply", "verify_theorem14 needs a positive constant supply")

    result, err = _simulate(cfg)
    summary = _base_summary(cfg, result, err)
    summary["seed"] = seed
    artifacts = _write_run_artifacts(out, result)

    status = EXIT_SOLVER if err is not None else EXIT_PASS
    if err is None and cfg.kind in (Kind.VERIFY_THEOREM13, Kind.VERIFY_THEOREM14):
        checks = _verify(cfg, result)
        summary["checks"] = checks
        passed = all(c["passed"] for c in checks.values())
        summary["verdict"] = "pass" if passed else "fail"
        status = EXIT_PASS if passed else EXIT_FAIL
    elif err is not None and cfg.kind is not Kind.SIMULATE:
        summary["verdict"] = "fail"

    path = out / "summary.json"
    _write_json(path, summary)
    artifacts.append(str(path))
    return ExperimentReport(status, artifacts, summary, result)


def _verify(cfg: ExperimentConfig, result: SimulationResult) -> dict:
    dist = final_distance(result)
    checks: dict[str, dict] = {
        "converged": {"final_distance": dist, "threshold": cfg.threshold, "passed": dist < cfg.threshold},
        "apriori_bounds": bounds_check(result),
        "window_integrals": window_check(result, cfg.params.alpha),
    }
    if cfg.kind is Kind.VERIFY_THEOREM13:
        fit = _fit(result, "dist_w")
        fit["passed"] = "lambda" in fit and fit["lambda"] > RATE_MIN_THM13 and fit["r2"] > R2_MIN_THM13
        checks["decay_rate"] = fit
        checks["lyapunov_E"] = lyapunov_E_check(result, cfg.params, cfg.supply)
    else:
        fit = _fit(result, "dist_u")
        fit["passed"] = "lambda" in fit and fit["lambda"] > 0
        checks["decay_rate"] = fit
        margins = stability_regime_check(cfg.params, positive_constant_rate(cfg.supply), result.bounds.M, result.Mu)
        if margins.regime_holds:
            checks["lyapunov_E1"] = lyapunov_E1_check(result)
        else:
            # outside the coefficient regime monotonicity is not claimed
            checks["lyapunov_E1"] = {"passed": True, "skipped": "regime margins not positive"}
    return checks


def _oracle_compare(cfg: ExperimentConfig, out: Path, seed: int | None) -> ExperimentReport:
    init = cfg.initial
    if init.get("type") == "file" or any(init[n]["type"] != "constant" for n in ("u", "v", "w")):
        raise ConfigError("initial", "oracle_compare needs spatially constant initial data")
    u0, v0, w0 = (init[n]["value"] for n in ("u", "v", "w"))
    plan = replace(cfg.plan, keep_states=True)
    result, err = _simulate(cfg, plan)
    summary = _base_summary(cfg, result, err)
    summary["seed"] = seed
    artifacts = _write_run_artifacts(out, result)
    status = EXIT_SOLVER
    if err is None:
        traj = homogeneous_solve(u0, v0, w0, cfg.params, cfg.supply, cfg.solver.t_end, cfg.oracle_dt, cfg.grid.measure)
        rows = []
        worst = 0.0
        for s in result.states:
            ref = traj.at(s.t)
            errs = [float(np.max(np.abs(z - zr))) / max(abs(zr), 1e-300) for z, zr in zip((s.u, s.v, s.w), ref)]
            worst = max(worst, *errs)
            rows.append([s.t, float(s.u.mean()), float(s.v.mean()), float(s.w.mean()), *ref, max(errs)])
        path = out / "oracle_compare.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "u", "v", "w", "u_oracle", "v_oracle", "w_oracle", "max_rel_err"])
        writer.writerows([[repr(float(x)) for x in row] for row in rows])
        path.write_text(buf.getvalue())
        artifacts.append(str(path))
        passed = worst < ORACLE_REL_TOL
        summary["checks"] = {"oracle": {"max_rel_err": worst, "tolerance": ORACLE_REL_TOL, "passed": passed}}
        summary["verdict"] = "pass" if passed else "fail"
        status = EXIT_PASS if passed else EXIT_FAIL
    path = out / "summary.json"
    _write_json(path, summary)
    artifacts.append(str(path))
    return ExperimentReport(status, artifacts, summary, result)


# -- sweeps -----------------------------------------------------------------------------

CONVERGED = "ConvergedToCoexistence"
NOT_CONVERGED = "NotConvergedByT"
FAILED = "Failed"
CLASS_COLORS = {CONVERGED: "#2ca02c", NOT_CONVERGED: "#ff7f0e", FAILED: "#d62728"}


@dataclass
class SweepReport(ExperimentReport):
    rows: list[dict] = field(default_factory=list)


def _sweep_point(args) -> dict:
    index, cfg, changes, points_dir = args
    row: dict[str, Any] = {"index": index, **changes}
    try:
        point_cfg = cfg.with_params(**changes)
    except ValueError as exc:
        row.update(classification=FAILED, error=str(exc))
        return row
    result, err = _simulate(point_cfg, replace(cfg.plan, keep_states=False))
    if result is not None and result.records:
        Path(points_dir, f"point_{index:04d}.csv").write_text(timeseries_csv(result.records))
        row["final_distance"] = final_distance(result)
        row["max_sup_u"] = result.Mu
        r = positive_constant_rate(cfg.supply)
        if r is not None:
            m = stability_regime_check(point_cfg.params, r, result.bounds.M, result.Mu)
            row.update(L1=m.L1, L2=m.L2, regime_holds=m.regime_holds)
    if err is not None:
        row.update(classification=FAILED, error=f"{type(err).__name__}: {err}")
    elif row["final_distance"] < cfg.threshold:
        row["classification"] = CONVERGED
    else:
        row["classification"] = NOT_CONVERGED
    return row


def sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> SweepReport:
    """Run every grid point of the sweep axes and classify its long-time state.

    Points run in a process pool; each writes its own time series under
    ``points/``. The regime map is assembled after all points finish.
    """
    from .config import _check_axes

    _check_axes(cfg.axes)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    points_dir = out / "points"
    points_dir.mkdir(parents=True, exist_ok=True)

    names = [a.param for a in cfg.axes]
    combos = list(product(*[a.values for a in cfg.axes]))
    tasks = [(i, cfg, dict(zip(names, combo)), str(points_dir)) for i, combo in enumerate(combos)]
    workers = cfg.workers or os.cpu_count() or 1
    if workers == 1 or len(tasks) == 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    rows.sort(key=lambda r: r["index"])

    artifacts = [str(points_dir / f"point_{r['index']:04d}.csv") for r in rows if (points_dir / f"point_{r['index']:04d}.csv").exists()]
    columns = [*names, "classification", "final_distance", "max_sup_u", "L1", "L2", "regime_holds", "error"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else (repr(row[c]) if isinstance(row[c], float) else row[c]) for c in columns])
    path = out / "regime_map.csv"
    path.write_text(buf.getvalue())
    artifacts.append(str(path))

    xs = cfg.axes[0].values
    ys = cfg.axes[1].values if len(cfg.axes) > 1 else (0.0,)
    labels = [[rows[i * len(ys) + j]["classification"] for j in range(len(ys))] for i in range(len(xs))]
    path = out / "regime_map.svg"
    svg.write(
        path,
        svg.heatmap(xs, ys, labels, CLASS_COLORS, title="long-time regime", xlabel=names[0], ylabel=names[1] if len(names) > 1 else ""),
    )
    artifacts.append(str(path))

    verdict = check_theory_conditions(cfg.params)
    summary = {
        "kind": Kind.SWEEP.value,
        "config": config_to_dict(cfg),
        "theory": {"regime": verdict.regime.value, "reason": verdict.reason, "exploratory": verdict.exploratory},
        "threshold": cfg.threshold,
        "rows": rows,
        "counts": {c: sum(r["classification"] == c for r in rows) for c in CLASS_COLORS},
    }
    path = out / "summary.json"
    _write_json(path, summary)
    artifacts.append(str(path))
    return SweepReport(EXIT_PASS, artifacts, summary, None, rows)
