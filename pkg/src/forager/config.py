"""Experiment configuration: JSON schema, validation and defaults."""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError
from .grid import Grid, State, read_snapshot
from .model import Constant, ExpDecay, ModelParams, SupplyTerm, Tabulated
from .solver import DiagnosticsPlan, SolverConfig


class Kind(enum.Enum):
    SIMULATE = "simulate"
    VERIFY_THEOREM13 = "verify_theorem13"
    VERIFY_THEOREM14 = "verify_theorem14"
    SWEEP = "sweep"
    ORACLE_COMPARE = "oracle_compare"


SWEEPABLE = ("chi", "xi", "mu", "a1", "b1", "alpha", "a2", "b2", "beta")
MAX_AXIS_POINTS = 64


def load_schema() -> dict:
    return json.loads(resources.files("forager").joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class SweepAxis:
    param: str
    values: tuple[float, ...]


@dataclass
class ExperimentConfig:
    kind: Kind
    params: ModelParams
    supply: SupplyTerm
    grid: Grid
    initial: dict
    solver: SolverConfig
    plan: DiagnosticsPlan
    output_dir: str = "out"
    threshold: float = 1e-3
    axes: tuple[SweepAxis, ...] = ()
    workers: int | None = None
    oracle_dt: float = 1e-3
    base_dir: Path = field(default=Path("."), repr=False)

    def initial_state(self) -> State:
        return build_initial_state(self.initial, self.grid, self.base_dir)

    def with_params(self, **changes) -> ExperimentConfig:
        from dataclasses import replace

        return replace(self, params=self.params.replace(**changes))


# -- parsing ---------------------------------------------------------------------


def _path_of(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        m = re.match(r"'([^']+)' is a required property", error.message)
        if m:
            parts.append(m.group(1))
    return ".".join(parts)


def _describe(error: jsonschema.ValidationError) -> str:
    if error.validator == "minimum" and error.validator_value == 0:
        return f"must be nonnegative, got {error.instance!r}"
    return error.message


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    """Validate a JSON document and build an :class:`ExperimentConfig`.

    Raises :class:`ConfigError` carrying the dotted path of the offending field.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        # oneOf failures are vague; prefer the most specific sub-error
        err = errors[0]
        if err.context:
            err = max(err.context, key=lambda e: len(list(e.absolute_path)))
        raise ConfigError(_path_of(err), _describe(err))

    try:
        return _build(doc, Path(base_dir))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("", str(exc)) from exc


def _build(doc: dict, base_dir: Path) -> ExperimentConfig:
    g = doc.get("grid", {})
    dim = g.get("dim", 1)
    lengths = g.get("lengths", [1.0] * dim)
    cells = g.get("cells", [128] if dim == 1 else [64, 64])
    if len(lengths) != dim or len(cells) != dim:
        raise ConfigError("grid", f"lengths and cells must each have {dim} entries")
    grid = Grid(tuple(lengths), tuple(cells))

    p = dict(doc["params"])
    p.setdefault("dim", dim)
    try:
        params = ModelParams(**p)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from exc

    supply = _supply(doc["supply"])

    s = doc.get("solver", {})
    try:
        solver = SolverConfig(**s)
    except ValueError as exc:
        raise ConfigError("solver", str(exc)) from exc

    d = doc.get("diagnostics", {})
    plan = DiagnosticsPlan(
        cadence=d.get("cadence", 0.1),
        snapshot_times=tuple(d.get("snapshot_times", ())),
        lyapunov=d.get("lyapunov", True),
    )

    initial = doc["initial"]
    _check_initial(initial, grid)

    kind = Kind(doc.get("kind", "simulate"))
    axes = tuple(SweepAxis(a["param"], tuple(_axis_values(a, i))) for i, a in enumerate(doc.get("sweep", {}).get("axes", [])))
    if kind is Kind.SWEEP:
        _check_axes(axes)

    return ExperimentConfig(
        kind=kind,
        params=params,
        supply=supply,
        grid=grid,
        initial=initial,
        solver=solver,
        plan=plan,
        output_dir=doc.get("output_dir", "out"),
        threshold=doc.get("threshold", 1e-3),
        axes=axes,
        workers=doc.get("sweep", {}).get("workers"),
        oracle_dt=doc.get("oracle_dt", 1e-3),
        base_dir=base_dir,
    )


def _supply(s: dict) -> SupplyTerm:
    kind = s["type"]
    try:
        if kind == "constant":
            return Constant(s["r"])
        if kind == "exp_decay":
            return ExpDecay(s["K"], s["delta"])
        return Tabulated(tuple(s["times"]), tuple(s["values"]))
    except ValueError as exc:
        raise ConfigError("supply", str(exc)) from exc


def _axis_values(a: dict, i: int) -> list[float]:
    if "values" in a:
        return [float(x) for x in a["values"]]
    start, stop, num = a["start"], a["stop"], a["num"]
    if a.get("scale", "linear") == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(f"sweep.axes.{i}", "log-scale axis needs positive endpoints")
        return [float(x) for x in np.geomspace(start, stop, num)]
    return [float(x) for x in np.linspace(start, stop, num)]


def _check_axes(axes: tuple[SweepAxis, ...]) -> None:
    if not 1 <= len(axes) <= 2:
        raise ConfigError("sweep.axes", "a sweep needs one or two axes")
    for i, axis in enumerate(axes):
        if axis.param not in SWEEPABLE:
            raise ConfigError(f"sweep.axes.{i}.param", f"cannot sweep {axis.param!r}")
        if not 1 <= len(axis.values) <= MAX_AXIS_POINTS:
            raise ConfigError(f"sweep.axes.{i}", f"axis needs 1 to {MAX_AXIS_POINTS} points, got {len(axis.values)}")


def _check_initial(initial: dict, grid: Grid) -> None:
    if initial.get("type") == "file":
        return
    for name in ("u", "v", "w"):
        spec = initial[name]
        if spec["type"] == "constant":
            if spec["value"] <= 0:
                raise ConfigError(f"initial.{name}.value", "initial data must be nonnegative and not identically zero")
        else:
            if spec.get("base", 0.0) == 0 and spec["amplitude"] == 0:
                raise ConfigError(f"initial.{name}", "initial data must be nonnegative and not identically zero")
            center = spec.get("center")
            if center is not None and len(center) != grid.dim:
                raise ConfigError(f"initial.{name}.center", f"center needs {grid.dim} coordinates")


# -- initial data ------------------------------------------------------------------


def field_from_spec(spec: dict, grid: Grid) -> np.ndarray:
    if spec["type"] == "constant":
        return grid.constant(spec["value"])
    coords = grid.centers()
    center = spec.get("center") or [L / 2 for L in grid.lengths]
    r2 = sum((c - c0) ** 2 for c, c0 in zip(coords, center))
    return spec.get("base", 0.0) + spec["amplitude"] * np.exp(-r2 / (2 * spec["width"] ** 2))


def build_initial_state(initial: dict, grid: Grid, base_dir: Path = Path(".")) -> State:
    if initial.get("type") == "file":
        path = Path(initial["path"])
        if not path.is_absolute():
            path = base_dir / path
        state = read_snapshot(path, grid)
        for name in ("u", "v", "w"):
            z = getattr(state, name)
            if np.any(z < 0) or not np.any(z > 0):
                raise ConfigError(f"initial.{name}", "initial data must be nonnegative and not identically zero")
        return state
    return State(0.0, *(field_from_spec(initial[n], grid) for n in ("u", "v", "w")), grid)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    """Echo of the resolved configuration for the summary file."""
    from dataclasses import asdict

    supply = cfg.supply
    if isinstance(supply, Constant):
        s = {"type": "constant", "r": supply.r}
    elif isinstance(supply, ExpDecay):
        s = {"type": "exp_decay", "K": supply.K, "delta": supply.delta}
    else:
        s = {"type": "tabulated", "times": list(supply.times), "values": list(supply.values)}
    solver = {k: v for k, v in asdict(cfg.solver).items() if not (isinstance(v, float) and math.isinf(v))}
    return {
        "kind": cfg.kind.value,
        "params": asdict(cfg.params),
        "supply": s,
        "grid": {"dim": cfg.grid.dim, "lengths": list(cfg.grid.lengths), "cells": list(cfg.grid.cells)},
        "initial": cfg.initial,
        "solver": solver,
        "diagnostics": {"cadence": cfg.plan.cadence, "snapshot_times": list(cfg.plan.snapshot_times)},
        "threshold": cfg.threshold,
        "sweep": {"axes": [{"param": a.param, "values": list(a.values)} for a in cfg.axes]},
    }
