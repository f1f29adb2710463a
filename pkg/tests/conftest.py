from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from forager.grid import Grid, State  # noqa: E402
from forager.model import Constant, ExpDecay, ModelParams  # noqa: E402
from forager.solver import DiagnosticsPlan, SolverConfig, run  # noqa: E402

AC1_PARAMS = ModelParams(chi=0.7, xi=0.7, mu=1.0, a1=1.0, b1=1.0, alpha=2.5, a2=1.0, b2=1.0, beta=2.5)
AC3_PARAMS = AC1_PARAMS.replace(alpha=2.0)
AC4_PARAMS = AC1_PARAMS.replace(chi=0.05)

ACCEPTANCE_LINES: list[str] = []


def bump_state(grid: Grid) -> State:
    coords = grid.centers()
    centers = {"u": 0.3, "v": 0.7, "w": 0.5}

    def g(c):
        return np.exp(-sum((x - c) ** 2 for x in coords) / (2 * 0.1**2))

    return State(0.0, 1.0 + 0.5 * g(centers["u"]), 1.0 + 0.5 * g(centers["v"]), 0.5 + 0.5 * g(centers["w"]), grid)


def homogeneous_state(grid: Grid, u0=2.0, v0=1.5, w0=1.0) -> State:
    return State(0.0, grid.constant(u0), grid.constant(v0), grid.constant(w0), grid)


@dataclass
class StepAudit:
    """Per-step checks computed from the states themselves, not from solver internals."""

    params: ModelParams
    max_defect_u: float = 0.0
    max_defect_v: float = 0.0
    max_sup_w: float = 0.0
    max_mass_u: float = 0.0
    max_mass_v: float = 0.0
    min_value: float = math.inf
    steps: int = 0
    dts: list = field(default_factory=list)

    def start(self, s: State) -> None:
        self._observe(s)

    def _observe(self, s: State) -> None:
        g = s.grid
        self.max_sup_w = max(self.max_sup_w, float(np.max(s.w)))
        self.max_mass_u = max(self.max_mass_u, g.integrate(s.u))
        self.max_mass_v = max(self.max_mass_v, g.integrate(s.v))
        self.min_value = min(self.min_value, float(min(s.u.min(), s.v.min(), s.w.min())))

    def __call__(self, old: State, new: State, rep) -> None:
        g, p, dt = old.grid, self.params, rep.dt_used
        for z0, z1, a, b, q, attr in (
            (old.u, new.u, p.a1, p.b1, p.alpha, "max_defect_u"),
            (old.v, new.v, p.a2, p.b2, p.beta, "max_defect_v"),
        ):
            m0, m1 = g.integrate(z0), g.integrate(z1)
            expected = dt * (a * m0 - b * g.lp_integral(z0, q))
            rel = abs((m1 - m0) - expected) / max(abs(m0), abs(m1))
            setattr(self, attr, max(getattr(self, attr), rel))
        self._observe(new)
        self.steps += 1
        self.dts.append(dt)


@dataclass
class AuditedRun:
    result: object
    audit: StepAudit
    seconds: float


def audited_run(initial, params, supply, cfg, plan) -> AuditedRun:
    audit = StepAudit(params)
    audit.start(initial)
    t0 = time.perf_counter()
    result = run(initial, params, supply, cfg, plan, on_step=audit)
    return AuditedRun(result, audit, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def ac1_run() -> AuditedRun:
    grid = Grid.interval(1.0, 128)
    cfg = SolverConfig(dt_init=5e-4, dt_max=5e-4, t_end=10.0)
    plan = DiagnosticsPlan(cadence=0.05, keep_states=True)
    return audited_run(homogeneous_state(grid), AC1_PARAMS, Constant(1.0), cfg, plan)


@pytest.fixture(scope="session")
def ac2_bump_run() -> AuditedRun:
    grid = Grid.interval(1.0, 128)
    cfg = SolverConfig(dt_init=1e-3, dt_max=1e-3, t_end=10.0)
    return audited_run(bump_state(grid), AC1_PARAMS, Constant(1.0), cfg, DiagnosticsPlan(cadence=0.05))


@pytest.fixture(scope="session")
def ac3_run() -> AuditedRun:
    grid = Grid.interval(1.0, 128)
    cfg = SolverConfig(dt_init=1e-3, dt_max=1e-2, t_end=60.0)
    return audited_run(bump_state(grid), AC3_PARAMS, ExpDecay(1.0, 1.0), cfg, DiagnosticsPlan(cadence=0.05))


@pytest.fixture(scope="session")
def ac4_run() -> AuditedRun:
    grid = Grid.interval(1.0, 128)
    cfg = SolverConfig(dt_init=1e-3, dt_max=1e-2, t_end=60.0)
    return audited_run(bump_state(grid), AC4_PARAMS, Constant(1.0), cfg, DiagnosticsPlan(cadence=0.05))


@pytest.fixture
def acceptance_line():
    def emit(criterion: str, passed: bool, detail: str) -> None:
        line = f"{criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
