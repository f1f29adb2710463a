"""Positivity-preserving IMEX finite-volume time stepping.

One step of size dt does

    z* = z + dt * (upwind taxis divergence + kinetics [+ forcing])
    (I − dt Δ_h) z_new = z*

for each of u, v, w. Taxis fluxes use donor-cell upwinding with face
velocities χ ∂w/∂n (for u) and ξ ∂u/∂n (for v), boundary faces carry no
flux, and Δ_h is the Neumann cell-centred Laplacian (one tridiagonal solve
in 1D, an x-sweep followed by a y-sweep in 2D). The explicit stage is
nonnegative whenever dt times the per-unit outflow plus sink rate stays
below one in every cell, and (I − dt Δ_h)^{-1} is elementwise nonnegative,
so the update never needs clipping. Column sums of (I − dt Δ_h) equal one,
so the discrete mass changes only through the kinetics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from . import diagnostics as diag
from .errors import DtUnderflow, NegativityViolation, NonFinite, SolverError
from .grid import Grid, State
from .model import ModelParams, SupplyTerm, apriori_bounds, steady_states

logger = logging.getLogger(__name__)

NEGATIVITY_TOL = 1e-12
GROWTH_FACTOR = 1.25
GROWTH_AFTER = 5

Forcing = Callable[[Grid, float], tuple]


@dataclass(frozen=True)
class SolverConfig:
    dt_init: float = 1e-3
    dt_max: float = 1e-2
    cfl_safety: float = 0.9
    t_end: float = 60.0
    positivity_floor: float = 0.0
    # Only consulted by iterative 2D solvers; the sweeps used here are direct.
    diffusion_solver_tol: float = 1e-10

    def __post_init__(self):
        if not self.dt_init > 0:
            raise ValueError("dt_init must be positive")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")


@dataclass(frozen=True)
class StepReport:
    dt_used: float
    rejected_count: int
    max_advective_speed: float
    dt_limit: float


# -- spatial operators --------------------------------------------------------


def _along(axis: int, ndim: int, s: slice) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def face_velocities(grid: Grid, potential: np.ndarray, coeff: float) -> list[np.ndarray]:
    """coeff * (central face gradient of ``potential``) on interior faces, per axis."""
    return [coeff * np.diff(potential, axis=k) / h for k, h in enumerate(grid.h)]


def upwind_taxis(grid: Grid, z: np.ndarray, velocities: list[np.ndarray]):
    """Return (−∇·(z a), per-unit outflow rate) for donor-cell fluxes z a.

    Boundary faces carry zero flux.
    """
    nd = z.ndim
    div = np.zeros_like(z)
    outflow = np.zeros_like(z)
    for k, (a, h) in enumerate(zip(velocities, grid.h)):
        a_pos = np.maximum(a, 0.0)
        a_neg = np.minimum(a, 0.0)
        lo = _along(k, nd, slice(None, -1))
        hi = _along(k, nd, slice(1, None))
        flux = a_pos * z[lo] + a_neg * z[hi]
        # flux leaves the lower cell and enters the upper one
        div[lo] -= flux / h
        div[hi] += flux / h
        outflow[lo] += a_pos / h
        outflow[hi] -= a_neg / h
    return div, outflow


def _diffusion_band(n: int, h: float, dt: float) -> np.ndarray:
    k = dt / (h * h)
    ab = np.empty((3, n))
    ab[0, 0] = 0.0
    ab[0, 1:] = -k
    ab[1, :] = 1.0 + 2.0 * k
    ab[1, 0] = ab[1, -1] = 1.0 + k
    ab[2, :-1] = -k
    ab[2, -1] = 0.0
    return ab


def implicit_diffusion(grid: Grid, fields: list[np.ndarray], dt: float) -> list[np.ndarray]:
    """Solve (I − dt Δ_h) z = rhs for each rhs in ``fields`` (unit diffusivity).

    In 2D the operator is factored as (I − dt D_xx)(I − dt D_yy), each factor
    solved directly along its axis.
    """
    stack = np.stack(fields, axis=-1)  # shape grid.shape + (nfields,)
    for k, (n, h) in enumerate(zip(grid.cells, grid.h)):
        moved = np.moveaxis(stack, k, 0)
        shape = moved.shape
        rhs = moved.reshape(n, -1)
        sol = solve_banded((1, 1), _diffusion_band(n, h, dt), rhs, check_finite=False)
        stack = np.moveaxis(sol.reshape(shape), 0, k)
    return [stack[..., i] for i in range(len(fields))]


# -- explicit stage -------------------------------------------------------------


@dataclass
class _Explicit:
    du: np.ndarray
    dv: np.ndarray
    dw: np.ndarray
    rate: float
    speed: float


def _explicit_terms(state: State, params: ModelParams, supply: SupplyTerm, forcing: Optional[Forcing]):
    grid = state.grid
    u, v, w = state.u, state.v, state.w
    vel_u = face_velocities(grid, w, params.chi)
    vel_v = face_velocities(grid, u, params.xi)
    taxis_u, out_u = upwind_taxis(grid, u, vel_u)
    taxis_v, out_v = upwind_taxis(grid, v, vel_v)

    sink_u = params.b1 * u ** (params.alpha - 1.0)
    sink_v = params.b2 * v ** (params.beta - 1.0)
    sink_w = u + v + params.mu
    r = supply.rate(state.t, grid.measure)

    du = taxis_u + params.a1 * u - sink_u * u
    dv = taxis_v + params.a2 * v - sink_v * v
    dw = r - sink_w * w
    if forcing is not None:
        fu, fv, fw = forcing(grid, state.t)
        du, dv, dw = du + fu, dv + fv, dw + fw

    rate = max(float(np.max(out_u + sink_u)), float(np.max(out_v + sink_v)), float(np.max(sink_w)))
    speed = max([float(np.max(np.abs(a), initial=0.0)) for a in vel_u + vel_v])
    return _Explicit(du, dv, dw, rate, speed)


def step(
    state: State,
    params: ModelParams,
    supply: SupplyTerm,
    cfg: SolverConfig,
    dt: float | None = None,
    forcing: Optional[Forcing] = None,
) -> tuple[State, StepReport]:
    """Advance ``state`` by at most ``dt`` (default ``cfg.dt_init``).

    The step size is capped by the positivity limit; a trial that still
    produces a negative or non-finite value is retried with half the step.
    """
    dt_candidate = cfg.dt_init if dt is None else dt
    if not dt_candidate > 0:
        raise ValueError("dt candidate must be positive")
    dt_min = 1e-12 * cfg.dt_init

    ex = _explicit_terms(state, params, supply, forcing)
    if not math.isfinite(ex.rate):
        raise NonFinite("non-finite kinetic or advective rate", t=state.t)
    dt_limit = cfg.cfl_safety / ex.rate if ex.rate > 0 else math.inf
    dt_try = min(dt_candidate, dt_limit)
    if dt_try < dt_min:
        raise DtUnderflow(f"positivity limit forces dt = {dt_try:.3e}", t=state.t)

    rejected = 0
    floor = cfg.positivity_floor - NEGATIVITY_TOL
    while True:
        stars = [state.u + dt_try * ex.du, state.v + dt_try * ex.dv, state.w + dt_try * ex.dw]
        u, v, w = implicit_diffusion(state.grid, stars, dt_try)
        new = State(state.t + dt_try, u, v, w, state.grid)
        if not new.is_finite():
            failure: SolverError = NonFinite("non-finite value produced", t=state.t)
        elif new.min_value() < floor:
            failure = NegativityViolation(f"field value {new.min_value():.3e} below floor", t=state.t)
        else:
            return new, StepReport(dt_try, rejected, ex.speed, dt_limit)
        rejected += 1
        dt_try *= 0.5
        if dt_try < dt_min:
            raise failure
        logger.debug("step rejected at t=%g (%s), retrying with dt=%g", state.t, failure, dt_try)


# -- time integration -----------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsPlan:
    """What to record during :func:`run`.

    ``cadence`` is the spacing of diagnostics records in time; the stepper
    lands exactly on each record and snapshot time.
    """

    cadence: float = 0.1
    snapshot_times: tuple[float, ...] = ()
    keep_states: bool = False
    lyapunov: bool = True


@dataclass
class StepStats:
    """Extremes over every accepted step, initial state included."""

    steps: int = 0
    rejected: int = 0
    min_value: float = math.inf
    max_sup_u: float = 0.0
    max_sup_v: float = 0.0
    max_sup_w: float = 0.0
    max_mass_u: float = 0.0
    max_mass_v: float = 0.0
    max_mass_defect_u: float = 0.0
    max_mass_defect_v: float = 0.0
    min_dt: float = math.inf
    max_dt: float = 0.0

    def observe(self, s: State) -> None:
        g = s.grid
        self.min_value = min(self.min_value, s.min_value())
        self.max_sup_u = max(self.max_sup_u, g.sup_norm(s.u))
        self.max_sup_v = max(self.max_sup_v, g.sup_norm(s.v))
        self.max_sup_w = max(self.max_sup_w, g.sup_norm(s.w))
        self.max_mass_u = max(self.max_mass_u, g.integrate(s.u))
        self.max_mass_v = max(self.max_mass_v, g.integrate(s.v))


@dataclass
class SimulationResult:
    records: list
    final: State
    stats: StepStats
    bounds: object
    steady: object
    Mu: float
    snapshots: dict = field(default_factory=dict)
    states: list = field(default_factory=list)
    # spatial integrals of u^alpha and v^beta at record times
    int_u_alpha: np.ndarray = field(default_factory=lambda: np.empty(0))
    int_v_beta: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records], dtype=float)


def mass_defect(
    before: np.ndarray,
    after: np.ndarray,
    grid: Grid,
    dt: float,
    growth: float,
    damping: float,
    exponent: float,
    forcing_mass: float = 0.0,
) -> float:
    """Relative mismatch of Δ∫z against dt (a∫z − b∫z^p) for one accepted step."""
    m0, m1 = grid.integrate(before), grid.integrate(after)
    gain = dt * growth * m0
    loss = dt * damping * grid.lp_integral(before, exponent)
    defect = abs((m1 - m0) - (gain - loss + dt * forcing_mass))
    scale = max(abs(m0), abs(m1), abs(gain), abs(loss))
    return defect / scale if scale > 0 else defect


def _event_times(t0: float, t_end: float, cadence: float, extra: tuple[float, ...]):
    if not cadence > 0:
        raise ValueError("cadence must be positive")
    n = int(math.floor((t_end - t0) / cadence + 1e-9))
    records = [t0 + k * cadence for k in range(n + 1)]
    if t_end - records[-1] > 1e-12 * max(1.0, t_end):
        records.append(t_end)
    else:
        records[-1] = t_end
    snaps = sorted({float(s) for s in extra if t0 <= s <= t_end})
    events = sorted(set(records) | set(snaps))
    return events, set(records), set(snaps)


def run(
    initial: State,
    params: ModelParams,
    supply: SupplyTerm,
    cfg: SolverConfig,
    plan: DiagnosticsPlan | None = None,
    forcing: Optional[Forcing] = None,
    on_step: Optional[Callable[[State, State, StepReport], None]] = None,
) -> SimulationResult:
    """Integrate from ``initial.t`` to ``cfg.t_end`` recording diagnostics.

    Solver errors propagate with ``err.partial`` set to the result so far.
    """
    plan = plan or DiagnosticsPlan()
    grid = initial.grid
    if initial.min_value() < 0:
        raise NegativityViolation("initial data must be nonnegative", t=initial.t)
    steady = steady_states(params, supply)
    bounds = apriori_bounds(
        params,
        grid.integrate(initial.u),
        grid.integrate(initial.v),
        grid.sup_norm(initial.w),
        grid.measure,
        supply,
    )
    builder = diag.RecordBuilder(params, supply, steady, bounds.M, with_lyapunov=plan.lyapunov)

    events, record_times, snap_times = _event_times(initial.t, cfg.t_end, plan.cadence, plan.snapshot_times)
    stats = StepStats()
    stats.observe(initial)
    pending: list = []
    states: list[State] = []
    snapshots: dict[float, State] = {}
    int_u, int_v = [], []

    def land(s: State) -> None:
        if s.t in record_times:
            pending.append(builder.raw(s))
            int_u.append(grid.lp_integral(s.u, params.alpha))
            int_v.append(grid.lp_integral(s.v, params.beta))
            if plan.keep_states:
                states.append(s.copy())
        if s.t in snap_times:
            snapshots[s.t] = s.copy()

    def result(final: State) -> SimulationResult:
        Mu = max(stats.max_sup_u, 1e-300)
        return SimulationResult(
            records=builder.finalize(pending, Mu),
            final=final,
            stats=stats,
            bounds=bounds,
            steady=steady,
            Mu=Mu,
            snapshots=snapshots,
            states=states,
            int_u_alpha=np.array(int_u),
            int_v_beta=np.array(int_v),
        )

    state = initial
    land(state)
    dt_cand = min(cfg.dt_init, cfg.dt_max)
    streak = 0
    try:
        for target in events[1:]:
            while state.t < target:
                gap = target - state.t
                dt_try = min(dt_cand, gap)
                new, rep = step(state, params, supply, cfg, dt_try, forcing)
                if rep.dt_used == gap or target - new.t <= 1e-12 * max(1.0, abs(target)):
                    new.t = target
                if forcing is None:
                    du = mass_defect(state.u, new.u, grid, rep.dt_used, params.a1, params.b1, params.alpha)
                    dv = mass_defect(state.v, new.v, grid, rep.dt_used, params.a2, params.b2, params.beta)
                    stats.max_mass_defect_u = max(stats.max_mass_defect_u, du)
                    stats.max_mass_defect_v = max(stats.max_mass_defect_v, dv)
                stats.steps += 1
                stats.rejected += rep.rejected_count
                stats.min_dt = min(stats.min_dt, rep.dt_used)
                stats.max_dt = max(stats.max_dt, rep.dt_used)
                stats.observe(new)
                if on_step is not None:
                    on_step(state, new, rep)
                if rep.rejected_count:
                    dt_cand, streak = rep.dt_used, 0
                else:
                    streak += 1
                    if streak >= GROWTH_AFTER:
                        dt_cand, streak = min(GROWTH_FACTOR * dt_cand, cfg.dt_max), 0
                state = new
            land(state)
    except SolverError as err:
        err.partial = result(state)
        raise
    return result(state)
