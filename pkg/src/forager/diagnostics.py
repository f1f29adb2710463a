"""Monitored quantities: masses, norms, entropy functionals and decay fits."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import EntropyDomain, InsufficientData
from .grid import State
from .model import ModelParams, SteadyStates, SupplyTerm, positive_constant_rate, stability_regime_check

ENTROPY_FLOOR = 1e-14


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_u: float
    mass_v: float
    sup_u: float
    sup_v: float
    sup_w: float
    dist_u: float
    dist_v: float
    dist_w: float
    lyap_E: float
    lyap_F: float
    # nan unless the supply is a positive constant
    lyap_E1: float = math.nan
    lyap_F1: float = math.nan

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        return [repr(float(x)) for x in astuple(self)]


# -- entropy pieces -----------------------------------------------------------


def _entropy(grid, z: np.ndarray, zbar: float) -> float:
    """∫ (z − z̄ − z̄ ln(z/z̄)), nonnegative for z > 0."""
    return grid.integrate(z - zbar - zbar * np.log(z / zbar))


class EntropyParts(NamedTuple):
    """Weight-free integrals from which E, F, E1, F1 are assembled."""

    Hu: float
    Hv: float
    Hw: float  # nan without wbar
    Qu: float
    Qv: float
    Qw: float  # ∫(w − w̄)², nan without wbar
    W2: float  # ∫ w²


def entropy_parts(state: State, steady: SteadyStates, need_w: bool = False) -> EntropyParts:
    u, v, w, grid = state.u, state.v, state.w, state.grid
    if u.min() <= ENTROPY_FLOOR or v.min() <= ENTROPY_FLOOR:
        raise EntropyDomain("u and v must exceed the entropy floor in every cell")
    Hu = _entropy(grid, u, steady.ubar)
    Hv = _entropy(grid, v, steady.vbar)
    Qu = grid.integrate((u - steady.ubar) ** 2)
    Qv = grid.integrate((v - steady.vbar) ** 2)
    W2 = grid.integrate(w**2)
    Hw = Qw = math.nan
    if steady.wbar is not None:
        Qw = grid.integrate((w - steady.wbar) ** 2)
        if w.min() > ENTROPY_FLOOR:
            Hw = _entropy(grid, w, steady.wbar)
        elif need_w:
            raise EntropyDomain("w must exceed the entropy floor in every cell")
    return EntropyParts(Hu, Hv, Hw, Qu, Qv, Qw, W2)


def _v_weight(params: ModelParams, steady: SteadyStates, Mu: float) -> float:
    if params.xi == 0:
        return math.nan
    return steady.ubar / (params.xi**2 * steady.vbar * Mu**2)


def assemble_E_F(parts: EntropyParts, params: ModelParams, steady: SteadyStates, Mu: float) -> tuple[float, float]:
    ub, vb = steady.ubar, steady.vbar
    chi2 = params.chi**2
    E = parts.Hu + _v_weight(params, steady, Mu) * parts.Hv + chi2 * ub / 4 * parts.W2
    if params.xi == 0:
        F = math.nan
    else:
        v_coef = params.b2 * ub * vb ** (params.beta - 3) / (params.xi**2 * Mu**2)
        F = params.b1 * ub ** (params.alpha - 2) * parts.Qu + v_coef * parts.Qv + chi2 * ub * params.mu / 2 * parts.W2
    return E, F


class Lyapunov1(NamedTuple):
    E1: float
    F1: float
    regime_violated: bool


def assemble_E1_F1(
    parts: EntropyParts, params: ModelParams, steady: SteadyStates, Mu: float, M: float, r: float
) -> Lyapunov1:
    if steady.wbar is None:
        raise ValueError("E1/F1 need a positive constant supply")
    ub, wb = steady.ubar, steady.wbar
    chi2 = params.chi**2
    E1 = parts.Hu + _v_weight(params, steady, Mu) * parts.Hv + chi2 * ub * M**2 / (2 * wb) * parts.Hw
    margins = stability_regime_check(params, r, M, Mu)
    F1 = margins.L1 * parts.Qu + margins.L2 * parts.Qv + r * chi2 * ub * M / (4 * wb**2) * parts.Qw
    if params.xi == 0:
        F1 = math.nan
    return Lyapunov1(E1, F1, not margins.regime_holds)


def lyapunov_E_F(state: State, params: ModelParams, steady: SteadyStates, Mu: float, M: float) -> tuple[float, float]:
    """Entropy functional E and its dissipation F relative to (ū, v̄, 0).

    Along exact solutions E' ≤ −F + (χ²ūM/2)∫r. ``M`` does not enter E or F
    and is accepted for symmetry with :func:`lyapunov_E1_F1`.
    """
    if not Mu > 0:
        raise ValueError("Mu must be positive")
    if params.xi == 0:
        raise ValueError("the v weight needs xi > 0")
    return assemble_E_F(entropy_parts(state, steady), params, steady, Mu)


def lyapunov_E1_F1(
    state: State, params: ModelParams, steady: SteadyStates, Mu: float, M: float, r: float
) -> Lyapunov1:
    """Entropy functional E1 and dissipation F1 relative to (ū, v̄, w̄).

    F1 is only guaranteed nonnegative when both regime margins are positive;
    otherwise ``regime_violated`` is set and F1 is reported as computed.
    """
    if not Mu > 0:
        raise ValueError("Mu must be positive")
    if params.xi == 0:
        raise ValueError("the v weight needs xi > 0")
    if steady.wbar is None:
        raise ValueError("E1/F1 need a positive constant supply")
    parts = entropy_parts(state, steady, need_w=True)
    return assemble_E1_F1(parts, params, steady, Mu, M, r)


# -- per-record bookkeeping -----------------------------------------------------


class RecordBuilder:
    """Collects Mu-independent pieces during a run and assembles records at the end.

    Deferring the Lyapunov weights lets every record use the same Mu, the
    largest sup norm of u seen over the whole run.
    """

    def __init__(self, params: ModelParams, supply: SupplyTerm, steady: SteadyStates, M: float, with_lyapunov=True):
        self.params = params
        self.steady = steady
        self.M = M
        self.r = positive_constant_rate(supply)
        self.w_target = steady.wbar if steady.wbar is not None else 0.0
        self.with_lyapunov = with_lyapunov

    def raw(self, s: State) -> tuple:
        g, st = s.grid, self.steady
        base = (
            s.t,
            g.integrate(s.u),
            g.integrate(s.v),
            g.sup_norm(s.u),
            g.sup_norm(s.v),
            g.sup_norm(s.w),
            g.sup_norm(s.u - st.ubar),
            g.sup_norm(s.v - st.vbar),
            g.sup_norm(s.w - self.w_target),
        )
        parts = None
        if self.with_lyapunov:
            try:
                parts = entropy_parts(s, st)
            except EntropyDomain:
                parts = None
        return base, parts

    def finalize(self, raws: Sequence[tuple], Mu: float) -> list[DiagnosticsRecord]:
        out = []
        for base, parts in raws:
            E = F = E1 = F1 = math.nan
            if parts is not None:
                E, F = assemble_E_F(parts, self.params, self.steady, Mu)
                if self.r is not None:
                    E1, F1, _ = assemble_E1_F1(parts, self.params, self.steady, Mu, self.M, self.r)
            out.append(DiagnosticsRecord(*base, E, F, E1, F1))
        return out


# -- window integrals -------------------------------------------------------------


@dataclass(frozen=True)
class WindowIntegral:
    p: float
    tau: float
    starts: np.ndarray
    values: np.ndarray


def default_tau(t_end: float) -> float:
    return min(1.0, t_end / 2)


def window_integrals_from_series(times, space_integrals, tau: float, p: float = 1.0) -> WindowIntegral:
    """∫_t^{t+τ} g for every sample time t with t + τ inside the series.

    ``space_integrals`` holds g(t_k) = ∫_Ω f^p at ``times``; the time
    integral is trapezoidal, with linear interpolation of the running
    integral when t + τ falls between samples.
    """
    t = np.asarray(times, dtype=float)
    g = np.asarray(space_integrals, dtype=float)
    if t.ndim != 1 or t.shape != g.shape or t.size < 2:
        raise ValueError("need matching 1D series with at least two samples")
    if not tau > 0:
        raise ValueError("tau must be positive")
    slack = 1e-9 * max(1.0, abs(t[-1]))
    if t[0] + tau > t[-1] + slack:
        raise ValueError(f"window of length {tau} exceeds the series range [{t[0]}, {t[-1]}]")
    running = cumulative_trapezoid(g, t, initial=0.0)
    mask = t + tau <= t[-1] + slack
    starts = t[mask]
    ends = np.minimum(starts + tau, t[-1])
    values = np.interp(ends, t, running) - running[mask]
    return WindowIntegral(p, tau, starts, values)


def window_integrals(states: Sequence[State], p: float, tau: float, component: str = "u") -> WindowIntegral:
    times = [s.t for s in states]
    vals = [s.grid.lp_integral(getattr(s, component), p) for s in states]
    return window_integrals_from_series(times, vals, tau, p)


# -- decay-rate fit -----------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    lam: float
    c0: float
    window: tuple[float, float]
    r2: float


def fit_decay_rate(times, d, window: tuple[float, float] | None = None, min_samples: int = 8) -> RateFit:
    """Least-squares fit of ln d ≈ ln c0 − λ t.

    Without an explicit ``window`` the fit uses the later half of the
    samples with d > 1e-12, where transients have died out.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(d, dtype=float)
    if window is None:
        keep = np.flatnonzero(y > 1e-12)
        keep = keep[len(keep) // 2 :]
    else:
        lo, hi = window
        keep = np.flatnonzero((t >= lo) & (t <= hi) & (y > 1e-13))
    if keep.size < min_samples:
        raise InsufficientData(f"need at least {min_samples} positive samples, got {keep.size}")
    ts, logs = t[keep], np.log(y[keep])
    slope, intercept = np.polyfit(ts, logs, 1)
    resid = logs - (slope * ts + intercept)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    # a constant log series is fitted exactly by a flat line
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(-float(slope), float(math.exp(intercept)), (float(ts[0]), float(ts[-1])), r2)
