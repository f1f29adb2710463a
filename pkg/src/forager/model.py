"""Model coefficients, nutrient supply, steady states and closed-form bounds.

Everything here is a pure function of its inputs. The forager-exploiter
system being modelled is

    u_t = Δu − χ∇·(u∇w) + a1 u − b1 u^α
    v_t = Δv − ξ∇·(v∇u) + a2 v − b2 v^β
    w_t = Δw − (u + v) w − μ w + r(x, t)

with homogeneous Neumann conditions on all three fields.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    chi: float
    xi: float
    mu: float
    a1: float
    b1: float
    alpha: float
    a2: float
    b2: float
    beta: float
    dim: int = 1

    def __post_init__(self):
        for name in ("mu", "a1", "b1", "a2", "b2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        # chi = xi = 0 is admitted as the taxis-free limit.
        for name in ("chi", "xi"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be nonnegative, got {value!r}")
        if not (self.alpha > 1 and self.beta > 1):
            raise ValueError("damping exponents alpha and beta must exceed 1")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")

    def replace(self, **changes) -> ModelParams:
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ModelParams(**fields)


# -- nutrient supply ---------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ValueError(f"constant supply must be nonnegative, got {self.r!r}")

    def rate(self, t: float, domain_measure: float) -> float:
        return self.r

    def r_star(self, domain_measure: float) -> float:
        return self.r

    def integral(self, t0: float, t1: float, domain_measure: float) -> float:
        """Exact ∫_{t0}^{t1} ∫_Ω r."""
        return self.r * domain_measure * (t1 - t0)


@dataclass(frozen=True)
class ExpDecay:
    """Spatially uniform supply with ∫_Ω r(·, t) = K e^{−δt}."""

    K: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.K) and self.K >= 0):
            raise ValueError(f"K must be nonnegative, got {self.K!r}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be positive, got {self.delta!r}")

    def rate(self, t: float, domain_measure: float) -> float:
        return self.K / domain_measure * math.exp(-self.delta * t)

    def r_star(self, domain_measure: float) -> float:
        return self.K / domain_measure

    def integral(self, t0: float, t1: float, domain_measure: float) -> float:
        return self.K / self.delta * (math.exp(-self.delta * t0) - math.exp(-self.delta * t1))


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear supply in time, held flat outside the table."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) == 0 or len(times) != len(values):
            raise ValueError("tabulated supply needs equally many times and values (at least one)")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("tabulated supply times must be strictly ascending")
        if any(not (math.isfinite(v) and v >= 0) for v in values):
            raise ValueError("tabulated supply values must be nonnegative")

    def rate(self, t: float, domain_measure: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def r_star(self, domain_measure: float) -> float:
        return max(self.values)

    def integral(self, t0: float, t1: float, domain_measure: float) -> float:
        # piecewise linear integrand: the trapezoid rule over its breakpoints is exact
        inner = [t for t in self.times if t0 < t < t1]
        ts = np.array([t0, *inner, t1])
        vals = np.interp(ts, self.times, self.values)
        return float(domain_measure * np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts)))


SupplyTerm = Union[Constant, ExpDecay, Tabulated]


def positive_constant_rate(supply: SupplyTerm) -> float | None:
    """The value of r when the supply is a positive constant, else None."""
    if isinstance(supply, Constant) and supply.r > 0:
        return supply.r
    return None


# -- steady states and a-priori bounds ----------------------------------------


@dataclass(frozen=True)
class SteadyStates:
    ubar: float
    vbar: float
    wbar: float | None = None


def steady_states(params: ModelParams, supply: SupplyTerm) -> SteadyStates:
    """Spatially homogeneous equilibrium of the kinetics.

    ``wbar`` is only defined for a positive constant supply.
    """
    ubar = (params.a1 / params.b1) ** (1.0 / (params.alpha - 1.0))
    vbar = (params.a2 / params.b2) ** (1.0 / (params.beta - 1.0))
    r = positive_constant_rate(supply)
    wbar = None if r is None else r / (ubar + vbar + params.mu)
    return SteadyStates(ubar, vbar, wbar)


@dataclass(frozen=True)
class AprioriBounds:
    M: float
    M1: float
    M2: float


def apriori_bounds(
    params: ModelParams,
    u0_mass: float,
    v0_mass: float,
    w0_sup: float,
    domain_measure: float,
    supply: SupplyTerm,
) -> AprioriBounds:
    """Sup bound for w and mass bounds for u and v, valid for all time."""
    if domain_measure <= 0:
        raise ValueError("domain_measure must be positive")
    if min(u0_mass, v0_mass, w0_sup) < 0:
        raise ValueError("initial masses and sup norm must be nonnegative")
    steady = steady_states(params, supply)
    M = w0_sup + supply.r_star(domain_measure) / params.mu
    M1 = u0_mass + domain_measure * steady.ubar
    M2 = v0_mass + domain_measure * steady.vbar
    return AprioriBounds(M, M1, M2)


# -- theory applicability ----------------------------------------------------


class Regime(enum.Enum):
    GLOBAL_HIGH_DIM = "GlobalHighDim"
    GLOBAL_TWO_DIM = "GlobalTwoDim"
    OUTSIDE_THEORY = "OutsideTheory"


@dataclass(frozen=True)
class TheoryVerdict:
    regime: Regime
    reason: str

    @property
    def exploratory(self) -> bool:
        return self.regime is Regime.OUTSIDE_THEORY


def check_theory_conditions(params: ModelParams) -> TheoryVerdict:
    """Classify the damping exponents against the global existence results."""
    n, alpha, beta = params.dim, params.alpha, params.beta
    if n > 2:
        threshold = n / 2 + 1
        failed = []
        if not alpha > threshold:
            failed.append(f"alpha must exceed N/2+1 = {threshold:g}")
        if not beta > threshold:
            failed.append(f"beta must exceed N/2+1 = {threshold:g}")
        if not failed:
            return TheoryVerdict(Regime.GLOBAL_HIGH_DIM, f"alpha, beta > {threshold:g} with N = {n}")
        return TheoryVerdict(Regime.OUTSIDE_THEORY, "; ".join(failed))
    if n == 2:
        failed = []
        if not alpha >= 2:
            failed.append("alpha must be at least 2")
        if not beta > 2:
            failed.append("beta must exceed 2")
        if not failed:
            return TheoryVerdict(Regime.GLOBAL_TWO_DIM, "N = 2 with alpha >= 2 and beta > 2")
        return TheoryVerdict(Regime.OUTSIDE_THEORY, "; ".join(failed))
    return TheoryVerdict(Regime.OUTSIDE_THEORY, f"N = {n} is not covered (results need N >= 2)")


@dataclass(frozen=True)
class RegimeReport:
    L1: float
    L2: float

    @property
    def regime_holds(self) -> bool:
        return self.L1 > 0 and self.L2 > 0


def stability_regime_check(params: ModelParams, r: float, M: float, Mu: float) -> RegimeReport:
    """Margins of the two coefficient inequalities behind convergence to (ū, v̄, w̄).

    ``Mu`` is any upper bound for sup |u|; in practice the caller passes the
    largest sup norm observed in a simulation.
    """
    if not r > 0:
        raise ValueError(f"r must be positive for wbar to exist, got {r!r}")
    if not (M > 0 and Mu > 0):
        raise ValueError("M and Mu must be positive")
    s = steady_states(params, Constant(r))
    taxis_cost = params.chi**2 * s.ubar * M**3 / (2 * r)
    L1 = params.b1 * s.ubar ** (params.alpha - 2) - taxis_cost
    if params.xi == 0:
        L2 = math.inf
    else:
        L2 = params.b2 * s.ubar * s.vbar ** (params.beta - 3) / (params.xi**2 * Mu**2) - taxis_cost
    return RegimeReport(L1, L2)
