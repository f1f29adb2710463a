"""Reference solutions for spatially homogeneous data.

With ∇ ≡ 0 the system collapses to three ODEs. The u and v equations are
Bernoulli equations with a closed form; the w equation is integrated with
the classical fourth-order Runge-Kutta method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativityViolation, NonFinite
from .model import ModelParams, SupplyTerm


def bernoulli_exact(z0: float, a: float, b: float, p: float, t: float) -> float:
    """Exact solution of z' = a z − b z^p with z(0) = z0.

    y = z^{1−p} solves the linear ODE y' = (p−1)(b − a y).
    """
    if not (z0 > 0 and a > 0 and b > 0 and p > 1 and t >= 0):
        raise ValueError("need z0, a, b > 0, p > 1 and t >= 0")
    ratio = b / a
    y = ratio + (z0 ** (1 - p) - ratio) * math.exp(-(p - 1) * a * t)
    return y ** (1 / (1 - p))


@dataclass(frozen=True)
class HomogeneousTrajectory:
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def at(self, t: float) -> tuple[float, float, float]:
        """Linear interpolation between stored steps."""
        return tuple(float(np.interp(t, self.times, z)) for z in (self.u, self.v, self.w))


def _rhs(params: ModelParams, supply: SupplyTerm, measure: float, t: float, y: np.ndarray) -> np.ndarray:
    u, v, w = y
    # clamp inside the power only: RK stages may dip a hair below zero near u = 0
    return np.array(
        [
            params.a1 * u - params.b1 * max(u, 0.0) ** params.alpha,
            params.a2 * v - params.b2 * max(v, 0.0) ** params.beta,
            -(u + v) * w - params.mu * w + supply.rate(t, measure),
        ]
    )


def homogeneous_solve(
    u0: float,
    v0: float,
    w0: float,
    params: ModelParams,
    supply: SupplyTerm,
    t_end: float,
    dt: float,
    domain_measure: float = 1.0,
) -> HomogeneousTrajectory:
    """RK4 integration of the homogeneous reduction from t = 0 to ``t_end``.

    The last step is shortened to land on ``t_end``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if min(u0, v0, w0) < 0:
        raise ValueError("initial values must be nonnegative")
    n = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    times = np.empty(n + 1)
    out = np.empty((n + 1, 3))
    y = np.array([u0, v0, w0], dtype=float)
    t = 0.0
    times[0], out[0] = t, y

    def f(t, y):
        return _rhs(params, supply, domain_measure, t, y)

    for k in range(1, n + 1):
        h = min(dt, t_end - t) if k == n else dt
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t_end if k == n else k * dt
        if not np.all(np.isfinite(y)):
            raise NonFinite("homogeneous trajectory became non-finite", t=t)
        if y.min() < -1e-12:
            raise NegativityViolation(f"homogeneous trajectory went negative ({y.min():.3e})", t=t)
        times[k], out[k] = t, y
    return HomogeneousTrajectory(times, out[:, 0], out[:, 1], out[:, 2])
