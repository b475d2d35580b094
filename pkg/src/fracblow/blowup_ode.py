"""The fractional Riccati comparison problem D^a u = u^2, u(0) = u0 > 0.

`tstar_window` gives the closed-form bracket on its blow-up time and
`solve_comparison_ode` integrates it with an implicit L1 scheme that halves
the step whenever the solution grows by more than 10% in one step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .fracops import CaputoHistory, DomainError, TimeGrid, check_order, gamma_fn, l1_weights

log = logging.getLogger(__name__)

THRESHOLD_ESCAPE = "threshold-escape"
STEP_COLLAPSE = "step-collapse"
HORIZON_REACHED = "horizon-reached"

MIN_STEP = 1e-14
MAX_INCREMENT = 0.1
NEWTON_MAXITER = 50


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class TstarWindow:
    lower: float
    upper: float
    alpha: float
    u0: float

    def contains(self, t: float, rel: float = 0.0) -> bool:
        return self.lower * (1.0 - rel) <= t <= self.upper * (1.0 + rel)

    def as_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "alpha": self.alpha, "u0": self.u0}


def tstar_window(alpha: float, u0: float) -> TstarWindow:
    alpha = check_order(alpha)
    u0 = float(u0)
    if not (u0 > 0.0):
        raise DomainError(f"blow-up window needs u0 > 0, got {u0}")
    g = gamma_fn(alpha + 1.0)
    inv = 1.0 / alpha
    return TstarWindow((g / (4.0 * u0)) ** inv, (g / u0) ** inv, alpha, u0)


@dataclass(frozen=True)
class OdeTrajectory:
    history: CaputoHistory
    detected_tstar: float | None
    detection_reason: str
    window: TstarWindow
    rejected_steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.history.grid.nodes

    @property
    def values(self) -> np.ndarray:
        return self.history.samples


def _newton_root(A: float, M: float, disc: float) -> float:
    """Smaller root of u^2 - A u - M = 0, Newton-polished from the stable closed form."""
    u = -2.0 * M / (A + np.sqrt(disc))
    for _ in range(NEWTON_MAXITER):
        g = u * u - A * u - M
        dg = 2.0 * u - A
        if dg == 0.0:
            break
        step = g / dg
        u -= step
        if abs(step) <= 1e-15 * max(abs(u), 1.0):
            return u
    raise SolverError(f"Newton failed to converge (A={A:.3e}, M={M:.3e})")


def solve_comparison_ode(
    alpha: float,
    u0: float,
    threshold: float | None = None,
    dt0: float | None = None,
    horizon: float | None = None,
    max_steps: int = 200_000,
) -> OdeTrajectory:
    """Integrate D^a u = u^2 until u exceeds `threshold`, dt collapses, or t passes `horizon`.

    Each step solves w_last (u_n - u_{n-1}) + memory = u_n^2 for the root that
    continues from u_{n-1}, which is the smaller root of the per-step quadratic. A step
    is rejected and dt halved when the quadratic has no real root or the
    relative increment exceeds 10%.
    """
    alpha = check_order(alpha)
    window = tstar_window(alpha, u0)
    threshold = 1e6 * u0 if threshold is None else float(threshold)
    if threshold < 100.0 * u0:
        raise DomainError("threshold must be at least 100 * u0")
    horizon = 10.0 * window.upper if horizon is None else float(horizon)
    dt = min(window.upper, horizon) * 1e-3 if dt0 is None else float(dt0)
    if dt <= 0.0:
        raise DomainError("dt0 must be positive")

    t = [0.0]
    u = [float(u0)]
    incr: list[float] = []
    reason = HORIZON_REACHED
    tstar = None
    rejected = 0
    g2a = gamma_fn(2.0 - alpha)

    while True:
        if len(t) > max_steps:
            raise SolverError(f"exceeded {max_steps} steps before a decision")
        if t[-1] >= horizon:
            break
        if dt < MIN_STEP:
            reason, tstar = STEP_COLLAPSE, t[-1]
            break
        t_new = t[-1] + dt
        nodes = np.append(np.asarray(t), t_new)
        n = len(t)
        w_last = dt ** (-alpha) / g2a
        if n > 1:
            w = l1_weights(nodes, n, alpha)
            memory = float(np.dot(w[:-1], incr))
        else:
            memory = 0.0
        u_prev = u[-1]
        M = memory - w_last * u_prev
        disc = w_last * w_last + 4.0 * M
        if disc < 0.0:
            dt *= 0.5
            rejected += 1
            continue
        u_new = _newton_root(w_last, M, disc)
        if (u_new - u_prev) > MAX_INCREMENT * abs(u_prev):
            dt *= 0.5
            rejected += 1
            continue
        t.append(t_new)
        u.append(u_new)
        incr.append(u_new - u_prev)
        if u_new > threshold:
            reason, tstar = THRESHOLD_ESCAPE, t_new
            break

    log.debug("alpha=%g u0=%g: %s at %s after %d steps", alpha, u0, reason, tstar, len(t))
    history = CaputoHistory(TimeGrid(np.asarray(t)), np.asarray(u), alpha)
    return OdeTrajectory(history, tstar, reason, window, rejected)
