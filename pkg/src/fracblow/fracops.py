"""Fractional integrals and Caputo derivatives on sampled time histories.

Conventions: the lower terminal is the first grid node, 0 < alpha <= 1, and
the Caputo derivative of a sampled function is the L1 approximation built on
piecewise-linear reconstruction of the samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GAMMA_MAX_ARG = 171.0
UNIFORM_RTOL = 1e-12


class DomainError(ValueError):
    """An argument lies outside the domain of an operator."""


class UnsupportedGridError(ValueError):
    """The operator needs a uniform grid and got something else."""


def check_order(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"fractional order must lie in (0, 1], got {alpha}")
    return alpha


def gamma_fn(x: float) -> float:
    """Euler gamma function on (0, 171)."""
    x = float(x)
    if not (x > 0.0):
        raise DomainError(f"gamma_fn needs x > 0, got {x}")
    if x >= GAMMA_MAX_ARG:
        raise DomainError(f"gamma_fn argument {x} overflows double precision")
    return math.gamma(x)


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray
    uniform: bool = field(init=False)

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise DomainError("a time grid needs at least one node")
        steps = np.diff(nodes)
        if np.any(steps <= 0.0):
            raise DomainError("time grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        uniform = steps.size == 0 or bool(
            np.all(np.abs(steps - steps[0]) <= UNIFORM_RTOL * steps[0])
        )
        object.__setattr__(self, "uniform", uniform)

    @classmethod
    def uniform_grid(cls, horizon: float, n_steps: int, t0: float = 0.0) -> TimeGrid:
        if n_steps < 1 or horizon <= 0.0:
            raise DomainError("uniform grid needs horizon > 0 and n_steps >= 1")
        return cls(t0 + horizon * np.arange(n_steps + 1) / n_steps)

    @property
    def t0(self) -> float:
        return float(self.nodes[0])

    @property
    def dt(self) -> float:
        if not self.uniform:
            raise UnsupportedGridError("grid is not uniform")
        if len(self) < 2:
            raise DomainError("single-node grid has no spacing")
        return float(self.nodes[1] - self.nodes[0])

    def __len__(self) -> int:
        return int(self.nodes.size)


@dataclass(frozen=True)
class CaputoHistory:
    """Samples of f on a time grid; immutable, extended only by `append`."""

    grid: TimeGrid
    samples: np.ndarray
    alpha: float = 1.0

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=float)
        if samples.shape != (len(self.grid),):
            raise DomainError("need exactly one sample per grid node")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "alpha", check_order(self.alpha))

    @classmethod
    def from_function(cls, f, grid: TimeGrid, alpha: float = 1.0) -> CaputoHistory:
        return cls(grid, np.asarray(f(grid.nodes), dtype=float) * np.ones(len(grid)), alpha)

    def append(self, t: float, value: float) -> CaputoHistory:
        nodes = np.append(self.grid.nodes, t)
        return CaputoHistory(TimeGrid(nodes), np.append(self.samples, value), self.alpha)

    def map(self, fn) -> CaputoHistory:
        return CaputoHistory(self.grid, fn(self.samples), self.alpha)

    def __len__(self) -> int:
        return len(self.grid)


def l1_weights(nodes: np.ndarray, n: int, alpha: float) -> np.ndarray:
    """L1 weights w_k, k = 0..n-1, for the Caputo derivative at nodes[n].

    The derivative is approximated by sum_k w_k (f_{k+1} - f_k); the grid may
    be non-uniform. For alpha = 1 every weight but the last vanishes.
    """
    if n < 1:
        raise DomainError("the L1 derivative needs n >= 1 (no history at n = 0)")
    t = np.asarray(nodes[: n + 1], dtype=float)
    p = 1.0 - alpha
    head = t[n] - t[:n]
    tail = t[n] - t[1 : n + 1]
    # 0**0 must count as 0 here: the last interval contributes its full length.
    tail_pow = np.zeros_like(tail)
    pos = tail > 0.0
    tail_pow[pos] = tail[pos] ** p
    return (head**p - tail_pow) / (np.diff(t) * gamma_fn(2.0 - alpha))


def uniform_l1_coefficients(n: int, alpha: float) -> np.ndarray:
    """b_j = (j+1)^(1-alpha) - j^(1-alpha), j = 0..n-1 (b_0 = 1 exactly)."""
    j = np.arange(n, dtype=float)
    b = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    if n:
        b[0] = 1.0
    return b


def caputo_l1(history: CaputoHistory, n: int) -> float:
    """L1 approximation of the Caputo derivative at node n of a uniform grid."""
    if not history.grid.uniform:
        raise UnsupportedGridError("caputo_l1 supports uniform grids only")
    if not (1 <= n < len(history)):
        raise DomainError(f"node index must satisfy 1 <= n < {len(history)}, got {n}")
    alpha = history.alpha
    dt = history.grid.dt
    # weight on increment k is b_{n-1-k}
    b = uniform_l1_coefficients(n, alpha)[::-1]
    incr = np.diff(history.samples[: n + 1])
    return float(np.sum(b * incr) / (gamma_fn(2.0 - alpha) * dt**alpha))


def caputo_l1_series(history: CaputoHistory) -> np.ndarray:
    """caputo_l1 at every node; entry 0 is NaN (no history there)."""
    out = np.full(len(history), np.nan)
    for n in range(1, len(history)):
        out[n] = caputo_l1(history, n)
    return out


def rl_integral(history: CaputoHistory, alpha: float, n: int) -> float:
    """Riemann-Liouville integral of order alpha at node n.

    Product-trapezoid rule: the samples are joined linearly and the kernel
    (t_n - s)^(alpha-1) is integrated exactly against each linear piece.
    """
    alpha = float(alpha)
    if alpha <= 0.0:
        raise DomainError("integration order must be positive")
    if len(history) == 0:
        raise DomainError("empty history")
    if not (0 <= n < len(history)):
        raise DomainError(f"node index {n} out of range")
    if n == 0:
        return 0.0
    t = history.grid.nodes[: n + 1]
    f = history.samples[: n + 1]
    a = t[n] - t[:-1]
    b = t[n] - t[1:]
    h = np.diff(t)
    m0 = (a**alpha - b**alpha) / alpha
    # int_b^a r^(alpha-1) (a - r) dr, i.e. the kernel against (s - t_k)
    m1 = a * m0 - (a ** (alpha + 1.0) - b ** (alpha + 1.0)) / (alpha + 1.0)
    slope = np.diff(f) / h
    return float(np.sum(f[:-1] * m0 + slope * m1) / gamma_fn(alpha))


def caputo_exact(p: float, alpha: float, t):
    """Caputo derivative of t**p (p >= 0) in closed form.

    For 0 < alpha < 1 this equals the Riemann-Liouville derivative of
    t**p - p(0), and for alpha = 1 it is the classical derivative.
    """
    p = float(p)
    alpha = check_order(alpha)
    t = np.asarray(t, dtype=float)
    if p < 0.0:
        raise DomainError("monomial power must be non-negative")
    if np.any(t < 0.0):
        raise DomainError("time must be non-negative")
    if p == 0.0:
        out = np.zeros_like(t)
    else:
        out = math.gamma(p + 1.0) / math.gamma(p + 1.0 - alpha) * t ** (p - alpha)
    return float(out) if out.ndim == 0 else out


def default_tolerance(history: CaputoHistory) -> float:
    """Truncation-aware slack 10 dt^(2-alpha) ||f||^2 for the property checks."""
    scale = float(np.max(np.abs(history.samples))) if len(history) else 0.0
    return 10.0 * history.grid.dt ** (2.0 - history.alpha) * max(scale, 1.0) ** 2


def is_monotone(samples: np.ndarray) -> bool:
    d = np.diff(samples)
    return bool(np.all(d >= 0.0) or np.all(d <= 0.0))


@dataclass(frozen=True)
class ConvexityCheck:
    margins: np.ndarray
    tol: float
    passed: bool


def check_convexity_inequality(history: CaputoHistory, tol: float | None = None) -> ConvexityCheck:
    """Margins 2 f D^a f - D^a(f^2) at nodes 1..N for monotone samples."""
    if len(history) < 2:
        raise DomainError("need at least two nodes")
    if not is_monotone(history.samples):
        raise DomainError("convexity inequality needs monotone samples")
    tol = default_tolerance(history) if tol is None else tol
    sq = history.map(np.square)
    f = history.samples
    margins = np.array(
        [2.0 * f[n] * caputo_l1(history, n) - caputo_l1(sq, n) for n in range(1, len(history))]
    )
    return ConvexityCheck(margins, tol, bool(np.all(margins >= -tol)))


@dataclass(frozen=True)
class ExtremumCheck:
    t_max: float | None
    value_at_max: float | None
    t_min: float | None
    value_at_min: float | None
    tol: float
    verdict: str  # "pass" | "fail" | "not-applicable"


def check_extremum_property(history: CaputoHistory, tol: float | None = None) -> ExtremumCheck:
    """Sign of the Caputo derivative at the sampled maximum and minimum.

    A side whose extremum over [t0, T] is attained only at t0 is skipped; when
    both sides are skipped the verdict is "not-applicable".
    """
    if len(history) < 2:
        raise DomainError("need at least two nodes")
    tol = default_tolerance(history) if tol is None else tol
    f = history.samples
    t = history.grid.nodes
    inner = f[1:]

    t_max = v_max = t_min = v_min = None
    ok = True
    if inner.max() >= f[0]:
        n = 1 + int(np.argmax(inner))
        t_max, v_max = float(t[n]), caputo_l1(history, n)
        ok &= v_max >= -tol
    if inner.min() <= f[0]:
        n = 1 + int(np.argmin(inner))
        t_min, v_min = float(t[n]), caputo_l1(history, n)
        ok &= v_min <= tol
    if t_max is None and t_min is None:
        verdict = "not-applicable"
    else:
        verdict = "pass" if ok else "fail"
    return ExtremumCheck(t_max, v_max, t_min, v_min, tol, verdict)
