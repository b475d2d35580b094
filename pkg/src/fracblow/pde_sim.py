"""Method-of-lines simulators for the time-fractional Rosenau-KdV-BBM-Burgers family.

Space: second-order centred differences on x_i = i h, i = 0..m+1, with
boundary data folded in through ghost values. Time: L1 Caputo stepping on
the operator P u = u - a u_xx + b u_xxxx, with the advection u u_x and any
quadratic Robin flux linearised about the previous Picard iterate.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.linalg import solve_banded

from .blowup_ode import TstarWindow
from .capacity import CapacityCertificate, GradientShift, InitialData, fd_derivative, shifted_field_offset
from .fracops import TimeGrid, check_order, l1_weights
from .testfn import Family, FamilySpec, TestFunction, family_forms

log = logging.getLogger(__name__)

SUP_ESCAPE = "sup-norm-escape"
F_ESCAPE = "F-escape"
SOLVER_DIVERGENCE = "solver-divergence"
HORIZON_REACHED = "horizon-reached"

ESCAPE_FACTOR = 1e6
PICARD_RTOL = 1e-8
PICARD_MAXITER = 25
MAX_INCREMENT = 0.1
MIN_DT_FRACTION = 1e-12
BAND = 3


class MemoryBudgetExceeded(RuntimeError):
    pass


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialGrid:
    L: float
    m: int

    def __post_init__(self) -> None:
        if not (self.L > 0.0):
            raise ValueError("L must be positive")
        if self.m < 8:
            raise ValueError("need at least 8 interior points")

    @property
    def h(self) -> float:
        return self.L / (self.m + 1)

    @property
    def n(self) -> int:
        return self.m + 2

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n)


# -- boundary conditions -----------------------------------------------------


@dataclass(frozen=True)
class Dirichlet:
    value: float = 0.0


@dataclass(frozen=True)
class Neumann:
    """u_x = value."""

    value: float = 0.0


@dataclass(frozen=True)
class SecondDerivative:
    """u_xx = value."""

    value: float = 0.0


@dataclass(frozen=True)
class Robin:
    """scale * (outward derivative) = kappa u + quadratic u^2."""

    kappa: float = 0.0
    quadratic: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.scale == 0.0:
            raise ValueError("Robin scale must be nonzero")


@dataclass(frozen=True)
class BoundarySet:
    left: tuple = (Dirichlet(0.0),)
    right: tuple = (Dirichlet(0.0),)

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))

    @classmethod
    def dirichlet(cls, left: float = 0.0, right: float = 0.0) -> BoundarySet:
        return cls((Dirichlet(left),), (Dirichlet(right),))

    @classmethod
    def clamped(cls) -> BoundarySet:
        return cls((Dirichlet(0.0), Neumann(0.0)), (Dirichlet(0.0), Neumann(0.0)))

    def dirichlet_value(self, side: str) -> float | None:
        for c in getattr(self, side):
            if isinstance(c, Dirichlet):
                return c.value
        return None


def _validate_end(conds: tuple, high_order: bool, side: str) -> None:
    kinds = [type(c) for c in conds]
    if len(set(kinds)) != len(kinds):
        raise BoundaryError(f"{side}: repeated condition type")
    if high_order:
        ok = len(conds) == 2 and Dirichlet in kinds and (Neumann in kinds or SecondDerivative in kinds)
        if not ok:
            raise BoundaryError(f"{side}: third/fourth-order terms need Dirichlet plus one of Neumann/SecondDerivative")
    elif len(conds) != 1:
        raise BoundaryError(f"{side}: second-order problems take exactly one condition per end")


class _Discretisation:
    """Node-space operators for D^a(P u) + S u + N(u) = 0 with boundary data folded in.

    "nonconservative": centred differences, N = u D1 u, ghost values from the
    Dirichlet/Neumann/SecondDerivative data. "conservative" (a = b = c = 0 only):
    N = D1(u^2 / 2) and half-cell flux balances at non-Dirichlet ends, so a
    weighted sum of the nodal equations telescopes exactly.
    """

    def __init__(self, spec: FamilySpec, grid: SpatialGrid, bc: BoundarySet, drift: float, advection: str):
        self.spec, self.grid, self.bc, self.drift = spec, grid, bc, drift
        self.n, self.h = grid.n, grid.h
        n = self.n
        self.dir_rows = {}
        if (v := bc.dirichlet_value("left")) is not None:
            self.dir_rows[0] = v
        if (v := bc.dirichlet_value("right")) is not None:
            self.dir_rows[n - 1] = v
        self.free = np.ones(n)
        self.dir_vals = np.zeros(n)
        for i, v in self.dir_rows.items():
            self.free[i] = 0.0
            self.dir_vals[i] = v
        keep = sp.diags(self.free)
        if advection == "conservative":
            MP, cP, MS, cS, Q, cQ = self._flux_form()
            self.row_scaled = False
        elif advection == "nonconservative":
            MP, cP, MS, cS, Q, cQ = self._ghost_form()
            self.row_scaled = True
        else:
            raise ValueError(f"unknown advection form {advection!r}")
        self.MP, self.MS, self.Q = ((keep @ M).tocsr() for M in (MP, MS, Q))
        self.cP, self.cS, self.cQ = (self.free * c for c in (cP, cS, cQ))
        # LAPACK banded storage: ab[BAND + i - j, j] = A[i, j]
        self.abP, self.abS, self.abQ = (self._banded(M) for M in (self.MP, self.MS, self.Q))
        k = np.arange(2 * BAND + 1)[:, None]
        self.row_of = np.clip(np.arange(n)[None, :] + k - BAND, 0, n - 1)

    def _ghost_form(self):
        spec, bc, n, h = self.spec, self.bc, self.n, self.h
        high = spec.b != 0.0 or spec.c != 0.0
        for side in ("left", "right"):
            conds = getattr(bc, side)
            _validate_end(conds, high, side)
            if any(isinstance(c, Robin) for c in conds):
                raise BoundaryError("Robin data needs the conservative advection form")
        N, ne = n - 1, n + 4
        # extended index j = i + 2 for i in -2..n+1
        E = sp.lil_matrix((ne, n))
        e0 = np.zeros(ne)
        for i in range(n):
            E[i + 2, i] = 1.0
        for side, conds in (("left", bc.left), ("right", bc.right)):
            edge, inner, ghost = (0, 1, 1) if side == "left" else (N, N - 1, n + 2)
            for c in conds:
                if isinstance(c, Neumann):
                    # u_x = q: left ghost u_1 - 2hq, right ghost u_{N-1} + 2hq
                    E[ghost, inner] = 1.0
                    e0[ghost] = (-2.0 if side == "left" else 2.0) * h * c.value
                elif isinstance(c, SecondDerivative):
                    E[ghost, edge] = 2.0
                    E[ghost, inner] = -1.0
                    e0[ghost] = h * h * c.value
        E = E.tocsr()
        D1, D2, D3, D4 = (sp.lil_matrix((n, ne)) for _ in range(4))
        for i in range(n):
            j = i + 2
            D1[i, j - 1], D1[i, j + 1] = -0.5 / h, 0.5 / h
            D2[i, j - 1], D2[i, j], D2[i, j + 1] = 1 / h**2, -2 / h**2, 1 / h**2
            if high:
                for off, w in ((-2, -1.0), (-1, 2.0), (1, -2.0), (2, 1.0)):
                    D3[i, j + off] = w / (2 * h**3)
                for off, w in ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)):
                    D4[i, j + off] = w / h**4
        a, b, c, d = spec.a, spec.b, spec.c, spec.d
        I = sp.eye(n, ne, k=2, format="csr")
        P_ext = (I - a * D2 + b * D4).tocsr()
        S_ext = (c * D3 - d * D2 + self.drift * D1).tocsr()
        D1 = D1.tocsr()
        return P_ext @ E, P_ext @ e0, S_ext @ E, S_ext @ e0, D1 @ E, D1 @ e0

    def _flux_form(self):
        spec, bc, n, h, drift = self.spec, self.bc, self.n, self.h, self.drift
        if spec.a or spec.b or spec.c:
            raise BoundaryError("the conservative form needs a = b = c = 0")
        d = spec.d
        MS = sp.lil_matrix((n, n))
        Q = sp.lil_matrix((n, n))
        cS = np.zeros(n)
        for i in range(1, n - 1):
            MS[i, i - 1] = -d / h**2 - 0.5 * drift / h
            MS[i, i] = 2 * d / h**2
            MS[i, i + 1] = -d / h**2 + 0.5 * drift / h
            Q[i, i - 1], Q[i, i + 1] = -0.25 / h, 0.25 / h
        for side, conds in (("left", bc.left), ("right", bc.right)):
            if len(conds) != 1 or isinstance(conds[0], SecondDerivative):
                raise BoundaryError(f"{side}: the conservative form takes one Dirichlet, Neumann or Robin condition")
            cnd = conds[0]
            if isinstance(cnd, Dirichlet):
                continue
            # boundary flux J = d u_x - drift u - u^2/2 written as lin u + quad u^2 + const
            if isinstance(cnd, Neumann):
                lin, quad, const = -drift, -0.5, d * cnd.value
            else:
                sgn = 1.0 if side == "right" else -1.0
                lin = sgn * d * cnd.kappa / cnd.scale - drift
                quad = sgn * d * cnd.quadratic / cnd.scale - 0.5
                const = 0.0
            # half cell: (h/2) D^a u_edge = +-(J_boundary - J_interface)
            s = 2.0 / h
            if side == "right":
                i, j = n - 1, n - 2
                MS[i, i] = -s * lin + s * (d / h - 0.5 * drift)
                MS[i, j] = s * (-d / h - 0.5 * drift)
                cS[i] = -s * const
                Q[i, i] = -s * (quad + 0.25)
                Q[i, j] = -s * 0.25
            else:
                i, j = 0, 1
                MS[i, i] = s * lin + s * (d / h + 0.5 * drift)
                MS[i, j] = s * (-d / h + 0.5 * drift)
                cS[i] = s * const
                Q[i, i] = s * (quad + 0.25)
                Q[i, j] = s * 0.25
        zero = np.zeros(n)
        return sp.eye(n, format="csr"), zero, MS.tocsr(), cS, Q.tocsr(), zero

    def _banded(self, M) -> np.ndarray:
        M = M.tocoo()
        if M.nnz and np.max(np.abs(M.row - M.col)) > BAND:
            raise BoundaryError("stencil exceeds the banded solver width")
        ab = np.zeros((2 * BAND + 1, self.n))
        np.add.at(ab, (BAND + M.row - M.col, M.col), M.data)
        return ab

    def P(self, u: np.ndarray) -> np.ndarray:
        return self.MP @ u + self.cP

    def nonlinear(self, u: np.ndarray) -> np.ndarray:
        if self.row_scaled:
            return u * (self.Q @ u + self.cQ)
        return self.Q @ (u * u)

    def residual(self, u: np.ndarray, w_last: float, q_prev: np.ndarray, memory: np.ndarray) -> np.ndarray:
        """Discrete equation at free nodes; Dirichlet rows read zero."""
        return w_last * (self.P(u) - q_prev) + memory + self.MS @ u + self.cS + self.nonlinear(u)

    def solve_linearised(self, u_lin: np.ndarray, w_last: float, rhs_free: np.ndarray) -> np.ndarray:
        """Solve the step system with the quadratic term frozen at u_lin."""
        if self.row_scaled:
            ab = w_last * self.abP + self.abS + u_lin[self.row_of] * self.abQ
            c = w_last * self.cP + self.cS + u_lin * self.cQ
        else:
            ab = w_last * self.abP + self.abS + u_lin[None, :] * self.abQ
            c = w_last * self.cP + self.cS
        for i in self.dir_rows:
            ab[BAND, i] = 1.0
        rhs = (rhs_free - c) * self.free + self.dir_vals
        return solve_banded((BAND, BAND), ab, rhs, check_finite=False)


# -- solution containers -----------------------------------------------------


@dataclass
class SolutionField:
    grid: SpatialGrid
    times: TimeGrid
    values: np.ndarray
    memory_budget: int
    alpha: float
    spec: FamilySpec
    bc: BoundarySet
    stop_reason: str = HORIZON_REACHED
    picard_sweeps: list[int] = field(default_factory=list)
    rejected_steps: int = 0

    @property
    def u0(self) -> np.ndarray:
        return self.values[0]

    @property
    def sup_norm(self) -> np.ndarray:
        return np.max(np.abs(self.values), axis=1)

    @property
    def t(self) -> np.ndarray:
        return self.times.nodes


def _initial_values(u0, grid: SpatialGrid) -> np.ndarray:
    x = grid.x
    if isinstance(u0, np.ndarray):
        v = np.asarray(u0, dtype=float)
        if v.shape != x.shape:
            raise ValueError(f"u0 samples need {x.size} values")
        return v.copy()
    if isinstance(u0, (int, float)):
        return np.full(x.shape, float(u0))
    return np.asarray(u0(x), dtype=float) * np.ones_like(x)


def simulate_fbb(
    spec: FamilySpec,
    alpha: float,
    u0,
    bc: BoundarySet,
    grid: SpatialGrid,
    horizon: float,
    dt: float | None = None,
    adaptive: bool = False,
    memory_budget: int = 20_000,
    drift: float = 1.0,
    advection: str | None = None,
) -> SolutionField:
    """Integrate D^a(u - a u_xx + b u_xxxx) + c u_xxx - d u_xx + drift u_x + u u_x = 0.

    Stops at the horizon, when the sup-norm exceeds 1e6 (1 + |u0|_inf), or when
    Picard iteration fails (solver-divergence). With `adaptive` the step is
    halved until the sup-norm increment is at most 10% and regrown toward `dt`.
    `advection` defaults to "conservative" when a Robin end is present.
    """
    if spec.family is not Family.FBB:
        raise ValueError("simulate_fbb needs an FBB family spec")
    if spec.a < 0.0 or spec.b < 0.0:
        raise ValueError("need a, b >= 0")
    alpha = check_order(alpha)
    if not (horizon > 0.0):
        raise ValueError("horizon must be positive")
    dt = horizon / 200.0 if dt is None else float(dt)
    if not (dt > 0.0):
        raise ValueError("dt must be positive")
    if advection is None:
        has_robin = any(isinstance(c, Robin) for c in bc.left + bc.right)
        advection = "conservative" if has_robin else "nonconservative"
    disc = _Discretisation(spec, grid, bc, drift, advection)
    u = _initial_values(u0, grid)
    if not np.all(np.isfinite(u)):
        raise ValueError("u0 must be finite")
    u_scale = float(np.max(np.abs(u)))
    escape = ESCAPE_FACTOR * (1.0 + u_scale)

    times = [0.0]
    values = [u]
    q_hist = [disc.P(u)]  # P u at each stored step
    dq = np.zeros((min(memory_budget, 1024), grid.n))  # increments of P u, grown by doubling
    sweeps: list[int] = []
    rejected = 0
    reason = HORIZON_REACHED
    step = dt
    min_step = MIN_DT_FRACTION * dt
    g2a = math.gamma(2.0 - alpha)

    while times[-1] < horizon * (1.0 - 1e-12):
        if len(times) >= memory_budget:
            raise MemoryBudgetExceeded(
                f"history reached memory_budget={memory_budget} steps at t={times[-1]:.6g}; "
                "raise the budget or the step size"
            )
        h_t = min(step, horizon - times[-1])
        t_new = times[-1] + h_t
        n = len(times)
        w_last = h_t ** (-alpha) / g2a
        if n > 1:
            w = l1_weights(np.append(times, t_new), n, alpha)
            memory = w[:-1] @ dq[: n - 1] if alpha < 1.0 else np.zeros(grid.n)
        else:
            memory = np.zeros(grid.n)
        u_prev = values[-1]
        u_new, k, ok = _picard(disc, u_prev, w_last, q_hist[-1], memory)
        too_big = ok and np.max(np.abs(u_new - u_prev)) > MAX_INCREMENT * max(np.max(np.abs(u_prev)), u_scale, 1e-300)
        if adaptive and (not ok or too_big):
            step = 0.5 * h_t
            rejected += 1
            if step < min_step:
                reason = SOLVER_DIVERGENCE
                break
            continue
        if not ok:
            reason = SOLVER_DIVERGENCE
            break
        times.append(t_new)
        values.append(u_new)
        q_new = disc.P(u_new)
        if n - 1 >= dq.shape[0]:
            dq = np.concatenate([dq, np.zeros_like(dq)])
        dq[n - 1] = q_new - q_hist[-1]
        q_hist.append(q_new)
        sweeps.append(k)
        if np.max(np.abs(u_new)) > escape:
            reason = SUP_ESCAPE
            break
        if adaptive and np.max(np.abs(u_new - u_prev)) < 0.025 * max(np.max(np.abs(u_prev)), 1e-300):
            step = min(dt, 1.25 * step)

    log.debug("simulate_fbb: %s after %d steps (%d rejected)", reason, len(times) - 1, rejected)
    return SolutionField(
        grid, TimeGrid(np.asarray(times)), np.asarray(values), memory_budget, alpha, spec, bc, reason, sweeps, rejected
    )


def _picard(disc: _Discretisation, u_prev, w_last, q_prev, memory):
    """Semi-implicit Picard sweeps; returns (u, sweeps, converged)."""
    u_it = u_prev.copy()
    rhs = w_last * q_prev - memory
    with np.errstate(all="ignore"):
        for k in range(1, PICARD_MAXITER + 1):
            try:
                u_next = disc.solve_linearised(u_it, w_last, rhs)
            except (np.linalg.LinAlgError, ValueError):
                return u_it, k, False
            if not np.all(np.isfinite(u_next)):
                return u_it, k, False
            change = np.max(np.abs(u_next - u_it))
            u_it = u_next
            if change <= PICARD_RTOL * max(np.max(np.abs(u_it)), 1e-300):
                return u_it, k, True
    return u_it, PICARD_MAXITER, False


def simulate_burgers(
    nu: float,
    alpha: float,
    u0,
    bc: BoundarySet,
    grid: SpatialGrid,
    horizon: float,
    dt: float | None = None,
    adaptive: bool = False,
    memory_budget: int = 20_000,
    advection: str | None = None,
) -> SolutionField:
    """D^a u + u u_x = nu u_xx."""
    if not (nu > 0.0):
        raise ValueError("nu must be positive")
    spec = FamilySpec(Family.FBB, d=float(nu))
    return simulate_fbb(spec, alpha, u0, bc, grid, horizon, dt, adaptive, memory_budget, 0.0, advection)


# -- monitors ----------------------------------------------------------------


@dataclass(frozen=True)
class FSeries:
    times: np.ndarray
    values: np.ndarray
    valid: bool = True
    note: str = ""


def monitor_capacity(fld: SolutionField, phi: TestFunction, spec: FamilySpec) -> FSeries:
    """F(t_n) = int v W dx by composite Simpson on the spatial grid."""
    if abs(phi.L - fld.grid.L) > 1e-12 * fld.grid.L:
        raise ValueError("test function and grid disagree on L")
    if spec.family is Family.BURGERS_GRAD:
        return monitor_gradient(fld, spec.nu, phi, spec.M)
    x = fld.grid.x
    f = family_forms(phi, spec)
    offset = shifted_field_offset(phi, spec)(x)
    weight = f.weight(x)
    u = fld.values
    v = u**2 + offset if spec.family is Family.MKDV else u + offset
    return FSeries(fld.t.copy(), simpson(v * weight, x=x, axis=1))


def check_max_principle(fld: SolutionField, tol: float | None = None):
    """Per-step margins min(u) - lower and upper - max(u) against boundary and initial data.

    Returns (low_margins, high_margins, tol, passed).
    """
    u = fld.values
    data = np.concatenate([u[0], u[:, 0], u[:, -1]])
    lower, upper = float(np.min(data)), float(np.max(data))
    low = np.min(u, axis=1) - lower
    high = upper - np.max(u, axis=1)
    if tol is None:
        steps = np.diff(fld.t)
        dt = float(np.max(steps)) if steps.size else 0.0
        scale = max(1.0, float(np.max(np.abs(u[0]))))
        tol = (fld.grid.h**2 + dt ** (2.0 - fld.alpha)) * scale
    passed = bool(np.all(low >= -tol) and np.all(high >= -tol))
    return low, high, tol, passed


def monitor_gradient(fld: SolutionField, nu: float, phi: TestFunction, M: float | None = None) -> FSeries:
    """F(t_n) = int (-u_x - u^2/(2 nu)) phi dx with fourth-order u_x."""
    x = fld.grid.x
    shift = GradientShift(nu)
    ux = np.array([fd_derivative(x, row) for row in fld.values])
    v = shift.apply(fld.values, ux)
    F = simpson(v * phi(x), x=x, axis=1)
    valid, note = True, ""
    if M is not None:
        peak = float(np.max(np.abs(fld.values)))
        if peak > M:
            valid, note = False, f"|u| reached {peak:.6g} > M = {M:.6g}"
    return FSeries(fld.t.copy(), F, valid, note)


def cell_peclet(fld: SolutionField, diffusivity: float) -> np.ndarray:
    """max_i |u_i| h / (2 d) per step; above 1 centred differences no longer resolve the solution."""
    return fld.sup_norm * fld.grid.h / (2.0 * diffusivity)


# -- detection ---------------------------------------------------------------


@dataclass
class BlowupReport:
    detected: bool
    t_detect: float | None
    reason: str
    F_series: FSeries
    window_containment: str  # "pass" | "fail" | "not-applicable"
    window: TstarWindow | None = None

    def __post_init__(self) -> None:
        if self.detected != (self.t_detect is not None):
            raise ValueError("t_detect present iff detected")

    def as_dict(self) -> dict:
        return {
            "detected": self.detected,
            "t_detect": self.t_detect,
            "reason": self.reason,
            "window_containment": self.window_containment,
            "window": None if self.window is None else self.window.as_dict(),
            "F_valid": self.F_series.valid,
            "F_note": self.F_series.note,
            "F_final": float(self.F_series.values[-1]),
            "steps": int(self.F_series.times.size - 1),
        }


def detect_blowup(
    fld: SolutionField, F_series: FSeries, certificate: CapacityCertificate | None = None
) -> BlowupReport:
    t = fld.t
    sup = fld.sup_norm
    F = F_series.values
    sup_hit = np.nonzero(sup > ESCAPE_FACTOR * (1.0 + sup[0]))[0]
    F_hit = np.nonzero(F > ESCAPE_FACTOR * (1.0 + abs(F[0])))[0]
    first = []
    if sup_hit.size:
        first.append((int(sup_hit[0]), SUP_ESCAPE))
    if F_hit.size:
        first.append((int(F_hit[0]), F_ESCAPE))
    if first:
        idx, reason = min(first)
        t_detect = float(t[idx])
    elif fld.stop_reason == SOLVER_DIVERGENCE:
        reason, t_detect = SOLVER_DIVERGENCE, float(t[-1])
    else:
        reason, t_detect = HORIZON_REACHED, None
    detected = t_detect is not None

    window = certificate.window if certificate is not None else None
    if window is None or not detected:
        containment = "not-applicable"
    else:
        containment = "pass" if t_detect <= window.upper * 1.1 else "fail"
    return BlowupReport(detected, t_detect, reason, F_series, containment, window)


def write_run_csv(path, fld: SolutionField, F_series: FSeries | None = None) -> None:
    low, high, _, _ = check_max_principle(fld)
    F = F_series.values if F_series is not None else np.full(fld.t.size, np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sup_norm", "F", "max_margin_low", "max_margin_high"])
        for row in zip(fld.t, fld.sup_norm, F, low, high):
            w.writerow([repr(float(v)) for v in row])
