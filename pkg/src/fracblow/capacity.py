"""Blow-up certificates from the nonlinear capacity inequality.

For each family the weighted functional F(t) = int v W dx obeys

    D^a F >= F^2 / theta2 + Phi(t) - theta1.

With Phi >= theta1 and F(0) > 0 the rescaled G = F / theta2 satisfies
D^a G >= G^2, so G is an upper solution of the comparison problem with data
F(0)/theta2 and F escapes no later than the upper end of that problem's
blow-up window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .blowup_ode import TstarWindow, tstar_window
from .expr import ExpPoly, Ratio, parse_expression
from .quadrature import gauss_legendre
from .testfn import (
    Family,
    FamilySpec,
    HypothesisVerdict,
    NonFiniteCapacity,
    TestFunction,
    ThetaPair,
    check_denominator,
    check_hypotheses,
    family_forms,
    theta_pair,
)

SCHEMA_VERSION = 1

CERTIFIED = "certified-blowup"
HYPOTHESES_FAIL = "hypotheses-fail"
F0_NONPOSITIVE = "F0-nonpositive"


@dataclass(frozen=True)
class InitialData:
    """u0 on [0, L]: a closed-form expression or samples on a grid."""

    expr: ExpPoly | None = None
    x: np.ndarray | None = None
    values: np.ndarray | None = None
    source: str = ""
    regularity: str = "C4"

    def __post_init__(self) -> None:
        if (self.expr is None) == (self.values is None):
            raise ValueError("give either an expression or samples")
        if self.values is not None:
            x = np.asarray(self.x, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if x.shape != v.shape or x.ndim != 1 or x.size < 3:
                raise ValueError("samples need matching 1-d x and values with >= 3 points")
            if np.any(np.diff(x) <= 0.0):
                raise ValueError("sample abscissae must increase")
            if not np.all(np.isfinite(v)):
                raise ValueError("u0 samples must be finite")
            object.__setattr__(self, "x", x)
            object.__setattr__(self, "values", v)
            object.__setattr__(self, "regularity", "sampled")

    @classmethod
    def parse(cls, text: str) -> InitialData:
        return cls(expr=parse_expression(text), source=text)

    @classmethod
    def zero(cls) -> InitialData:
        return cls(expr=ExpPoly(), source="0")

    @classmethod
    def from_samples(cls, x, values, source: str = "samples") -> InitialData:
        return cls(x=x, values=values, source=source)

    @property
    def sampled(self) -> bool:
        return self.values is not None

    def __call__(self, x):
        if self.expr is not None:
            return self.expr(x)
        return np.interp(x, self.x, self.values)

    def derivative(self, x):
        if self.expr is not None:
            return self.expr.deriv()(x)
        return np.interp(x, self.x, fd_derivative(self.x, self.values))


def fd_derivative(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Fourth-order finite differences on a uniform grid (one-sided at the ends)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    h = x[1] - x[0]
    n = u.size
    if n < 5:
        return np.gradient(u, h, edge_order=2)
    out = np.empty_like(u)
    out[2:-2] = (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * h)
    out[0] = (-25 * u[0] + 48 * u[1] - 36 * u[2] + 16 * u[3] - 3 * u[4]) / (12.0 * h)
    out[1] = (-3 * u[0] - 10 * u[1] + 18 * u[2] - 6 * u[3] + u[4]) / (12.0 * h)
    out[-1] = (25 * u[-1] - 48 * u[-2] + 36 * u[-3] - 16 * u[-4] + 3 * u[-5]) / (12.0 * h)
    out[-2] = (3 * u[-1] + 10 * u[-2] - 18 * u[-3] + 6 * u[-4] - u[-5]) / (12.0 * h)
    return out


@dataclass(frozen=True)
class BoundaryFunctional:
    """Asserted lower-bound model for the boundary term Phi(t)."""

    kind: str = "zero"  # "zero" | "constant" | "series"
    value: float = 0.0
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "constant", "series"):
            raise ValueError(f"unknown boundary model {self.kind!r}")
        if self.kind == "series" and (not self.values or len(self.times) != len(self.values)):
            raise ValueError("series model needs matching non-empty times and values")

    @classmethod
    def constant(cls, c: float) -> BoundaryFunctional:
        return cls("constant", float(c))

    def lower_bound(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.value
        return float(min(self.values))

    def scaled(self, lam: float) -> BoundaryFunctional:
        # Phi is linear in phi, so a rescaled test function rescales the bound
        if self.kind == "zero":
            return self
        if self.kind == "constant":
            return BoundaryFunctional("constant", lam * self.value)
        return BoundaryFunctional("series", 0.0, self.times, tuple(lam * v for v in self.values))

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "lower_bound": self.lower_bound()}
        if self.kind == "constant":
            out["value"] = self.value
        if self.kind == "series":
            out["times"] = list(self.times)
            out["values"] = list(self.values)
        return out


@dataclass(frozen=True)
class GradientShift:
    """v = -u_x - u^2 / (2 nu) for the gradient form of Burgers."""

    nu: float

    def apply(self, u, ux):
        return -np.asarray(ux) - np.asarray(u) ** 2 / (2.0 * self.nu)


def shifted_field_offset(phi: TestFunction, spec: FamilySpec):
    """Offset added to u (to u^2 for MKDV) to form v; a GradientShift for BURGERS_GRAD."""
    if spec.family is Family.BURGERS_GRAD:
        return GradientShift(spec.nu)
    f = family_forms(phi, spec)
    if f.shift.is_zero:
        return Ratio(ExpPoly(), ExpPoly.const(1.0), 1, phi.span)
    check_denominator(f.den, phi.L, "offset")
    r = Ratio(f.shift, f.den, 1, phi.span)
    for x0 in (0.0, phi.L):
        if not math.isfinite(r.limit_at(x0)):
            raise NonFiniteCapacity(f"offset is unbounded at x={x0:g}")
    return r


def _f0_integrand(phi: TestFunction, spec: FamilySpec, u0: InitialData):
    if spec.family is Family.BURGERS_GRAD:
        shift = GradientShift(spec.nu)
        return lambda x: shift.apply(u0(x), u0.derivative(x)) * phi(x)
    f = family_forms(phi, spec)
    off = shifted_field_offset(phi, spec)
    if spec.family is Family.MKDV:
        return lambda x: (u0(x) ** 2 + off(x)) * f.weight(x)
    return lambda x: (u0(x) + off(x)) * f.weight(x)


def capacity_F0(phi: TestFunction, spec: FamilySpec, u0: InitialData) -> float:
    """F(0) = int v(x, 0) W(x) dx."""
    g = _f0_integrand(phi, spec, u0)
    if u0.sampled:
        if abs(u0.x[0]) > 1e-12 or abs(u0.x[-1] - phi.L) > 1e-9 * phi.L:
            raise ValueError("u0 samples must span [0, L]")
        return float(simpson(g(u0.x), x=u0.x))
    return gauss_legendre(g, 0.0, phi.L)


@dataclass(frozen=True)
class LinearCondition:
    """F(0) = int u0^power * weight dx + constant."""

    weight: ExpPoly
    power: int
    constant: float

    @property
    def threshold(self) -> float:
        # F(0) > 0  <=>  int u0^power weight > threshold
        return -self.constant


def f0_condition(phi: TestFunction, spec: FamilySpec) -> LinearCondition | None:
    """Split F(0) into its u0-dependent integral and a constant; None for BURGERS_GRAD."""
    if spec.family is Family.BURGERS_GRAD:
        return None
    f = family_forms(phi, spec)
    off = shifted_field_offset(phi, spec)
    const = gauss_legendre(lambda x: off(x) * f.weight(x), 0.0, phi.L)
    return LinearCondition(f.weight, 2 if spec.family is Family.MKDV else 1, const)


@dataclass
class CapacityCertificate:
    family: FamilySpec
    phi: TestFunction
    alpha: float
    thetas: ThetaPair | None
    F0: float | None
    hypothesis_verdicts: list[HypothesisVerdict]
    phi_minus_theta1_nonneg: dict
    boundary: BoundaryFunctional
    status: str
    window: TstarWindow | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if (self.window is not None) != (self.status == CERTIFIED):
            raise ValueError("window present iff certified")

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "capacity-certificate",
            "status": self.status,
            "family": self.family.as_dict(),
            "phi": {"expression": self.phi.source, "normal_form": str(self.phi.expr), "L": self.phi.L},
            "alpha": self.alpha,
            "thetas": None if self.thetas is None else self.thetas.as_dict(),
            "F0": self.F0,
            "comparison_u0": None if self.window is None else self.window.u0,
            "hypotheses": [h.as_dict() for h in self.hypothesis_verdicts],
            "phi_minus_theta1_nonneg": self.phi_minus_theta1_nonneg,
            "boundary": self.boundary.as_dict(),
            "window": None if self.window is None else self.window.as_dict(),
            "warnings": list(self.warnings),
            "provenance": {
                "theta1": "adaptive 16-point Gauss-Legendre, rtol 1e-12",
                "theta2": "adaptive 16-point Gauss-Legendre, rtol 1e-12",
                "F0": "same quadrature on v(x,0) * weight (Simpson for sampled u0)",
                "window": "closed-form comparison bounds with data F0/theta2",
                "hypotheses": "dense grid of 2048 points plus term-tree roots",
            },
        }


def build_certificate(
    phi: TestFunction,
    spec: FamilySpec,
    u0: InitialData,
    boundary: BoundaryFunctional | None = None,
    alpha: float = 1.0,
    tol: float = 1e-10,
) -> CapacityCertificate:
    """Check every hypothesis and, if all hold with F(0) > 0, attach the blow-up window."""
    boundary = boundary or BoundaryFunctional()
    verdicts = check_hypotheses(phi, spec)
    warnings: list[str] = []
    thetas = None
    F0 = None
    try:
        thetas = theta_pair(phi, spec)
    except NonFiniteCapacity as exc:
        verdicts.append(HypothesisVerdict("finite capacity", False, detail=str(exc)))
    else:
        verdicts.append(HypothesisVerdict("finite capacity", thetas.theta2 > 0.0, None, thetas.theta2))
        try:
            F0 = capacity_F0(phi, spec, u0)
        except NonFiniteCapacity as exc:
            verdicts.append(HypothesisVerdict("finite offset", False, detail=str(exc)))

    if spec.family is Family.MKDV and thetas is not None:
        off = shifted_field_offset(phi, spec)
        xs = u0.x if u0.sampled else np.linspace(0.0, phi.L, 2049)
        low = float(np.min(u0(xs) ** 2 + off(xs)))
        if low < 0.0:
            warnings.append(f"v^2 = u0^2 + offset is negative somewhere (min {low:.3g})")

    inf_phi = boundary.lower_bound()
    theta1 = None if thetas is None else thetas.theta1
    phi_ok = theta1 is not None and inf_phi >= theta1 - tol * max(1.0, abs(theta1))
    phi_check = {"inf_Phi": inf_phi, "theta1": theta1, "passed": bool(phi_ok)}

    window = None
    if not all(v.passed for v in verdicts) or not phi_ok:
        status = HYPOTHESES_FAIL
    elif F0 is None or not (F0 > 0.0):
        status = F0_NONPOSITIVE
    else:
        status = CERTIFIED
        window = tstar_window(alpha, F0 / thetas.theta2)
    return CapacityCertificate(
        spec, phi, float(alpha), thetas, F0, verdicts, phi_check, boundary, status, window, warnings
    )
