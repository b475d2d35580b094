"""Test functions, per-family sign conditions, and the capacity constants theta1, theta2.

Each equation family contributes three weights built from phi and its
derivatives: a denominator `den`, a shift numerator `shift` (the offset that
turns u into v is shift/den), and the weight `weight` that F(t) integrates v
against. Then

    theta1 = c1 * int shift^2 / den,    theta2 = c2 * int weight^2 / den,

except for the gradient form of Burgers, where
theta1 = M^4/(4 nu^2) int phi + M nu int |phi'''| and theta2 = int phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .expr import ExpPoly, Ratio, parse_expression
from .quadrature import QuadratureError, gauss_legendre

GRID_POINTS = 2048
SIGN_RTOL = 1e-12


class NonFiniteCapacity(ValueError):
    """A capacity integral diverges or its denominator is not positive inside (0, L)."""


class Family(str, Enum):
    FBB = "FBB"
    CH = "CH"
    OST = "OST"
    MKDV = "MKDV"
    BURGERS_GRAD = "BURGERS_GRAD"


@dataclass(frozen=True)
class FamilySpec:
    family: Family
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    nu: float | None = None
    M: float | None = None
    kappa: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if self.kappa is not None:
            if self.kappa <= 0.0:
                raise ValueError("kappa must be positive")
            if self.family is not Family.CH:
                raise ValueError("kappa only applies to the CH family")
            if self.a not in (0.0, 2.0 * self.kappa):
                raise ValueError("CH with kappa needs a = 2*kappa")
            object.__setattr__(self, "a", 2.0 * self.kappa)
        if self.family is Family.BURGERS_GRAD:
            if self.nu is None or self.nu <= 0.0:
                raise ValueError("BURGERS_GRAD needs nu > 0")
            if self.M is None or self.M <= 0.0:
                raise ValueError("BURGERS_GRAD needs a solution bound M > 0")

    def as_dict(self) -> dict:
        out = {"family": self.family.value, "a": self.a, "b": self.b, "c": self.c, "d": self.d}
        for k in ("nu", "M", "kappa"):
            if getattr(self, k) is not None:
                out[k] = getattr(self, k)
        return out


@dataclass(frozen=True)
class TestFunction:
    """phi on [0, L] with exact derivatives d0..d4."""

    __test__ = False  # keep pytest from collecting this class

    source: str
    expr: ExpPoly
    L: float = 1.0
    derivs: tuple[ExpPoly, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (self.L > 0.0):
            raise ValueError("domain length must be positive")
        ds = [self.expr]
        for _ in range(4):
            ds.append(ds[-1].deriv())
        object.__setattr__(self, "derivs", tuple(ds))

    @classmethod
    def parse(cls, text: str, L: float = 1.0) -> TestFunction:
        return cls(text, parse_expression(text), float(L))

    def d(self, k: int) -> ExpPoly:
        return self.derivs[k]

    def __call__(self, x, k: int = 0):
        return self.derivs[k](x)

    def scaled(self, lam: float) -> TestFunction:
        return TestFunction(f"{lam!r}*({self.source})", self.expr * lam, self.L)

    @property
    def span(self) -> tuple[float, float]:
        return (0.0, self.L)


@dataclass(frozen=True)
class FamilyForms:
    den: ExpPoly
    shift: ExpPoly
    weight: ExpPoly
    c1: float
    c2: float


def family_forms(phi: TestFunction, spec: FamilySpec) -> FamilyForms:
    p0, p1, p2, p3, p4 = phi.derivs
    a, b, c, d = spec.a, spec.b, spec.c, spec.d
    fam = spec.family
    if fam is Family.FBB:
        return FamilyForms(p1, c * p3 + d * p2 + p1, p0 - a * p2 + b * p4, 0.5, 2.0)
    if fam is Family.CH:
        return FamilyForms(b * p1 - d * p3, a * p1, p0 - p2, 0.5, 2.0)
    if fam is Family.OST:
        return FamilyForms(p2, a * p2 + b * p4, p1, 0.5, 2.0)
    if fam is Family.MKDV:
        return FamilyForms(p1, a * p3 + b * p2, p0, 2.0, 0.5)
    # gradient Burgers: v = -u_x - u^2/(2 nu), F = int v phi
    return FamilyForms(ExpPoly.const(1.0), ExpPoly(), p0, 0.0, 1.0)


# -- hypotheses ------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisVerdict:
    name: str
    passed: bool
    worst_x: float | None = None
    worst_value: float | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_x": self.worst_x,
            "worst_value": self.worst_value,
            "detail": self.detail,
        }


def _conditions(phi: TestFunction, spec: FamilySpec) -> list[tuple[str, ExpPoly, int]]:
    """(label, g, sign): the condition is sign * g >= 0 on [0, L]."""
    p0, p1, p2, p3, _ = phi.derivs
    fam = spec.family
    if fam is Family.FBB:
        return [("phi' >= 0", p1, 1)]
    if fam is Family.CH:
        return [("phi' >= 0", p1, 1), ("b phi' - d phi''' >= 0", spec.b * p1 - spec.d * p3, 1)]
    if fam is Family.OST:
        return [("phi'' >= 0", p2, 1)]
    if fam is Family.MKDV:
        return [
            ("phi <= 0", p0, -1),
            ("phi' >= 0", p1, 1),
            ("3a phi' + 2b phi <= 0", 3.0 * spec.a * p1 + 2.0 * spec.b * p0, -1),
        ]
    return [("phi >= 0", p0, 1)]


def sign_condition(name: str, g: ExpPoly, sign: int, L: float) -> HypothesisVerdict:
    """Check sign * g >= 0 on [0, L] on a dense grid and on every root-delimited piece."""
    h = sign * g
    if h.is_zero:
        return HypothesisVerdict(name, True, None, 0.0, "identically zero")
    grid = np.linspace(0.0, L, GRID_POINTS)
    gv = h(grid)
    scale = max(float(np.max(np.abs(gv))), 1e-300)
    tol = SIGN_RTOL * scale
    cuts = np.unique(np.concatenate([[0.0, L], h.roots(0.0, L)]))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    mv = h(mids) if mids.size else np.array([])

    i = int(np.argmin(gv))
    worst_x, worst = float(grid[i]), float(gv[i])
    if mv.size and float(mv.min()) < worst:
        j = int(np.argmin(mv))
        worst_x, worst = float(mids[j]), float(mv[j])
    grid_ok = bool(gv.min() >= -tol)
    roots_ok = bool(mv.size == 0 or mv.min() >= -tol)
    detail = ""
    if grid_ok and not roots_ok:
        detail = "sign change between term-tree roots missed by the grid"
    return HypothesisVerdict(name, grid_ok and roots_ok, worst_x, sign * worst, detail)


def check_hypotheses(phi: TestFunction, spec: FamilySpec) -> list[HypothesisVerdict]:
    out = []
    if spec.family is Family.CH:
        k = 3.0 * spec.d - spec.c
        out.append(HypothesisVerdict("3d - c >= 0", k >= 0.0, None, k))
    for name, g, sign in _conditions(phi, spec):
        out.append(sign_condition(name, g, sign, phi.L))
    return out


# -- capacity constants ----------------------------------------------------


@dataclass(frozen=True)
class ThetaPair:
    theta1: float
    theta2: float
    integrand_singular: bool = False

    def as_dict(self) -> dict:
        return {
            "theta1": self.theta1,
            "theta2": self.theta2,
            "integrand_singular": self.integrand_singular,
        }


def check_denominator(den: ExpPoly, L: float, what: str) -> bool:
    """Raise unless den > 0 on (0, L); return True when den vanishes at an endpoint."""
    if den.is_zero:
        raise NonFiniteCapacity(f"{what}: denominator vanishes identically")
    inner = [r for r in den.roots(0.0, L) if 1e-12 * L < r < L * (1 - 1e-12)]
    if inner:
        raise NonFiniteCapacity(f"{what}: denominator vanishes inside (0, L) at x={inner[0]:.6g}")
    xs = np.linspace(0.0, L, GRID_POINTS)[1:-1]
    if np.any(den(xs) <= 0.0):
        raise NonFiniteCapacity(f"{what}: denominator is not positive inside (0, L)")
    return den(0.0) == 0.0 or den(L) == 0.0 or abs(den(0.0)) * abs(den(L)) == 0.0


def ratio_integral(num: ExpPoly, den: ExpPoly, L: float, power: int = 2, what: str = "") -> tuple[float, bool]:
    """int_0^L num^power / den with removable endpoint singularities allowed."""
    if num.is_zero:
        return 0.0, False
    singular = check_denominator(den, L, what)
    r = Ratio(num, den, power, (0.0, L))
    for x0 in (0.0, L):
        if not math.isfinite(r.limit_at(x0)):
            raise NonFiniteCapacity(f"{what}: non-integrable singularity at x={x0:g}")
    try:
        return gauss_legendre(r, 0.0, L), singular
    except QuadratureError as exc:
        raise NonFiniteCapacity(f"{what}: {exc}") from None


def abs_integral(g: ExpPoly, L: float) -> float:
    """int_0^L |g| split at the roots of g."""
    if g.is_zero:
        return 0.0
    cuts = np.unique(np.concatenate([[0.0, L], g.roots(0.0, L)]))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0.0:
            continue
        s = np.sign(g(0.5 * (lo + hi)))
        total += s * gauss_legendre(g, lo, hi)
    return float(total)


def theta_pair(phi: TestFunction, spec: FamilySpec) -> ThetaPair:
    L = phi.L
    if spec.family is Family.BURGERS_GRAD:
        nu, M = spec.nu, spec.M
        int_phi = gauss_legendre(phi.d(0), 0.0, L)
        theta1 = M**4 / (4.0 * nu**2) * int_phi + M * nu * abs_integral(phi.d(3), L)
        return ThetaPair(theta1, int_phi, False)
    f = family_forms(phi, spec)
    t1, s1 = ratio_integral(f.shift, f.den, L, 2, "theta1")
    t2, s2 = ratio_integral(f.weight, f.den, L, 2, "theta2")
    return ThetaPair(f.c1 * t1, f.c2 * t2, s1 or s2)


# -- exact oracle ----------------------------------------------------------


class UnsupportedOracleInput(ValueError):
    pass


def closed_form_theta_oracle(phi: TestFunction, spec: FamilySpec):
    """Exact theta1, theta2 for polynomial phi, via sympy.

    Works from the source string, independently of the normal-form
    derivatives and the quadrature. Returns (theta1, theta2) as exact sympy
    numbers: rationals when the denominator divides the numerator, otherwise
    closed forms with logs or arctangents.
    """
    import sympy as sp

    x = sp.Symbol("x", real=True)
    text = phi.source.replace("^", "**")
    try:
        expr = sp.sympify(text, locals={"x": x, "exp": sp.exp}, rational=True)
    except (sp.SympifyError, SyntaxError) as exc:
        raise UnsupportedOracleInput(f"cannot parse {phi.source!r}") from exc
    if not expr.is_polynomial(x):
        raise UnsupportedOracleInput(f"oracle needs a polynomial, got {phi.source!r}")
    L = sp.nsimplify(phi.L, rational=True)
    q = {k: sp.nsimplify(getattr(spec, k), rational=True) for k in "abcd"}
    p = [sp.diff(expr, x, k) for k in range(5)]

    def exact(num, den, c):
        if sp.expand(num) == 0:
            return sp.Integer(0)
        quo, rem = sp.div(sp.expand(num**2), sp.expand(den), x)
        if rem == 0:
            return c * sp.integrate(quo, (x, 0, L))
        # proper rational remainder: partial fractions give logs and arctans
        return sp.simplify(c * (sp.integrate(quo, (x, 0, L)) + sp.integrate(sp.apart(rem / den, x), (x, 0, L))))

    fam = spec.family
    if fam is Family.BURGERS_GRAD:
        nu = sp.nsimplify(spec.nu, rational=True)
        M = sp.nsimplify(spec.M, rational=True)
        d3 = sp.Poly(p[3], x)
        cuts = sorted({sp.Integer(0), L, *[r for r in sp.real_roots(d3) if 0 < r < L]}) if d3.degree() > 0 else [0, L]
        abs3 = sum(
            sp.sign(p[3].subs(x, (lo + hi) / 2)) * sp.integrate(p[3], (x, lo, hi))
            for lo, hi in zip(cuts[:-1], cuts[1:])
        )
        int_phi = sp.integrate(p[0], (x, 0, L))
        return sp.nsimplify(M**4 / (4 * nu**2) * int_phi + M * nu * abs3), int_phi
    a, b, c, d = q["a"], q["b"], q["c"], q["d"]
    if fam is Family.FBB:
        den, sh, w, c1, c2 = p[1], c * p[3] + d * p[2] + p[1], p[0] - a * p[2] + b * p[4], sp.Rational(1, 2), 2
    elif fam is Family.CH:
        den, sh, w, c1, c2 = b * p[1] - d * p[3], a * p[1], p[0] - p[2], sp.Rational(1, 2), 2
    elif fam is Family.OST:
        den, sh, w, c1, c2 = p[2], a * p[2] + b * p[4], p[1], sp.Rational(1, 2), 2
    else:
        den, sh, w, c1, c2 = p[1], a * p[3] + b * p[2], p[0], 2, sp.Rational(1, 2)
    return exact(sh, den, c1), exact(w, den, c2)


def with_coefficients(spec: FamilySpec, **kw) -> FamilySpec:
    return replace(spec, **kw)
