"""Recompute the published worked examples and list where they disagree with the definitions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capacity import f0_condition
from .expr import ExpPoly, parse_expression
from .testfn import FamilySpec, TestFunction, theta_pair

MATCH_RTOL = 1e-10
E_INV = math.exp(-1.0)


@dataclass(frozen=True)
class PublishedExample:
    """A worked example as printed: constants and the blow-up condition int u0^power W > threshold."""

    key: str
    title: str
    spec: FamilySpec
    phi: str
    theta1: float
    theta2: float
    weight: str
    power: int
    threshold: float


# u0^2 e^{-x} < 1 - 1/e is stored as u0^2 (-e^{-x}) > -(1 - 1/e)
PUBLISHED = (
    PublishedExample("kdv-x", "fractional KdV, phi = x", FamilySpec("FBB", c=1.0), "x", 0.0, 1 / 6, "x", 1, 0.0),
    PublishedExample("burgers-robin-x", "fractional Burgers, Robin data, phi = x", FamilySpec("FBB", d=1.0), "x", 0.0, 1 / 6, "x", 1, 0.0),
    PublishedExample("bbm-x4", "fractional BBM, phi = x^4", FamilySpec("FBB", a=1.0), "x^4", 0.0, 395 / 48, "x^2*(x^2-12)", 1, 0.0),
    PublishedExample("rosenau-x-1", "fractional Rosenau, phi = x - 1", FamilySpec("FBB", b=1.0), "x-1", 0.5, 2 / 3, "x-1", 1, 0.5),
    PublishedExample("rosenau-burgers-x", "fractional Rosenau-Burgers, phi = x", FamilySpec("FBB", b=1.0, d=1.0), "x", 0.5, 2 / 3, "x", 1, -0.5),
    PublishedExample("camassa-holm-x", "fractional Camassa-Holm, kappa = 1", FamilySpec("CH", b=3.0, c=2.0, d=1.0, kappa=1.0), "x", 2 / 3, 2 / 9, "x", 1, -1 / 3),
    PublishedExample("degasperis-procesi-x", "fractional Degasperis-Procesi, kappa = 1", FamilySpec("CH", b=4.0, c=3.0, d=1.0, kappa=1.0), "x", 0.5, 1 / 6, "x", 1, -0.25),
    PublishedExample("ostrovsky-x2", "fractional Ostrovsky, phi = x^2", FamilySpec("OST", a=1.0, b=-1.0), "x^2", 1.0, 4 / 3, "x^2", 1, -1 / 3),
    PublishedExample("mkdv-exp", "fractional mKdV-Burgers, phi = -exp(-x)", FamilySpec("MKDV", a=2.0, b=3.0), "-exp(-x)", 0.0, (1 - E_INV) / 2, "-exp(-x)", 2, -(1 - E_INV)),
    PublishedExample("mkdv-x-1", "fractional mKdV-Burgers, a = 0, phi = x - 1", FamilySpec("MKDV", b=1.0), "x-1", 0.0, 1 / 6, "x-1", 2, 0.0),
)


@dataclass(frozen=True)
class AuditRow:
    key: str
    quantity: str  # "theta1" | "theta2" | "F0-condition"
    published: str
    computed: str
    match: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "example": self.key,
            "quantity": self.quantity,
            "published": self.published,
            "computed": self.computed,
            "match": self.match,
            "note": self.note,
        }


def _close(x: float, y: float) -> bool:
    return bool(abs(x - y) <= MATCH_RTOL * max(abs(x), abs(y), 1e-300) or x == y)


def _describe(weight: ExpPoly, power: int, threshold: float) -> str:
    u = "u0" if power == 1 else "u0^2"
    # adding 0.0 turns a negative zero into 0
    return f"int {u} * ({weight}) dx > {threshold + 0.0:.12g}"


def _same_condition(w_pub: ExpPoly, t_pub: float, w_cmp: ExpPoly, t_cmp: float, L: float) -> bool:
    """Equal up to a positive factor: w_pub = s w_cmp and t_pub = s t_cmp with s > 0."""
    xs = np.linspace(0.0, L, 97)
    a, b = w_pub(xs), w_cmp(xs)
    k = int(np.argmax(np.abs(b)))
    if b[k] == 0.0:
        return False
    s = a[k] / b[k]
    if not s > 0.0:
        return False
    scale = max(np.max(np.abs(a)), 1e-300)
    return bool(np.all(np.abs(a - s * b) <= 1e-10 * scale)) and _close(t_pub, s * t_cmp)


def _satisfiable(weight: ExpPoly, power: int, threshold: float, L: float) -> bool:
    if power == 1:
        return not weight.is_zero or threshold < 0.0
    # int u0^2 W ranges over (sup-free) values in [0, inf) when W > 0 somewhere, else (-inf, 0]
    xs = np.linspace(0.0, L, 2049)
    if np.any(weight(xs) > 0.0):
        return True
    return threshold < 0.0


def audit_example(ex: PublishedExample) -> list[AuditRow]:
    phi = TestFunction.parse(ex.phi)
    th = theta_pair(phi, ex.spec)
    rows = [
        AuditRow(ex.key, "theta1", f"{ex.theta1:.12g}", f"{th.theta1:.12g}", _close(th.theta1, ex.theta1)),
        AuditRow(ex.key, "theta2", f"{ex.theta2:.12g}", f"{th.theta2:.12g}", _close(th.theta2, ex.theta2)),
    ]
    cond = f0_condition(phi, ex.spec)
    w_pub = parse_expression(ex.weight)
    same = ex.power == cond.power and _same_condition(w_pub, ex.threshold, cond.weight, cond.threshold, phi.L)
    sat = _satisfiable(cond.weight, cond.power, cond.threshold, phi.L)
    note = "" if sat else "no real u0 satisfies the condition"
    rows.append(
        AuditRow(
            ex.key,
            "F0-condition",
            _describe(w_pub, ex.power, ex.threshold),
            _describe(cond.weight, cond.power, cond.threshold),
            bool(same and sat),
            note,
        )
    )
    return rows


def audit_published_examples() -> list[AuditRow]:
    """Every row for every worked example; an example is flagged when any of its rows mismatches."""
    rows: list[AuditRow] = []
    for ex in PUBLISHED:
        rows.extend(audit_example(ex))
    return rows


def flagged_examples(rows: list[AuditRow]) -> list[str]:
    seen: list[str] = []
    for r in rows:
        if not r.match and r.key not in seen:
            seen.append(r.key)
    return seen
