"""Closed-form test functions: sums of p_j(x) * exp(lam_j * x).

Every expression the scenario grammar can produce (polynomials, exp of an
affine argument, sums and products of those) normalises to this form, which
is closed under differentiation and multiplication. Evaluation, exact
derivatives, and root isolation on an interval all work on the normal form.

Grammar (whitespace ignored)::

    expr   := ['-'] term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := atom ('^' int)*
    atom   := number | 'x' | 'exp' '(' expr ')' | '(' expr ')' | '-' atom
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

MAX_DEGREE = 32


class ExpressionError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int | None = None):
        self.text = text
        self.pos = pos
        where = f" at column {pos + 1}" if pos is not None else ""
        super().__init__(f"{message}{where}" + (f": {text!r}" if text else ""))


def _trim(coeffs) -> tuple[float, ...]:
    c = list(coeffs)
    while c and c[-1] == 0.0:
        c.pop()
    return tuple(float(v) for v in c)


def _padd(p, q):
    n = max(len(p), len(q))
    return _trim((p[i] if i < len(p) else 0.0) + (q[i] if i < len(q) else 0.0) for i in range(n))


def _pmul(p, q):
    if not p or not q:
        return ()
    out = [0.0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return _trim(out)


def _pder(p):
    return _trim(k * p[k] for k in range(1, len(p)))


@dataclass(frozen=True)
class ExpPoly:
    """Normal form sum_j p_j(x) exp(lam_j x); `terms` maps lam -> ascending coefficients."""

    terms: tuple[tuple[float, tuple[float, ...]], ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> ExpPoly:
        items = [(float(lam), _trim(c)) for lam, c in d.items()]
        items = [(lam, c) for lam, c in items if c]
        for _, c in items:
            if len(c) - 1 > MAX_DEGREE:
                raise ExpressionError(f"polynomial degree exceeds {MAX_DEGREE}")
        return cls(tuple(sorted(items)))

    @classmethod
    def const(cls, v: float) -> ExpPoly:
        return cls.from_dict({0.0: (float(v),)})

    @classmethod
    def x(cls) -> ExpPoly:
        return cls.from_dict({0.0: (0.0, 1.0)})

    @classmethod
    def poly(cls, coeffs) -> ExpPoly:
        return cls.from_dict({0.0: tuple(coeffs)})

    @classmethod
    def exp(cls, lam: float, scale: float = 1.0) -> ExpPoly:
        return cls.from_dict({float(lam): (float(scale),)})

    def as_dict(self) -> dict:
        return dict(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_polynomial(self) -> bool:
        return all(lam == 0.0 for lam, _ in self.terms)

    def poly_coeffs(self) -> tuple[float, ...]:
        if not self.is_polynomial:
            raise ExpressionError("not a polynomial")
        return self.terms[0][1] if self.terms else ()

    def __add__(self, other) -> ExpPoly:
        other = _coerce(other)
        d = self.as_dict()
        for lam, c in other.terms:
            d[lam] = _padd(d.get(lam, ()), c)
        return ExpPoly.from_dict(d)

    __radd__ = __add__

    def __neg__(self) -> ExpPoly:
        return self * -1.0

    def __sub__(self, other) -> ExpPoly:
        return self + (-_coerce(other))

    def __rsub__(self, other) -> ExpPoly:
        return _coerce(other) - self

    def __mul__(self, other) -> ExpPoly:
        other = _coerce(other)
        d: dict = {}
        for l1, c1 in self.terms:
            for l2, c2 in other.terms:
                lam = l1 + l2
                d[lam] = _padd(d.get(lam, ()), _pmul(c1, c2))
        return ExpPoly.from_dict(d)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> ExpPoly:
        if not isinstance(k, int) or k < 0:
            raise ExpressionError("only non-negative integer powers are supported")
        out = ExpPoly.const(1.0)
        for _ in range(k):
            out = out * self
        return out

    def deriv(self, order: int = 1) -> ExpPoly:
        out = self
        for _ in range(order):
            # (p e^{lam x})' = (p' + lam p) e^{lam x}
            out = ExpPoly.from_dict(
                {lam: _padd(_pder(c), tuple(lam * v for v in c)) for lam, c in out.terms}
            )
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lam, c in self.terms:
            p = np.polynomial.polynomial.polyval(x, c)
            out = out + (p if lam == 0.0 else p * np.exp(lam * x))
        return float(out) if out.ndim == 0 else out

    def exp_of(self) -> ExpPoly:
        """exp(self), defined only when self is affine in x."""
        if not self.is_polynomial or len(self.poly_coeffs()) > 2:
            raise ExpressionError("exp() argument must be affine in x")
        c = self.poly_coeffs() + (0.0, 0.0)
        return ExpPoly.exp(c[1], math.exp(c[0]))

    def __str__(self) -> str:
        parts = []
        for lam, c in self.terms:
            poly = " + ".join(
                f"{v:g}" + ("" if k == 0 else ("*x" if k == 1 else f"*x^{k}"))
                for k, v in enumerate(c)
                if v != 0.0
            )
            parts.append(f"({poly})" + ("" if lam == 0.0 else f"*exp({lam:g}*x)"))
        return " + ".join(parts) if parts else "0"

    # -- roots and signs on an interval -------------------------------------

    def roots(self, lo: float, hi: float, samples: int = 4096) -> np.ndarray:
        """Real roots in [lo, hi] (sorted, deduplicated).

        A single exponential group has the roots of its polynomial factor,
        found from the companion matrix and polished by bisection. Multiple
        roots come back as tight complex clusters, so near-real candidates are
        kept; callers only use roots to cut the interval, so a spurious cut is
        harmless. Mixed
        groups fall back to sign changes on a dense sample, which can miss a
        tangential double root.
        """
        if self.is_zero:
            return np.array([])
        span = hi - lo
        eps = 1e-10 * max(span, 1.0)
        if len(self.terms) == 1:
            c = self.terms[0][1]
            if len(c) <= 1:
                return np.array([])
            r = np.polynomial.polynomial.polyroots(c)
            cand = [
                z.real
                for z in np.atleast_1d(r)
                if abs(z.imag) <= 1e-3 * max(1.0, abs(z)) and lo - eps <= z.real <= hi + eps
            ]
            cand = [min(max(v, lo), hi) for v in cand]
            cand = [self._polish(v, lo, hi) for v in cand]
        else:
            xs = np.linspace(lo, hi, samples)
            ys = self(xs)
            cand = [float(x) for x, y in zip(xs, ys) if y == 0.0]
            s = np.sign(ys)
            for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
                cand.append(brentq(self, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
        cand.sort()
        out: list[float] = []
        for v in cand:
            if not out or v - out[-1] > eps:
                out.append(v)
        return np.array(out)

    def _polish(self, x0: float, lo: float, hi: float) -> float:
        # bisection on a small bracket if there is a sign change; otherwise keep x0
        d = 1e-6 * max(hi - lo, 1.0)
        a, b = max(lo, x0 - d), min(hi, x0 + d)
        fa, fb = self(a), self(b)
        if fa * fb < 0.0:
            return brentq(self, a, b, xtol=1e-15, rtol=1e-15)
        return x0

    def zero_order(self, x0: float, span=(0.0, 1.0), rtol: float = 1e-12, max_order: int = 12) -> int:
        """Order of vanishing at x0 (0 if nonzero there); `span` sets the magnitude scale."""
        if self.is_zero:
            return max_order
        g = self
        scale = _scale(self, span)
        for k in range(max_order):
            v = g(x0)
            if abs(v) > rtol * max(scale, _scale(g, span)):
                return k
            g = g.deriv()
        return max_order


def _scale(g: ExpPoly, span) -> float:
    xs = np.linspace(span[0], span[1], 33)
    return float(np.max(np.abs(g(xs)))) or 1.0


def _coerce(v) -> ExpPoly:
    if isinstance(v, ExpPoly):
        return v
    if isinstance(v, (int, float)):
        return ExpPoly.const(float(v))
    raise TypeError(f"cannot combine ExpPoly with {type(v).__name__}")


@dataclass(frozen=True)
class Ratio:
    """num**power / den with removable zeros of den filled in by their limit."""

    num: ExpPoly
    den: ExpPoly
    power: int = 1
    span: tuple[float, float] = (0.0, 1.0)

    def limit_at(self, x0: float) -> float:
        """Value of the continuous extension at x0; inf for a pole."""
        k = self.num.zero_order(x0, self.span)
        n_ord = self.power * k
        d_ord = self.den.zero_order(x0, self.span)
        if d_ord == 0:
            return float(self.num(x0) ** self.power / self.den(x0))
        if self.num.is_zero or n_ord > d_ord:
            return 0.0
        if n_ord < d_ord:
            return math.inf
        # leading Taylor coefficients: num ~ a (x-x0)^k, den ~ b (x-x0)^d_ord
        a = self.num.deriv(k)(x0) / math.factorial(k)
        b = self.den.deriv(d_ord)(x0) / math.factorial(d_ord)
        return float(a**self.power / b)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = np.asarray(self.den(x), dtype=float)
        n = np.asarray(self.num(x), dtype=float) ** self.power
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(n / d, dtype=float)
        bad = ~np.isfinite(out) | (d == 0.0)
        if np.any(bad):
            out = np.array(out, copy=True)
            flat = out.reshape(-1)
            for i in np.flatnonzero(bad.reshape(-1)):
                flat[i] = self.limit_at(float(x.reshape(-1)[i]))
        return float(out) if out.ndim == 0 else out


# -- parser ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]+)|(?P<op>[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError("unexpected character", text, col)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None, kind=None):
        tok = self.toks[self.i]
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value or kind
            raise ExpressionError(f"expected {want!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self) -> ExpPoly:
        out = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError("trailing input", self.text, self.peek()[2])
        return out

    def expr(self) -> ExpPoly:
        if self.peek()[1] == "-":
            self.take("-")
            out = -self.term()
        else:
            out = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            out = out + rhs if op == "+" else out - rhs
        return out

    def term(self) -> ExpPoly:
        out = self.factor()
        while self.peek()[1] == "*":
            self.take("*")
            out = out * self.factor()
        return out

    def factor(self) -> ExpPoly:
        out = self.atom()
        while self.peek()[1] == "^":
            self.take("^")
            kind, val, pos = self.take(kind="num")
            if not re.fullmatch(r"\d+", val):
                raise ExpressionError("exponent must be a non-negative integer", self.text, pos)
            out = out ** int(val)
        return out

    def atom(self) -> ExpPoly:
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return ExpPoly.const(float(val))
        if kind == "name":
            self.take()
            if val == "x":
                return ExpPoly.x()
            if val == "exp":
                self.take("(")
                arg = self.expr()
                self.take(")")
                try:
                    return arg.exp_of()
                except ExpressionError as exc:
                    raise ExpressionError(str(exc), self.text, pos) from None
            raise ExpressionError(f"unknown name {val!r}", self.text, pos)
        if val == "(":
            self.take("(")
            out = self.expr()
            self.take(")")
            return out
        if val == "-":
            self.take("-")
            return -self.atom()
        raise ExpressionError("unexpected token", self.text, pos)


def parse_expression(text: str) -> ExpPoly:
    """Parse an expression in x into normal form."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", str(text), 0)
    return _Parser(text).parse()
