import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracblow.capacity import (
    CERTIFIED,
    F0_NONPOSITIVE,
    HYPOTHESES_FAIL,
    BoundaryFunctional,
    InitialData,
    build_certificate,
    capacity_F0,
    f0_condition,
    fd_derivative,
    shifted_field_offset,
)
from fracblow.testfn import FamilySpec, TestFunction

ROSENAU = FamilySpec("FBB", b=1.0)
CH = FamilySpec("CH", b=3.0, c=2.0, d=1.0, kappa=1.0)
MKDV_EXP = FamilySpec("MKDV", a=2.0, b=3.0)


def cert(phi, spec, u0, boundary=None, alpha=0.5):
    return build_certificate(TestFunction.parse(phi), spec, InitialData.parse(u0), boundary, alpha)


def test_rosenau_offset_and_zero_data():
    phi = TestFunction.parse("x-1")
    assert shifted_field_offset(phi, ROSENAU)(0.3) == pytest.approx(1.0)
    # F0 = int (0 + 1)(x - 1) dx
    assert capacity_F0(phi, ROSENAU, InitialData.zero()) == pytest.approx(-0.5, rel=1e-14)


def test_rosenau_certified_window():
    c = cert("x-1", ROSENAU, "-3*(1-x)", BoundaryFunctional.constant(0.5))
    # F0 = int (u0 + 1)(x - 1) = 3 int (1 - x)^2 - 1/2 = 1/2
    assert c.F0 == pytest.approx(0.5, rel=1e-13)
    assert c.status == CERTIFIED
    u = 0.5 / (2 / 3)
    assert c.window.u0 == pytest.approx(u, rel=1e-13)
    assert c.window.upper == pytest.approx((math.gamma(1.5) / u) ** 2, rel=1e-12)


def test_camassa_holm_offset():
    phi = TestFunction.parse("x")
    assert shifted_field_offset(phi, CH)(0.5) == pytest.approx(2 / 3)
    c = cert("x", CH, "0", BoundaryFunctional.constant(2 / 3))
    assert c.F0 == pytest.approx(1 / 3, rel=1e-13)
    assert c.status == CERTIFIED


def test_phi_below_theta1_fails():
    c = cert("x", CH, "0", BoundaryFunctional.constant(0.6))
    assert c.status == HYPOTHESES_FAIL and not c.phi_minus_theta1_nonneg["passed"]


def test_mkdv_exponential_needs_boundary_support():
    c = cert("-exp(-x)", MKDV_EXP, "0")
    assert c.F0 == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert c.thetas.theta1 == pytest.approx(2 * (1 - math.exp(-1)), rel=1e-12)
    assert c.status == HYPOTHESES_FAIL


def test_mkdv_x_minus_one_is_never_positive():
    c = cert("x-1", FamilySpec("MKDV", b=1.0), "1+x")
    assert c.status == F0_NONPOSITIVE and c.window is None
    cond = f0_condition(TestFunction.parse("x-1"), FamilySpec("MKDV", b=1.0))
    assert cond.power == 2 and cond.threshold == pytest.approx(0.0, abs=1e-15)


def test_mkdv_negative_square_warns():
    c = cert("-exp(-x)", MKDV_EXP, "0")
    assert any("negative" in w for w in c.warnings)


def test_non_finite_capacity_is_a_failed_hypothesis():
    c = cert("x^2", FamilySpec("FBB", d=1.0), "1")
    assert c.status == HYPOTHESES_FAIL
    assert any(h.name == "finite capacity" and not h.passed for h in c.hypothesis_verdicts)


def test_classical_limit_upper_is_theta2_over_F0():
    c = cert("x-1", ROSENAU, "-5*(1-x)", BoundaryFunctional.constant(0.5), alpha=1.0)
    assert c.window.upper == pytest.approx(c.thetas.theta2 / c.F0, rel=1e-13)
    assert c.window.lower == pytest.approx(c.window.upper / 4, rel=1e-13)


def test_f0_condition_reassembles_F0():
    phi = TestFunction.parse("x-1")
    cond = f0_condition(phi, ROSENAU)
    u0 = InitialData.parse("x^2 - 3")
    direct = capacity_F0(phi, ROSENAU, u0)
    xs = np.linspace(0, 1, 4001)
    from scipy.integrate import simpson

    assert simpson(u0(xs) * cond.weight(xs), x=xs) + cond.constant == pytest.approx(direct, rel=1e-10)


def test_sampled_initial_data_matches_expression():
    phi = TestFunction.parse("x")
    xs = np.linspace(0, 1, 401)
    u = InitialData.from_samples(xs, np.sin(3 * xs))
    a = capacity_F0(phi, FamilySpec("FBB", d=1.0), u)
    # weight = x, offset = (0 + 0 + 1)/1 = 1; int (sin 3x + 1) x
    ref = (math.sin(3) - 3 * math.cos(3)) / 9 + 0.5
    assert a == pytest.approx(ref, rel=1e-8)
    with pytest.raises(ValueError):
        capacity_F0(phi, CH, InitialData.from_samples(xs[:-5], np.sin(xs[:-5])))


def test_fd_derivative_is_fourth_order():
    errs = []
    for n in (41, 81, 161):
        x = np.linspace(0, 1, n)
        errs.append(np.max(np.abs(fd_derivative(x, np.sin(2 * x)) - 2 * np.cos(2 * x))))
    assert np.log2(errs[0] / errs[1]) > 3.5 and np.log2(errs[1] / errs[2]) > 3.5


def test_gradient_burgers_F0():
    spec = FamilySpec("BURGERS_GRAD", nu=0.5, M=1.0)
    phi = TestFunction.parse("x^2")
    # v = -u' - u^2 / (2 nu) = -1 - x^2 for u = x
    assert capacity_F0(phi, spec, InitialData.parse("x")) == pytest.approx(-(1 / 3 + 1 / 5), rel=1e-13)


def test_boundary_models():
    assert BoundaryFunctional().lower_bound() == 0.0
    s = BoundaryFunctional("series", 0.0, (0.0, 1.0, 2.0), (3.0, 1.5, 2.0))
    assert s.lower_bound() == 1.5 and s.scaled(2.0).lower_bound() == 3.0
    with pytest.raises(ValueError):
        BoundaryFunctional("series", 0.0, (0.0,), ())
    with pytest.raises(ValueError):
        BoundaryFunctional("tidal")


def test_certificate_json_shape():
    d = cert("x", CH, "0", BoundaryFunctional.constant(2 / 3)).as_dict()
    assert d["schema_version"] == 1 and d["status"] == CERTIFIED
    assert set(d["window"]) >= {"lower", "upper"}
    assert d["provenance"]["theta1"].startswith("adaptive")


CERT_CASES = [
    ("x-1", ROSENAU, "-3*(1-x)", 0.5),
    ("x", CH, "0", 2 / 3),
    ("x", FamilySpec("FBB", b=1.0, d=1.0), "x+1", 0.5),
    ("x^2", FamilySpec("OST", a=1.0, b=-1.0), "0", 1.0),
    ("x", FamilySpec("CH", b=4.0, c=3.0, d=1.0, kappa=1.0), "x", 0.5),
]


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from(CERT_CASES),
    st.floats(min_value=1e-2, max_value=1e2),
    st.floats(min_value=-2.0, max_value=2.0),
    st.sampled_from([0.3, 0.7, 1.0]),
)
def test_status_and_window_are_scale_invariant(case, lam, shift, alpha):
    text, spec, u0, bound = case
    phi = TestFunction.parse(text)
    data = InitialData.parse(f"{u0} + {shift!r}" if shift >= 0 else f"{u0} - {-shift!r}")
    b = BoundaryFunctional.constant(bound)
    a = build_certificate(phi, spec, data, b, alpha)
    s = build_certificate(phi.scaled(lam), spec, data, b.scaled(lam), alpha)
    assert a.status == s.status
    if a.certified:
        assert s.window.lower == pytest.approx(a.window.lower, rel=1e-12)
        assert s.window.upper == pytest.approx(a.window.upper, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["x", "x-1", "x^2", "-exp(-x)", "1-exp(-x)", "x^3+x"]),
    st.sampled_from(
        [ROSENAU, CH, MKDV_EXP, FamilySpec("FBB", d=1.0), FamilySpec("OST", a=1.0), FamilySpec("MKDV", b=1.0)]
    ),
    st.floats(min_value=-3, max_value=3),
    st.floats(min_value=-2, max_value=2),
)
def test_status_is_exhaustive_and_consistent(phi, spec, k, bound):
    c = build_certificate(
        TestFunction.parse(phi), spec, InitialData.parse(f"{k!r}*x" if k >= 0 else f"-{-k!r}*x"),
        BoundaryFunctional.constant(bound), 0.5,
    )
    assert c.status in (CERTIFIED, HYPOTHESES_FAIL, F0_NONPOSITIVE)
    hyp = all(h.passed for h in c.hypothesis_verdicts) and c.phi_minus_theta1_nonneg["passed"]
    if c.status == CERTIFIED:
        assert hyp and c.F0 > 0 and c.window.lower < c.window.upper
    elif c.status == F0_NONPOSITIVE:
        assert hyp and not c.F0 > 0
    else:
        assert not hyp
