import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracblow.blowup_ode import (
    HORIZON_REACHED,
    STEP_COLLAPSE,
    THRESHOLD_ESCAPE,
    solve_comparison_ode,
    tstar_window,
)
from fracblow.fracops import DomainError


def test_classical_window_is_exact():
    for u0 in (0.5, 1.0, 2.0, 5.0):
        w = tstar_window(1.0, u0)
        assert (w.lower, w.upper) == (1 / (4 * u0), 1 / u0)


def test_half_order_window():
    # Gamma(3/2)^2 = pi/4
    w = tstar_window(0.5, 1.0)
    assert w.lower == pytest.approx(math.pi / 64, rel=1e-12)
    assert w.upper == pytest.approx(math.pi / 4, rel=1e-12)


def test_window_needs_positive_data():
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            tstar_window(0.5, bad)


@given(st.floats(min_value=0.05, max_value=1.0), st.floats(min_value=1e-3, max_value=1e3))
def test_window_ordering_and_scaling(alpha, u0):
    w = tstar_window(alpha, u0)
    assert w.lower < w.upper
    # the two bounds differ by the fixed factor 4^(1/alpha)
    assert w.upper / w.lower == pytest.approx(4 ** (1 / alpha), rel=1e-9)
    # doubling u0 shrinks both ends by 2^(1/alpha)
    w2 = tstar_window(alpha, 2 * u0)
    assert w.upper / w2.upper == pytest.approx(2 ** (1 / alpha), rel=1e-9)


def test_classical_riccati_time():
    traj = solve_comparison_ode(1.0, 1.0)
    assert traj.detection_reason == THRESHOLD_ESCAPE
    assert traj.detected_tstar == pytest.approx(1.0, rel=0.02)


def test_trajectory_tracks_classical_solution():
    traj = solve_comparison_ode(1.0, 1.0, threshold=100.0)
    t, u = traj.times, traj.values
    early = t < 0.5
    assert np.allclose(u[early], 1 / (1 - t[early]), rtol=5e-3)


def test_larger_threshold_moves_detection_little():
    a = solve_comparison_ode(1.0, 1.0).detected_tstar
    b = solve_comparison_ode(1.0, 1.0, threshold=1e9).detected_tstar
    assert abs(a - b) < 1e-3


def test_tiny_data_hits_horizon():
    traj = solve_comparison_ode(0.5, 1e-8, horizon=1.0)
    assert traj.detection_reason == HORIZON_REACHED and traj.detected_tstar is None


def test_threshold_guard():
    with pytest.raises(DomainError):
        solve_comparison_ode(0.5, 1.0, threshold=10.0)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([0.3, 0.5, 0.7, 0.9, 1.0]), st.floats(min_value=0.2, max_value=10.0))
def test_detection_inside_window(alpha, u0):
    traj = solve_comparison_ode(alpha, u0)
    assert traj.detection_reason in (THRESHOLD_ESCAPE, STEP_COLLAPSE)
    assert traj.window.contains(traj.detected_tstar, rel=0.05)


def test_solution_is_increasing():
    traj = solve_comparison_ode(0.6, 2.0)
    assert np.all(np.diff(traj.values) > 0)


def test_dt_refinement_is_stable():
    coarse = solve_comparison_ode(0.7, 1.0).detected_tstar
    fine = solve_comparison_ode(0.7, 1.0, dt0=tstar_window(0.7, 1.0).upper * 1e-4).detected_tstar
    assert coarse == pytest.approx(fine, rel=0.02)
