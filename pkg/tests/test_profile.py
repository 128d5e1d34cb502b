import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import profile_slope_bvp
from skyrmion_lab.numerics import RadialGrid
from skyrmion_lab.profile import (ProfileError, classify_slope, ode_residual, series_coefficient,
                                  shooting_scan, solve_profile, verify_profile)

# slopes from an independent collocation solve (tests/oracles.py)
SLOPES = {1.5: 2.40277, 4.0: 9.61263, 20.0: 83.69726, 50.0: 267.42304, 100.0: 625.14037}


@pytest.fixture(scope="module")
def profiles(profile20, profile50):
    return {20.0: profile20, 50.0: profile50, 100.0: solve_profile(100.0)}


@pytest.mark.parametrize("h", [1.5, 4.0])
def test_slope_small_fields(h):
    assert solve_profile(h).slope == pytest.approx(SLOPES[h], rel=2e-6)


@pytest.mark.parametrize("h", [20.0, 50.0, 100.0])
def test_slope_matches_oracle(profiles, h):
    assert profiles[h].slope == pytest.approx(SLOPES[h], rel=2e-6)


def test_oracle_agrees_live():
    assert solve_profile(4.0).slope == pytest.approx(profile_slope_bvp(4.0), rel=1e-6)


@pytest.mark.parametrize("h", [20.0, 50.0, 100.0])
def test_tail_rate(profiles, h):
    assert -profiles[h].tail_rate == pytest.approx(np.sqrt(h), rel=0.02)


@pytest.mark.parametrize("h", [20.0, 50.0, 100.0])
def test_slope_is_not_half_field(profiles, h):
    # the connecting slope grows faster than h/2
    assert profiles[h].slope > 0.6 * h


@pytest.mark.parametrize("h", [20.0, 50.0, 100.0])
def test_converged_residual(profiles, h):
    p = profiles[h]
    assert np.max(np.abs(ode_residual(p, scaled=True))) <= 1e-8 * h
    assert p.residual <= 1e-8 * h


def test_profile_shape(profile50):
    p = profile50
    assert p.theta[0] == pytest.approx(np.pi - p.slope * p.grid.r0, abs=1e-12)
    assert p.theta[-1] < 1e-12
    assert np.all(np.diff(p.theta) < 0)
    assert np.all(p.theta_prime < 0)


def test_core_matches_series(profile50):
    p = profile50
    r = p.r[:200]
    c = series_coefficient(p.slope, p.h)
    phi = p.slope * r + c * r**3
    np.testing.assert_allclose(p.co_theta[:200], phi, rtol=1e-8)


def test_series_coefficient_formula():
    s, h = 3.0, 5.0
    assert series_coefficient(s, h) == pytest.approx((2 * s * s - h * s - 2 * s**3 / 3) / 8)


def test_grid_independence(profile50):
    fine = solve_profile(50.0, profile50.grid.refined())
    assert fine.slope == pytest.approx(profile50.slope, rel=1e-7)


@pytest.mark.parametrize("h, tol", [(1.0, 1e-8), (0.5, 1e-8), (50.0, 1e-3), (50.0, 1e-14)])
def test_solve_rejects(h, tol):
    with pytest.raises(ValueError):
        solve_profile(h, tol=tol)


def test_bracket_failure_on_truncated_domain():
    # a domain far shorter than the core cannot produce a connecting orbit
    grid = RadialGrid.log_uniform(0.02, 512, 1e-6)
    with pytest.raises(ProfileError):
        solve_profile(50.0, grid)


@pytest.mark.parametrize("factor, outcome", [(0.9, "undershoot"), (1.1, "overshoot")])
def test_classify_around_slope(profile50, factor, outcome):
    assert classify_slope(factor * profile50.slope, 50.0) == outcome


def test_scan_single_transition():
    scan = shooting_scan(50.0, (50.0 / 8, 8 * 50.0))
    assert scan.transitions == 1 and scan.monotone
    assert len(scan) == 64


def test_scan_narrow_window_has_no_transition():
    assert shooting_scan(50.0, (20.0, 30.0), samples=32).transitions == 0


def test_scan_rejects_few_samples():
    with pytest.raises(ValueError, match="at least 32"):
        shooting_scan(50.0, (1.0, 2.0), samples=8)


@pytest.mark.parametrize("h", [20.0, 50.0, 100.0])
def test_estimates(profiles, h):
    d = verify_profile(profiles[h])
    names = {v.estimate for v in d.violations}
    assert "theta_cos" not in names and d.cos_margin > 0
    assert "theta_sin" not in names and d.sin_margin >= -1e-10
    assert "core_radius" not in names and d.core_radius < d.core_bound
    # the bound h > 1.5 sin(theta)/r fails next to the origin, where it tends to h - 1.5 s
    assert "theta_h" in names
    v = next(v for v in d.violations if v.estimate == "theta_h")
    assert v.node == 0
    assert v.margin == pytest.approx(h - 1.5 * profiles[h].slope, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 0.99), st.floats(1e-6, 0.99))
def test_interpolant_monotone(profile50, a, b):
    R = profile50.grid.R
    lo, hi = sorted((a * R, b * R))
    ta, tb = profile50.theta_at(np.array([lo, hi]))
    assert ta >= tb - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-8, 1.0))
def test_interpolant_range(profile50, x):
    th = profile50.theta_at(np.array([x * profile50.grid.R]))[0]
    assert -1e-12 <= th <= np.pi + 1e-12


def test_residual_of_trivial_and_perturbed(profile50):
    from dataclasses import replace
    zero = replace(profile50, theta=np.zeros(profile50.grid.n), theta_prime=np.zeros(profile50.grid.n),
                   co_theta=None)
    assert np.all(ode_residual(zero) == 0.0)
    bumped = replace(profile50, theta=profile50.theta + 0.01 * np.sin(profile50.r), co_theta=None)
    res = np.abs(ode_residual(bumped, scaled=True))
    assert np.sum(res > 1e-4) > 100


def test_origin_limits_agree(profile50):
    p = profile50
    a = p.sin_theta[0] / p.r[0]
    b = -p.theta_prime[0]
    assert a == pytest.approx(b, rel=1e-2)
    assert a == pytest.approx(p.slope, rel=1e-6)


@pytest.mark.parametrize("h", [17.1, 80.0])
def test_monotone_and_core_bound(h):
    p = solve_profile(h)
    assert np.all(np.diff(p.theta) < 0)
    assert np.all((p.theta[1:-1] > 0) & (p.theta[1:-1] < np.pi))
    assert p.core_radius < 2.0 / np.sqrt(h - 1.0)


@pytest.mark.parametrize("s, outcome", [(50.0, "undershoot"), (50.0 / 8, "undershoot"), (600.0, "overshoot")])
def test_classify_fixed_slopes(s, outcome):
    # at h = 50 the connecting slope is about 267, so s = h still undershoots
    assert classify_slope(s, 50.0) == outcome
