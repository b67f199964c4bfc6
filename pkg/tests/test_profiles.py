import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinfb.profiles import (
    ProfileParams,
    eval_U,
    eval_profile,
    grad_U,
    grad_U_sq,
    is_strict_subsolution,
    is_strict_supersolution,
    sample_profiles,
    shift_to_match,
)
from thinfb.geometry import make_grid
from thinfb.solver import laplacian

coord = st.floats(-10, 10, allow_nan=False)


def test_U_examples():
    assert eval_U(1.0, 0.0) == pytest.approx(1.0)
    assert eval_U(-1.0, 0.0) == 0.0
    assert eval_U(0.0, 1.0) == pytest.approx(math.cos(math.pi / 4))


def test_profile_examples():
    prof = ProfileParams(xi=(1.0, 0.0))
    np.testing.assert_allclose(eval_profile(prof, np.array([1.0, 0.0])), [1.0, 0.0])
    at_fb = eval_profile(ProfileParams(shift=0.25, xi=(1.0, 0.0)), np.array([0.25, 0.0]))
    assert not np.any(at_fb)
    X = np.array([[0.3, 0.1], [-0.2, 0.4]])
    np.testing.assert_allclose(
        eval_profile(ProfileParams(alpha=2.0, xi=(0.0, 1.0)), X), 2 * eval_profile(ProfileParams(xi=(0.0, 1.0)), X)
    )


def test_grad_U_sq_examples():
    assert grad_U_sq(np.array([0.6, 0.8])) == pytest.approx(0.25)
    assert grad_U_sq(np.array([0.25, 0.0])) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        grad_U_sq(np.array([0.0, 0.0]))


def test_comparison_flags():
    assert is_strict_subsolution(ProfileParams(kind="comparison", alpha=1.1))
    assert not is_strict_supersolution(ProfileParams(kind="comparison", alpha=1.1))
    assert is_strict_supersolution(ProfileParams(kind="comparison", alpha=0.9))
    one = ProfileParams(kind="comparison", alpha=1.0)
    assert not is_strict_subsolution(one) and not is_strict_supersolution(one)
    with pytest.raises(ValueError):
        is_strict_subsolution(ProfileParams(alpha=1.1))


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(nu=(0.5,)), dict(xi=(1.0, 1.0)), dict(kind="other")])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        ProfileParams(**kw)


def test_params_dict_round_trip():
    prof = ProfileParams(kind="comparison", alpha=0.7, nu=(0.6, 0.8), shift=0.1, xi=(0.0, 1.0))
    assert ProfileParams.from_dict(prof.to_dict()) == prof


@settings(max_examples=200, deadline=None)
@given(t=coord, s=coord, lam=st.floats(1e-3, 1e3))
def test_U_half_homogeneous(t, s, lam):
    assert eval_U(lam * t, lam * s) == pytest.approx(math.sqrt(lam) * eval_U(t, s), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(1e-8, 1e6))
def test_U_slope_on_positive_axis(t):
    assert eval_U(t, 0.0) / math.sqrt(t) == pytest.approx(1.0, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(t=coord, s=coord)
def test_U_even_and_nonnegative(t, s):
    assert eval_U(t, s) == eval_U(t, -s)
    assert eval_U(t, s) >= 0.0


@settings(max_examples=100, deadline=None)
@given(t=st.floats(-2, 2), s=st.floats(0.05, 2))
def test_grad_U_matches_finite_differences(t, s):
    d = 1e-6
    gt, gs = grad_U(t, s)
    assert gt == pytest.approx((eval_U(t + d, s) - eval_U(t - d, s)) / (2 * d), rel=1e-5, abs=1e-6)
    assert gs == pytest.approx((eval_U(t, s + d) - eval_U(t, s - d)) / (2 * d), rel=1e-5, abs=1e-6)
    assert gt**2 + gs**2 == pytest.approx(float(grad_U_sq(np.array([t, s]))), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-1, 1), y=st.floats(-1, 1), c=st.floats(-0.5, 0.5))
def test_shift_to_match_inverts_translation(x, y, c):
    v = eval_U(x + c, y)
    if v < 1e-3:
        return
    assert shift_to_match(v, x, y) == pytest.approx(c, abs=1e-8)


def test_sampled_U_is_discretely_harmonic_away_from_tip():
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = make_grid(1, 1, h, 1)
        F = sample_profiles(g, ProfileParams(xi=(1.0,)))
        lap = laplacian(F.values)[0] / h**2
        x, y = g.axis(0), g.axis(1)
        i, j = int(np.argmin(np.abs(x - 0.25))), int(np.argmin(np.abs(y - 0.25)))
        errs.append(abs(lap[i, j]))
        # at the tip the defect is O(h^{1/2}) in units of the grid (5-point stencil times h^2)
        tip = abs(laplacian(F.values)[0][int(np.argmin(np.abs(x))), 1])
        assert tip <= 2 * math.sqrt(h)
    # second-order decay at a fixed distance from the tip
    assert errs[1] < errs[0] / 3 and errs[2] < errs[1] / 3


def test_sample_profiles_dimension_check():
    g = make_grid(1, 2, 1 / 8, 1)
    with pytest.raises(ValueError):
        sample_profiles(g, ProfileParams(xi=(1.0,)))
