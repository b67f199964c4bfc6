import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from thinfb.analysis import (
    ClassifyThresholds,
    PreconditionError,
    best_flatness,
    classify,
    component_structure,
    density_ratio,
    domain_variation,
    extract_fb,
    flatness,
    harnack_decay,
    holder_fit,
    iof_check,
    nondeg_fit,
    refine_fb,
    slope,
)
from thinfb.geometry import VectorField, make_grid
from thinfb.profiles import ProfileParams, eval_U, sample_profiles

H = 1 / 128


# ---------------------------------------------------------------- free boundary and density


@settings(max_examples=15, deadline=None)
@given(shift=st.floats(-0.2, 0.2), alpha=st.floats(0.3, 2.0))
def test_refine_fb_locates_translated_U(desk_grid, shift, alpha):
    # the sub-cell estimate lands within a small fraction of a cell of the true root
    G = sample_profiles(desk_grid, ProfileParams(alpha=alpha, shift=shift, xi=(1.0, 0.0)))
    fb = extract_fb(G.mask, desk_grid)
    ref = refine_fb(G, fb)
    assert abs(ref.points[0, 0] - shift) <= 0.1 * H
    assert abs(ref.points[0, 0] - fb.points[0, 0]) <= 2 * H
    np.testing.assert_array_equal(ref.normals, fb.normals)


def test_extract_fb_examples(desk_grid):
    x = desk_grid.plate_points()[..., 0]
    fb = extract_fb(x > 0, desk_grid)
    assert len(fb) == 1 and abs(fb.points[0, 0]) <= H / 2 and fb.normals[0, 0] == 1.0
    fb = extract_fb(x > 0.25, desk_grid)
    assert abs(fb.points[0, 0] - 0.25) <= H / 2
    fb = extract_fb(x < -0.25, desk_grid)
    assert fb.normals[0, 0] == -1.0
    for bad in (np.ones_like(x, bool), np.zeros_like(x, bool)):
        with pytest.raises(ValueError):
            extract_fb(bad, desk_grid)


def test_extract_fb_plane_in_two_dimensions():
    g = make_grid(2, 1, 1 / 16, 1)
    P = g.plate_points()
    a = math.radians(30)
    nu = np.array([math.cos(a), math.sin(a)])
    fb = extract_fb(P @ nu > 0.1, g)
    assert len(fb) > 10
    inner = fb.within(g, 0.3)
    assert np.abs(inner.points @ nu - 0.1).max() <= g.h
    assert np.degrees(np.arccos(np.clip(inner.normals @ nu, -1, 1))).max() <= 5


def test_density_examples(desk_grid):
    x = desk_grid.plate_points()[..., 0]
    for r in (8 * H, 1 / 16, 1 / 4):
        assert density_ratio(x > 0, desk_grid, (0.0,), r) == pytest.approx(0.5, abs=2 * H / r)
    assert density_ratio(np.ones_like(x, bool), desk_grid, (0.1,), 0.25) == 1.0


@settings(max_examples=50, deadline=None)
@given(c=st.floats(-0.3, 0.3), r=st.floats(8 * H, 0.5), seed=st.integers(0, 2**16))
def test_density_in_unit_interval_and_complementary(c, r, seed):
    g = make_grid(1, 1, H, 1)
    mask = np.random.default_rng(seed).random(g.plate_shape) > 0.5
    a = density_ratio(mask, g, (c,), r)
    b = density_ratio(~mask, g, (c,), r)
    assert 0.0 <= a <= 1.0
    assert a + b == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------- growth


def test_growth_fits_on_U(U_field):
    for fit in (holder_fit(U_field, (0.0,)), nondeg_fit(U_field, (0.0,))):
        assert fit.slope == pytest.approx(0.5, abs=0.02)
        assert fit.constant == pytest.approx(1.0, rel=0.05)
    a, b = holder_fit(U_field.scaled(2.0), (0.0,)), holder_fit(U_field, (0.0,))
    assert a.slope == pytest.approx(b.slope) and a.constant == pytest.approx(2 * b.constant)


def test_growth_fit_needs_three_resolved_radii(U_field):
    with pytest.raises(ValueError):
        holder_fit(U_field, (0.0,), (1 / 8, 1 / 4))
    with pytest.raises(ValueError):
        nondeg_fit(U_field, (0.0,), (2 * H, 1 / 8, 1 / 4))


# ---------------------------------------------------------------- flatness


def test_flatness_of_U(U_field):
    f = flatness(U_field, (0.0,), 0.5, (1.0, 0.0), (1.0,))
    assert f.eps <= 1e-12
    best = best_flatness(U_field, (0.0,), 0.5)
    assert best.eps <= 1e-12 and best.nu == (1.0,) and best.f == pytest.approx((1.0, 0.0))


def test_flatness_of_translate(desk_grid):
    # sup over the unit ball of |U(X - t e_n) - U(X)| is sqrt(t), t = 0.1 / rho, reached on the plate at x = t;
    # the nearest lattice node can sit one unit-scale cell short of it
    rho = 0.5
    t = 0.1 / rho
    T = sample_profiles(desk_grid, ProfileParams(shift=0.1, xi=(1.0, 0.0)))
    eps = best_flatness(T, (0.0,), rho).eps
    assert math.sqrt(t - H / rho) - 1e-12 <= eps <= math.sqrt(t) + 1e-12
    assert eps == pytest.approx(0.4330127018922193, abs=1e-12)


def test_flatness_island_term(U_field):
    G = U_field.copy()
    x = G.grid.plate_coords()[0]
    G.mask[int(np.argmin(np.abs(x + 0.2)))] = True
    f = best_flatness(G, (0.0,), 0.5)
    assert f.zero_term >= 0.2 / 0.5 - H
    assert f.eps >= f.zero_term


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(0.2, 5.0), a=st.floats(0, 2 * math.pi))
def test_flatness_invariant_under_amplitude_and_frame(alpha, a):
    g = make_grid(1, 2, 1 / 32, 1)
    xi = (math.cos(a), math.sin(a))
    F = sample_profiles(g, ProfileParams(alpha=alpha, shift=0.05, xi=xi))
    ref = sample_profiles(g, ProfileParams(shift=0.05, xi=(1.0, 0.0)))
    assert best_flatness(F, (0.0,), 0.5, alpha).eps == pytest.approx(best_flatness(ref, (0.0,), 0.5).eps, abs=1e-9)


# ---------------------------------------------------------------- domain variation


def dv_points(g, radius=0.5):
    X = g.points()
    sel = (np.linalg.norm(X, axis=-1) <= radius) & ~((X[..., 1] == 0) & (X[..., 0] <= 0))
    return X[sel]


def test_domain_variation_of_U_and_translates(desk_grid):
    P = dv_points(desk_grid)
    dv = domain_variation(lambda X: eval_U(X[..., 0], X[..., 1]), 0.05, P)
    assert np.abs(dv.w).max() <= 1e-12 and dv.monotone
    dv = domain_variation(lambda X: eval_U(X[..., 0] + 0.03, X[..., 1]), 0.05, P)
    assert np.abs(dv.w - 0.03).max() <= 1e-12


def test_domain_variation_untrapped_rejected(desk_grid):
    P = dv_points(desk_grid)
    with pytest.raises(ValueError):
        domain_variation(lambda X: eval_U(X[..., 0] + 0.2, X[..., 1]), 0.05, P)


@settings(max_examples=25, deadline=None)
@given(
    amp=st.floats(0.0, 1.0), freq=st.floats(0.5, 4.0), phase=st.floats(0, 2 * math.pi),
    lo=st.floats(-1.0, 1.0), hi=st.floats(-1.0, 1.0),
)
def test_domain_variation_trapping(amp, freq, phase, lo, hi):
    # tau ranges over [eps*a, eps*b]; then a <= w/eps <= b at every evaluated point
    assume(hi - lo > 0.05)
    a, b = min(lo, hi), max(lo, hi)
    eps = 0.05
    g = make_grid(1, 2, 1 / 32, 1)
    P = dv_points(g)

    def tau(x):
        s = 0.5 * (1 + amp * np.sin(2 * math.pi * freq * x + phase))
        return eps * (a + (b - a) * s)

    dv = domain_variation(lambda X: eval_U(X[..., 0] + tau(X[..., 0]), X[..., 1]), eps, P)
    assert np.all(dv.w >= eps * a - 1e-12) and np.all(dv.w <= eps * b + 1e-12)


def test_domain_variation_on_sampled_grid_data(desk_grid):
    eps = 0.05

    def tau(x):
        return 0.04 * np.sin(2 * math.pi * x)

    X = desk_grid.points()
    vals = eval_U(X[..., 0] + tau(X[..., 0]), X[..., 1])
    P = dv_points(desk_grid, 0.45)
    P = P[eval_U(P[:, 0], P[:, 1]) > 0]
    dv = domain_variation((desk_grid, vals), eps, P)
    assert np.abs(dv.w - tau(P[:, 0])).max() <= 2 * math.sqrt(H)


# ---------------------------------------------------------------- slope


def test_slope_examples(U_field, desk_grid):
    assert slope(U_field, (0.0,), (1.0,)) == pytest.approx(1.0, abs=0.05)
    F = sample_profiles(desk_grid, ProfileParams(alpha=0.7, xi=(1.0, 0.0)))
    assert slope(F, (0.0,), (1.0,)) == pytest.approx(0.7, abs=0.05)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.01, 100.0))
def test_slope_linear(lam, U_field):
    assert slope(U_field.scaled(lam), (0.0,), (1.0,)) / lam == pytest.approx(slope(U_field, (0.0,), (1.0,)), rel=1e-12)


def test_slope_constant_across_minimizers(desk):
    vals = []
    for st in desk.states.values():
        fb = extract_fb(st.mask, st.G.grid)
        vals += [slope(st.G, p, nv) for p, nv in zip(fb.points, fb.normals)]
    assert (max(vals) - min(vals)) <= 0.1 * desk.A


# ---------------------------------------------------------------- harnack, iof, components


def test_harnack_examples(U_field, desk_grid):
    scales = [0.5, 0.25, 0.125, 0.0625]
    assert max(harnack_decay(U_field, (0.0,), scales).widths) <= 1e-9
    T = sample_profiles(desk_grid, ProfileParams(shift=0.01, xi=(1.0, 0.0)))
    assert max(harnack_decay(T, (0.01,), scales).widths) <= 1e-9


def test_harnack_decay_on_flat_minimizers(desk):
    for st in desk.states.values():
        p = extract_fb(st.mask, st.G.grid).points[0]
        rep = harnack_decay(st.G, p, [0.5, 0.25, 0.125, 0.0625], desk.A)
        assert len(rep.widths) >= 3 and rep.eta > 0


def test_iof_examples(U_field, desk_grid):
    assert iof_check(U_field, (0.0,), 1 / 8).passed
    T = sample_profiles(desk_grid, ProfileParams(shift=0.1, xi=(1.0, 0.0)))
    with pytest.raises(PreconditionError):
        iof_check(T, (0.0,), 1 / 8)


def test_component_structure_on_U(U_field):
    rep = component_structure(U_field, (0.0,))
    assert rep.g1_positive and rep.C_hat == 0.0


def test_component_structure_detects_orthogonal_part(desk_grid):
    G = sample_profiles(desk_grid, [ProfileParams(xi=(1.0, 0.0)), ProfileParams(alpha=0.02, shift=0.02, xi=(0.0, 1.0))])
    rep = component_structure(G, (0.0,))
    assert rep.g1_positive and 0 < rep.C_hat < math.inf


# ---------------------------------------------------------------- classification


def test_classify_halfplane_regular(U_field):
    assert classify(U_field, (0.0,), 1.0).label == "regular"


def test_classify_three_quarter_plane_singular():
    g = make_grid(2, 2, 1 / 32, 1.0)
    G = sample_profiles(g, ProfileParams(nu=(1.0, 0.0), xi=(1.0, 0.0)))
    P = g.plate_points()
    G.mask[:] = ~((P[..., 0] < 0) & (P[..., 1] < 0))
    c = classify(G, (0.0, 0.0), 1.0)
    assert c.label == "singular"
    assert min(c.densities) >= 0.55


def test_classify_noisy_point_unresolved(U_field):
    g = U_field.grid
    X = g.points()
    G = U_field.copy()
    G.values[1] += 0.3 * eval_U(-X[..., 0] - 0.3, X[..., 1])
    x = g.plate_coords()[0]
    for off, val in ((-5, True), (-6, True), (12, False)):
        G.mask[int(np.argmin(np.abs(x - off * H)))] = val
    c = classify(G, (0.0,), 1.0)
    assert 0.5 < c.densities[1] < 0.55 < c.densities[0]
    assert c.label == "unresolved"


def test_classify_thresholds_are_configurable(U_field):
    strict = ClassifyThresholds(fit_factor=1e-6)
    assert classify(U_field, (0.0,), 1.0, strict).label == "unresolved"
    assert ClassifyThresholds().to_dict()["scales"] == [0.25, 0.125, 0.0625]


def test_estimated_A_is_a_fixed_point_of_the_slope(desk, desk_grid):
    st = desk.states["translated"]
    fb = extract_fb(st.mask, desk_grid)
    assert slope(st.G, fb.points[0], fb.normals[0]) == pytest.approx(desk.A, rel=0.01)
