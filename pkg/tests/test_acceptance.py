"""Acceptance suite at desk scale: n=1, m=2, h=1/128, extent 1.

Each test checks one numbered criterion against its stated tolerance and
records a single pass/fail line, printed in the terminal summary.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from thinfb.analysis import (
    classify,
    component_structure,
    density_ratio,
    domain_variation,
    extract_fb,
    holder_fit,
    iof_check,
    nondeg_fit,
    refine_fb,
    slope,
    best_flatness,
)
from thinfb.blowup import blowup_series
from thinfb.energy import energy, scaling_check
from thinfb.fieldio import decode_field, encode_field, read_field, write_field
from thinfb.geometry import Ball, make_grid
from thinfb.pipeline import DiagnosticsConfig, load_config, run_diagnose, run_solve
from thinfb.profiles import eval_U
from thinfb.weiss import weiss_series, weiss_value

H = 1 / 128
CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def desk_points(desk):
    """Per configuration: extracted free boundary points, their normals and sub-cell centres."""
    margin = DiagnosticsConfig().resolved_margin(H)
    out = {}
    for name, st in desk.states.items():
        fb = extract_fb(st.mask, st.G.grid).within(st.G.grid, margin)
        out[name] = (fb.points, fb.normals, refine_fb(st.G, fb).points)
    return out


@pytest.fixture(scope="module")
def labels(desk, desk_points):
    return {
        name: [classify(desk.states[name].G, c, desk.A).label for c in desk_points[name][2]]
        for name in desk.states
    }


def test_criterion_1_U_profile(U_field, record_criterion):
    t0 = time.perf_counter()
    e = energy(U_field, Ball((0.0,), 0.5))
    W = [weiss_value(U_field, None, (0.0,), r) for r in (1 / 8, 1 / 4, 1 / 2)]
    a = slope(U_field, (0.0,), (1.0,))
    seconds = time.perf_counter() - t0
    errs = {
        "dirichlet_upper": abs(e.dirichlet_upper - math.pi / 8),
        "plate_measure": abs(e.plate_measure - 0.5),
        "boundary_l2": abs(e.boundary_l2 - math.pi / 4),
    }
    ok = max(errs.values()) <= 5 * H and max(abs(w - 1) for w in W) <= 5 * H and abs(a - 1) <= 0.05 and seconds < 30
    detail = f"max part error {max(errs.values()):.2e}, W {['%.5f' % w for w in W]}, slope {a:.4f}, {seconds:.1f}s"
    assert record_criterion("1", ok, detail), detail


def test_criterion_2_weiss_monotonicity(desk, desk_points, record_criterion):
    assert len(desk.states) >= 3
    t0 = time.perf_counter()
    fails, count = [], 0
    for name, st in desk.states.items():
        pts = desk_points[name][0]
        assert len(pts), name
        for p in pts:
            count += 1
            ws = weiss_series(st.G, None, p, 8 * H, 1 / 4, 5, 5 * H, 10 * H)
            if ws.violations() or ws.bound_violations():
                fails.append((name, float(p[0]), ws.violations(), ws.bound_violations()))
    seconds = desk.seconds + time.perf_counter() - t0
    ok = not fails and seconds < 300
    detail = f"{count} points over {len(desk.states)} configurations, failures {fails}, {seconds:.0f}s"
    assert record_criterion("2", ok, detail), detail


def test_criterion_3_scaling_identity(desk, desk_points, U_field, record_criterion):
    cases = [("translated", desk.states["translated"].G, tuple(desk_points["translated"][0][0])), ("U", U_field, (0.0,))]
    diffs = []
    for name, G, x0 in cases:
        for r, R in ((1 / 2, 1 / 2), (1 / 4, 1 / 2)):
            lhs, rhs = scaling_check(G, x0, r, R)
            diffs.append(abs(lhs - rhs))
    ok = max(diffs) <= 10 * H
    detail = f"max |lhs - rhs| = {max(diffs):.2e} (tol {10 * H:.2e})"
    assert record_criterion("3", ok, detail), detail


def test_criterion_4_density(desk, desk_points, labels, record_criterion):
    radii = [8 * H * 2**k for k in range(6) if 8 * H * 2**k <= 1 / 4 + 1e-12]
    fails, lo, hi, reg = [], 1.0, 0.0, []
    for name, st in desk.states.items():
        for p, label in zip(desk_points[name][0], labels[name]):
            dens = [density_ratio(st.mask, st.G.grid, p, r) for r in radii]
            lo, hi = min(lo, *dens), max(hi, *dens)
            if not all(0.05 <= d <= 0.95 for d in dens):
                fails.append((name, dens))
            if label == "regular":
                reg.append(dens[0])
                if not 0.45 <= dens[0] <= 0.55:
                    fails.append((name, "regular", dens[0]))
    ok = not fails and bool(reg)
    detail = f"density range [{lo:.3f}, {hi:.3f}], regular smallest-radius {['%.3f' % d for d in reg]}"
    assert record_criterion("4", ok, detail), detail


def test_criterion_5_regularity_nondegeneracy(desk, desk_points, record_criterion):
    radii = (1 / 16, 1 / 8, 1 / 4)
    slopes, fails = [], []
    for name, st in desk.states.items():
        for p in desk_points[name][0]:
            hf, nf = holder_fit(st.G, p, radii), nondeg_fit(st.G, p, radii)
            slopes += [hf.slope, nf.slope]
            if not (0.45 <= hf.slope <= 0.55 and 0.45 <= nf.slope <= 0.55 and nf.constant > 0):
                fails.append((name, hf.slope, nf.slope, nf.constant))
    ok = not fails
    detail = f"slopes in [{min(slopes):.4f}, {max(slopes):.4f}], failures {fails}"
    assert record_criterion("5", ok, detail), detail


def test_criterion_6_vectorial_structure(desk, desk_points, record_criterion):
    flat, fails, Cs = 0, [], []
    for name, st in desk.states.items():
        for p in desk_points[name][0]:
            if best_flatness(st.G, p, 0.5, desk.A).eps > 0.1:
                continue
            flat += 1
            rep = component_structure(st.G, p, desk.A)
            Cs.append(rep.C_hat)
            if not (rep.g1_positive and rep.C_hat <= 20):
                fails.append((name, rep.g1_min, rep.C_hat))
    ok = flat > 0 and not fails
    detail = f"{flat} flat points, C_hat max {max(Cs, default=math.nan):.3f}, failures {fails}"
    assert record_criterion("6", ok, detail), detail


def test_criterion_7_blowup_homogeneity(desk, desk_points, labels, record_criterion):
    regular, fails, seen = 0, [], []
    for name, st in desk.states.items():
        for c, label in zip(desk_points[name][2], labels[name]):
            if label != "regular":
                continue
            regular += 1
            bs = blowup_series(st.G, c, (1 / 4, 1 / 8, 1 / 16))
            seen.append([round(d, 5) for d in bs.dist])
            if not bs.nonincreasing or bs.fits[-1].dist_inf > 0.1 * desk.A:
                fails.append(name)
    ok = regular > 0 and not fails
    detail = f"{regular} regular points, dist_inf per point {seen}, failing {fails}"
    assert record_criterion("7", ok, detail), detail


def test_criterion_8_improvement_of_flatness(desk, desk_points, labels, record_criterion):
    tested, fails = 0, []
    for name, st in desk.states.items():
        for p, label in zip(desk_points[name][0], labels[name]):
            if label != "regular" or best_flatness(st.G, p, 0.5, desk.A).eps > 0.1:
                continue
            rep = iof_check(st.G, p, 1 / 8, desk.A)
            tested += 1
            assert rep.tolerance == pytest.approx(4 * math.sqrt(H))
            if not rep.passed:
                fails.append((name, rep.eps_before, rep.eps_after))
    frac = 1 - len(fails) / tested if tested else 0.0
    ok = tested > 0 and frac >= 0.9
    detail = f"{tested} flat regular points, pass fraction {frac:.2f}, failures {fails}"
    assert record_criterion("8", ok, detail), detail


def test_criterion_8_failures_are_enumerated_in_verdict(desk, tmp_path):
    verdict = run_diagnose(desk.states["perturbed"].G, DiagnosticsConfig(checks=["iof", "flatness", "classify"]), tmp_path)
    res = verdict["criteria"]["8"]
    assert "failures" in res and res["tested"] >= 1
    saved = json.loads((tmp_path / "verdict.json").read_text())
    assert saved["criteria"]["8"]["failures"] == res["failures"]


def test_criterion_9_domain_variation(desk_grid, record_criterion):
    X = desk_grid.points()
    sel = (np.linalg.norm(X, axis=-1) <= 0.5) & ~((X[..., 1] == 0) & (X[..., 0] <= 0))
    P = X[sel]
    worst, trapped = 0.0, True
    for amp, freq in ((0.03, 0.0), (0.04, 1.0), (0.02, 2.0)):
        def tau(x, amp=amp, freq=freq):
            return amp * np.cos(2 * math.pi * freq * x)

        eps = 0.05
        vals = eval_U(X[..., 0] + tau(X[..., 0]), X[..., 1])
        dv = domain_variation((desk_grid, vals), eps, P)
        worst = max(worst, float(np.abs(dv.w - tau(P[:, 0])).max()))
        # a = -eps <= w <= eps = b at every evaluated node, and the trace of g is trapped between the shifted profiles
        g0 = vals[sel]
        trapped &= bool(np.all(np.abs(dv.w) <= eps))
        trapped &= bool(np.all(eval_U(P[:, 0] - eps, P[:, 1]) <= g0 + 1e-12))
        trapped &= bool(np.all(g0 <= eval_U(P[:, 0] + eps, P[:, 1]) + 1e-12))
    ok = worst <= 2 * math.sqrt(H) and trapped
    detail = f"sup|w - tau| = {worst:.2e} (tol {2 * math.sqrt(H):.3f}), trapped {trapped}"
    assert record_criterion("9", ok, detail), detail


def test_criterion_10_determinism_and_persistence(desk, tmp_path, record_criterion):
    G = desk.states["rotated"].G
    dc = DiagnosticsConfig(checks=["weiss", "density", "regularity", "classify", "blowup"])
    run_diagnose(G, dc, tmp_path / "a")
    run_diagnose(G, dc, tmp_path / "b")
    same_verdict = (tmp_path / "a" / "verdict.json").read_bytes() == (tmp_path / "b" / "verdict.json").read_bytes()
    write_field(tmp_path / "g.thf", G)
    back = read_field(tmp_path / "g.thf")
    exact = (
        back.grid == G.grid
        and back.values.tobytes() == G.values.tobytes()
        and np.array_equal(back.mask, G.mask)
        and encode_field(decode_field(encode_field(G))) == encode_field(G)
    )
    ok = same_verdict and exact
    detail = f"identical verdict.json {same_verdict}, bit-exact round trip {exact}"
    assert record_criterion("10", ok, detail), detail


@pytest.mark.slow
def test_smoke_n2(tmp_path, record_criterion):
    cfg = load_config(CONFIGS / "smoke_n2.json")
    assert cfg.grid == make_grid(2, 2, 1 / 32, 1.0)
    res = run_solve(cfg, tmp_path)
    assert res.state.converged and res.state.mask.any() and not res.state.mask.all()
    verdict = run_diagnose(read_field(tmp_path / "field.thf"), cfg.diagnostics, tmp_path)
    crit = verdict["criteria"]
    ok = all(c["pass"] for c in crit.values()) and len(verdict["points"]) > 0
    passes = {k: c["pass"] for k, c in crit.items()}
    detail = f"n=2 h=1/32: {len(verdict['points'])} points, criteria {passes}"
    assert record_criterion("n2-smoke", ok, detail), detail
