import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinfb.energy import (
    ENERGY_COLUMNS,
    cell_energy,
    dirichlet_total,
    energy,
    extension_bound,
    homogeneous_extension,
    scaling_check,
    write_energy_csv,
)
from thinfb.geometry import Ball, VectorField, make_grid
from thinfb.profiles import ProfileParams, sample_profiles
from thinfb.weiss import weiss_value

H = 1 / 128


def zero_field(g):
    return VectorField(g, np.zeros((g.m,) + g.shape), np.zeros(g.plate_shape, bool))


def test_zero_field_energy(desk_grid):
    e = energy(zero_field(desk_grid), Ball((0.1,), 0.3))
    assert (e.dirichlet, e.plate_measure, e.total, e.boundary_l2) == (0, 0, 0, 0)


def test_U_energy_parts(U_field):
    e = energy(U_field, Ball((0.0,), 0.5))
    assert e.dirichlet == pytest.approx(math.pi * 0.5 / 2, abs=5 * H)
    assert e.dirichlet_upper == pytest.approx(math.pi / 8, abs=5 * H)
    assert e.plate_measure == pytest.approx(0.5, abs=5 * H)
    assert e.boundary_l2 == pytest.approx(math.pi * 0.25, abs=5 * H)
    assert e.total == pytest.approx(e.dirichlet + e.plate_measure)


def test_amplitude_scaling(U_field):
    b = Ball((0.0,), 0.5)
    e1, e2 = energy(U_field, b), energy(U_field.scaled(2.0), b)
    assert e2.dirichlet == pytest.approx(4 * e1.dirichlet, rel=1e-12)
    assert e2.boundary_l2 == pytest.approx(4 * e1.boundary_l2, rel=1e-12)
    assert e2.plate_measure == e1.plate_measure


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.01, 100.0), r=st.floats(0.1, 0.6))
def test_energy_quadratic_in_amplitude(lam, r):
    g = make_grid(1, 2, 1 / 32, 1)
    F = sample_profiles(g, ProfileParams(xi=(0.6, 0.8)))
    b = Ball((0.0,), r)
    e1, e2 = energy(F, b), energy(F.scaled(lam), b)
    assert e2.dirichlet == pytest.approx(lam**2 * e1.dirichlet, rel=1e-9)
    assert e2.boundary_l2 == pytest.approx(lam**2 * e1.boundary_l2, rel=1e-9)
    assert e2.plate_measure == e1.plate_measure


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_cell_energy_is_the_discrete_dirichlet_form(seed):
    # sum of cell energies equals (1/2) v.(-L v) for the reflected 5-point Laplacian
    g = make_grid(1, 1, 1 / 8, 1)
    v = np.random.default_rng(seed).normal(size=(1,) + g.shape)
    total = float(cell_energy(v, g.h).sum())
    diffs = np.sum(np.diff(v[0], axis=0) ** 2) + np.sum(np.diff(v[0], axis=1) ** 2)
    # each interior edge belongs to two cells, boundary edges to one, and each cell averages its edges
    assert total >= 0
    assert dirichlet_total(v, g.h) == pytest.approx(2 * total, rel=1e-12)
    assert total <= diffs * g.h ** (g.n - 1) + 1e-12


def test_green_identity_on_U(U_field):
    # dirichlet(B_r) = boundary_l2 / (2r) for a 1/2-homogeneous harmonic field
    for r in (0.25, 0.5):
        e = energy(U_field, Ball((0.0,), r))
        assert e.dirichlet == pytest.approx(e.boundary_l2 / (2 * r), abs=5 * H)


def test_weiss_equals_plate_measure_at_unit_radius():
    # needs B_1 strictly inside the box, so the box has half-width 2
    g = make_grid(1, 2, H, 2.0)
    F = sample_profiles(g, ProfileParams(xi=(0.0, 1.0)))
    W = weiss_value(F, None, (0.0,), 1.0)
    P = energy(F, Ball((0.0,), 1.0)).plate_measure
    assert W == pytest.approx(1.0, abs=5 * H)
    assert W == pytest.approx(P, abs=5 * H)


def test_refinement_reduces_U_energy_error():
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = make_grid(1, 2, h, 1)
        e = energy(sample_profiles(g, ProfileParams(xi=(1.0, 0.0))), Ball((0.0,), 0.5))
        errs.append(abs(e.dirichlet - math.pi / 4) + abs(e.plate_measure - 0.5) + abs(e.boundary_l2 - math.pi / 4))
    assert errs[0] > errs[1] > errs[2]


def test_scaling_check_examples(U_field, desk_grid):
    lhs, rhs = scaling_check(U_field, (0.0,), 1.0, 0.5)
    assert lhs == rhs
    for r, R in ((0.5, 0.5), (0.25, 0.5), (0.5, 0.25)):
        lhs, rhs = scaling_check(U_field, (0.0,), r, R)
        assert abs(lhs - rhs) <= 10 * H
        assert lhs == pytest.approx(math.pi * R / 2 + R, abs=10 * H)
    assert scaling_check(zero_field(desk_grid), (0.0,), 0.5, 0.5) == (0.0, 0.0)


def test_homogeneous_extension_fixed_point_and_quarter_radius(U_field):
    ext = homogeneous_extension(U_field, 0.5)
    assert np.abs(ext.values - U_field.values).max() <= math.sqrt(H)
    X = np.array([0.3, 0.4])
    v = U_field(X)[0]
    assert ext(X / np.linalg.norm(X) * 0.5 / 4)[0] == pytest.approx(0.5 * v, abs=2 * H)


def test_homogeneous_extension_energy_matches_trace_formula(U_field):
    ext = homogeneous_extension(U_field, 0.5)
    assert extension_bound(U_field, 0.5) == pytest.approx(energy(ext, Ball((0.0,), 0.5)).total, abs=10 * H)


def test_homogeneous_extension_competes_with_minimizer(desk):
    for st in desk.states.values():
        b = Ball((0.0,), 0.25)
        assert energy(homogeneous_extension(st.G, 0.25), b).total >= energy(st.G, b).total - 10 * H


def test_energy_csv(tmp_path, U_field):
    p = tmp_path / "energy.csv"
    write_energy_csv(p, [energy(U_field, Ball((0.0,), r)) for r in (0.25, 0.5)])
    rows = list(csv.reader(open(p)))
    assert rows[0] == ENERGY_COLUMNS == ["r", "dirichlet", "plate_measure", "total", "boundary_l2"]
    assert float(rows[2][0]) == 0.5
