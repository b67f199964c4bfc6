"""
The Weiss-type functional

    W(X0, G, r) = r^{-n} J(G, B_r(X0)) - (1/2) r^{-(n+1)} int_{dB_r(X0)} |G|^2,

its radial series, and the integrand that bounds its derivative from below,

    r^{-(n+2)} sum_i int_{dB_r(X0)} (<grad g^i, X - X0> - g^i / 2)^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import energy
from .geometry import Ball, VectorField, ball_quadrature, interpolate

__all__ = [
    "WeissSeries",
    "weiss_value",
    "weiss_series",
    "deriv_lowerbound",
    "weiss_at_zero",
    "write_weiss_csv",
    "RELIABLE_CELLS",
]

# radii below RELIABLE_CELLS * h are refused
RELIABLE_CELLS = 4
WEISS_COLUMNS = ["r", "W", "slope", "deriv_lb"]


@dataclass
class WeissSeries:
    center: tuple[float, ...]
    radii: list[float]
    W: list[float]
    deriv_lb: list[float]
    tol_W: float = 0.0
    slope_tol: float = 0.0

    def __post_init__(self):
        if len(self.radii) != len(self.W) or len(self.radii) != len(self.deriv_lb):
            raise ValueError("radii, W and deriv_lb must have equal length")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("radii must be strictly increasing")

    @property
    def increments(self) -> list[float]:
        return [b - a for a, b in zip(self.W, self.W[1:])]

    @property
    def slopes(self) -> list[float]:
        return [(b - a) / (rb - ra) for a, b, ra, rb in zip(self.W, self.W[1:], self.radii, self.radii[1:])]

    @property
    def lb_means(self) -> list[float]:
        """Trapezoid mean of the lower-bound integrand over each radius pair."""
        return [0.5 * (a + b) for a, b in zip(self.deriv_lb, self.deriv_lb[1:])]

    def violations(self) -> list[int]:
        """Pair indices where W drops by more than ``tol_W``."""
        return [k for k, d in enumerate(self.increments) if d < -self.tol_W]

    def bound_violations(self) -> list[int]:
        """Pair indices where the slope falls short of the lower bound by more than ``slope_tol``."""
        return [k for k, (s, lb) in enumerate(zip(self.slopes, self.lb_means)) if s < lb - self.slope_tol]

    @property
    def monotone(self) -> bool:
        return not self.violations()

    def rows(self):
        slopes = self.slopes + [math.nan]
        return list(zip(self.radii, self.W, slopes, self.deriv_lb))


def _center(G: VectorField, X0) -> tuple[float, ...]:
    x = np.atleast_1d(np.asarray(X0, dtype=float))
    if x.size == G.grid.n + 1:
        if x[-1] != 0:
            raise ValueError("Weiss centre must lie on the plate")
        x = x[:-1]
    if x.size != G.grid.n:
        raise ValueError(f"centre needs {G.grid.n} plate coordinates")
    return tuple(float(v) for v in x)


def _check_radius(G: VectorField, r: float):
    floor = RELIABLE_CELLS * G.grid.h
    if r < floor - 1e-12:
        raise ValueError(f"radius {r} below the reliability floor {floor}")


def weiss_value(G: VectorField, mask, X0, r: float) -> float:
    """``W(X0, G, r)`` from the energy parts over ``B_r(X0)``."""
    _check_radius(G, r)
    ball = Ball(_center(G, X0), float(r))
    parts = energy(G, ball, mask=mask)
    n = G.grid.n
    return (parts.dirichlet + parts.plate_measure) / r**n - 0.5 * parts.boundary_l2 / r ** (n + 1)


def deriv_lowerbound(G: VectorField, X0, r: float) -> float:
    """``r^{-(n+2)} sum_i int_{dB_r} (<grad g^i, X-X0> - g^i/2)^2`` by polar sampling.

    The radial derivative is a central difference of the interpolant with
    step ``h``.
    """
    _check_radius(G, r)
    grid = G.grid
    c = _center(G, X0)
    ball = Ball(c, float(r))
    ball.check_inside(grid)
    quad = ball_quadrature(grid, ball)
    nrm = quad.surface_normals
    cc = np.array(list(c) + [0.0])
    d = grid.h
    Ball(c, r + d).check_inside(grid)
    g = interpolate(grid, G.values, cc + r * nrm)
    gp = interpolate(grid, G.values, cc + (r + d) * nrm)
    gm = interpolate(grid, G.values, cc + (r - d) * nrm)
    radial = r * (gp - gm) / (2 * d)
    integrand = np.sum((radial - 0.5 * g) ** 2, axis=0)
    return quad.surface_integral(integrand) / r ** (grid.n + 2)


def geometric_radii(r_min: float, r_max: float, k: int) -> list[float]:
    if k < 2:
        raise ValueError("a Weiss series needs at least two radii")
    if not r_max > r_min:
        raise ValueError("r_max must exceed r_min")
    return [float(v) for v in np.geomspace(r_min, r_max, k)]


def weiss_series(G: VectorField, mask, X0, r_min: float, r_max: float, k: int, tol_W=None, slope_tol=None) -> WeissSeries:
    """W and the lower-bound integrand at ``k`` geometric radii in ``[r_min, r_max]``.

    ``tol_W`` defaults to ``5h`` and ``slope_tol`` to ``10h``.
    """
    radii = geometric_radii(r_min, r_max, k)
    h = G.grid.h
    W = [weiss_value(G, mask, X0, r) for r in radii]
    lb = [deriv_lowerbound(G, X0, r) for r in radii]
    return WeissSeries(
        center=_center(G, X0),
        radii=radii,
        W=W,
        deriv_lb=lb,
        tol_W=5 * h if tol_W is None else tol_W,
        slope_tol=10 * h if slope_tol is None else slope_tol,
    )


def weiss_at_zero(G: VectorField, mask, X0) -> tuple[float, float]:
    """``(W(8h), 2 W(8h) - W(16h))``: the small-radius value and its Richardson estimate."""
    h = G.grid.h
    w8 = weiss_value(G, mask, X0, 8 * h)
    w16 = weiss_value(G, mask, X0, 16 * h)
    return w8, 2 * w8 - w16


def write_weiss_csv(path, series: WeissSeries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WEISS_COLUMNS)
        for row in series.rows():
            w.writerow([repr(float(v)) for v in row])
