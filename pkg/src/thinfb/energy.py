"""
Discrete evaluation of

    J(G, B) = int_B |grad G|^2 + L_n(B cap {|G| > 0} cap {x_{n+1} = 0})

and of the sphere term ``int_{dB} |G|^2`` used by the Weiss functional.

The Dirichlet density of a cell is the average of the squared edge
differences along each axis. Summed over every cell of the box this is
exactly the quadratic form whose Euler-Lagrange equation is the 5-point
(7-point for n=2) Laplacian with even reflection at the plate, i.e. the
energy the solver descends.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, astuple, fields

import numpy as np

from .geometry import Ball, Grid, VectorField, ball_quadrature, interpolate, BallWeights

__all__ = [
    "EnergyBreakdown",
    "cell_energy",
    "dirichlet_total",
    "energy",
    "scaling_check",
    "homogeneous_extension",
    "extension_bound",
    "write_energy_csv",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    r: float
    dirichlet: float
    plate_measure: float
    total: float
    boundary_l2: float

    @property
    def dirichlet_upper(self) -> float:
        """Dirichlet integral over the stored upper half ball only."""
        return 0.5 * self.dirichlet

    def row(self) -> tuple:
        return astuple(self)


ENERGY_COLUMNS = [f.name for f in fields(EnergyBreakdown)]


def cell_energy(values: np.ndarray, h: float) -> np.ndarray:
    """Dirichlet energy of each upper-half cell, ``int_cell |grad G|^2``.

    ``values`` has shape ``(m, *shape)``. Works on any sub-block of a grid
    (the solver applies it to patches).
    """
    comp = np.asarray(values, dtype=float)
    dim = comp.ndim - 1
    total = 0.0
    for a in range(dim):
        d = np.diff(comp, axis=a + 1) ** 2
        d = d.sum(axis=0)
        for b in range(dim):
            if b == a:
                continue
            d = 0.5 * (np.take(d, range(0, d.shape[b] - 1), axis=b) + np.take(d, range(1, d.shape[b]), axis=b))
        total = total + d
    return total * h ** (dim - 2)


def dirichlet_total(values: np.ndarray, h: float) -> float:
    """Reflection-doubled Dirichlet energy of the whole box."""
    return 2.0 * float(np.sum(cell_energy(values, h)))


def _as_values(G) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(G, VectorField):
        return G.values, G.mask
    return np.asarray(G, dtype=float), None


def energy(G, ball: Ball, mask=None, grid: Grid | None = None, quad: BallWeights | None = None) -> EnergyBreakdown:
    """Dirichlet, plate-measure and sphere parts of J over ``ball``."""
    values, fmask = _as_values(G)
    if grid is None:
        if not isinstance(G, VectorField):
            raise ValueError("grid is required when G is a bare array")
        grid = G.grid
    if mask is None:
        mask = fmask
    if mask is None:
        raise ValueError("a plate positivity mask is required")
    if quad is None:
        quad = ball_quadrature(grid, ball)
    ce = cell_energy(values, grid.h)
    dirichlet = 2.0 * float(np.sum(quad.cell * ce))
    plate = quad.plate_measure(mask)
    g = interpolate(grid, values, quad.surface_points)
    bl2 = quad.surface_integral(np.sum(g**2, axis=0))
    return EnergyBreakdown(ball.radius, dirichlet, plate, dirichlet + plate, bl2)


def write_energy_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ENERGY_COLUMNS)
        for e in rows:
            w.writerow([repr(float(x)) for x in e.row()])


def _rescaled_grid(grid: Grid, extent_needed: float) -> Grid:
    cells = int(math.ceil(extent_needed / grid.h - 1e-9)) + 4
    return Grid(grid.n, grid.m, grid.h, cells * grid.h)


def rescale_field(G: VectorField, X0, r: float, ref: Grid) -> VectorField:
    """``G_{X0,r}(X) = r^{-1/2} G(X0 + r X)`` sampled on ``ref``; mask from the nearest source plate node."""
    grid = G.grid
    x0 = np.atleast_1d(np.asarray(X0, dtype=float))[: grid.n]
    c = np.concatenate([x0, [0.0]])
    P = c + r * ref.points()
    if not np.all(grid.contains(P)):
        raise ValueError(f"rescaled box at scale r={r} leaves the source grid")
    vals = interpolate(grid, G.values, P) / math.sqrt(r)
    pp = x0 + r * ref.plate_points()
    idx = np.rint((pp + grid.extent) / grid.h).astype(int)
    idx = np.clip(idx, 0, 2 * grid.cells)
    mask = G.mask[tuple(idx[..., k] for k in range(grid.n))]
    return VectorField(ref, vals, mask)


def scaling_check(G: VectorField, X0, r: float, R: float) -> tuple[float, float]:
    """``J(G, B_R(X0))`` against ``r^n J(G_{X0,r}, B_{R/r})``."""
    grid = G.grid
    x0 = tuple(np.atleast_1d(np.asarray(X0, dtype=float))[: grid.n])
    lhs = energy(G, Ball(x0, R)).total
    # reuse the source lattice when it covers B_{R/r}, so r = 1 reproduces lhs exactly
    if R / r + 4 * grid.h <= grid.extent + 1e-12 and r <= 1.0:
        ref = grid
    else:
        ref = _rescaled_grid(grid, R / r)
    Gr = rescale_field(G, x0, r, ref)
    rhs = r**grid.n * energy(Gr, Ball((0.0,) * grid.n, R / r)).total
    return lhs, rhs


def homogeneous_extension(G: VectorField, r: float, center=None) -> VectorField:
    """Replace G inside ``B_r(center)`` by ``(|X|/r)^{1/2} G(r X/|X|)`` (X relative to the centre)."""
    grid = G.grid
    if not r > 0:
        raise ValueError("extension radius must be positive")
    c = np.zeros(grid.n) if center is None else np.atleast_1d(np.asarray(center, dtype=float))[: grid.n]
    Ball(tuple(c), r).check_inside(grid)
    X = grid.points()
    Y = X.copy()
    Y[..., : grid.n] -= c
    rho = np.linalg.norm(Y, axis=-1)
    inside = rho < r
    out = G.values.copy()
    Yi = Y[inside]
    ri = rho[inside]
    safe = np.where(ri > 0, ri, 1.0)
    proj = Yi * (r / safe)[:, None]
    proj[ri == 0] = 0.0
    proj[:, : grid.n] += c
    trace = interpolate(grid, G.values, proj)
    scale = np.sqrt(ri / r)
    ext = trace * scale
    ext[:, ri == 0] = 0.0
    out[:, inside] = ext
    mask = G.mask.copy()
    # plate positivity of the extension follows the trace at the radial projection
    pp = grid.plate_points() - c
    prho = np.linalg.norm(pp, axis=-1)
    pin = prho < r
    if np.any(pin):
        pr = np.where(prho[pin] > 0, prho[pin], 1.0)
        bp = pp[pin] * (r / pr)[:, None] + c
        bp = np.concatenate([bp, np.zeros((bp.shape[0], 1))], axis=-1)
        tr = np.linalg.norm(interpolate(grid, G.values, bp), axis=0)
        tau = grid.h**0.5 / 4
        new = (tr > tau) & (prho[pin] > 0)
        mask[pin] = new
    return VectorField(grid, out, mask)


def extension_bound(G: VectorField, r: float, center=None) -> float:
    """Energy of the 1/2-homogeneous extension from its trace alone:

        (1/n) int_{dB_r} (r |grad_T G|^2 + |G|^2 / (4r)) + (r/n) H^{n-1}(d(plate ball) cap {|G|>0}).
    """
    grid = G.grid
    n = grid.n
    c = np.zeros(n) if center is None else np.atleast_1d(np.asarray(center, dtype=float))[:n]
    ball = Ball(tuple(c), r)
    quad = ball_quadrature(grid, ball)
    pts, nrm, w = quad.surface_points, quad.surface_normals, quad.surface_weights
    g = interpolate(grid, G.values, pts)
    # tangential gradient by centred differences along great circles
    d = grid.h / 4
    tang = 0.0
    if n == 1:
        t = np.stack([-nrm[:, 1], nrm[:, 0]], axis=-1)
        bases = [t]
    else:
        e1 = np.stack([-nrm[:, 1], nrm[:, 0], np.zeros(len(nrm))], axis=-1)
        nn = np.linalg.norm(e1, axis=-1, keepdims=True)
        e1 = np.where(nn > 1e-12, e1 / np.maximum(nn, 1e-12), np.array([1.0, 0.0, 0.0]))
        e2 = np.cross(nrm, e1)
        bases = [e1, e2]
    cc = np.concatenate([c, [0.0]])
    for t in bases:
        ang = d / r
        pp = cc + r * (np.cos(ang) * nrm + np.sin(ang) * t)
        pm = cc + r * (np.cos(ang) * nrm - np.sin(ang) * t)
        dg = (interpolate(grid, G.values, pp) - interpolate(grid, G.values, pm)) / (2 * d)
        tang = tang + np.sum(dg**2, axis=0)
    surf = quad.surface_integral(r * tang + np.sum(g**2, axis=0) / (4 * r)) / n
    tau = grid.h**0.5 / 4
    if n == 1:
        ends = np.array([[c[0] - r, 0.0], [c[0] + r, 0.0]])
        pos = np.linalg.norm(interpolate(grid, G.values, ends), axis=0) > tau
        hn = float(np.sum(pos))
    else:
        K = max(int(math.ceil(2 * math.pi * r / grid.h)) * 4, 64)
        a = (np.arange(K) + 0.5) * 2 * math.pi / K
        ring = np.stack([c[0] + r * np.cos(a), c[1] + r * np.sin(a), np.zeros(K)], axis=-1)
        pos = np.linalg.norm(interpolate(grid, G.values, ring), axis=0) > tau
        hn = float(np.sum(pos)) * 2 * math.pi * r / K
    return surf + r / n * hn
