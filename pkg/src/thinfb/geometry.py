"""
Structured grids on the upper half box, balls centred on the plate, and
the quadrature / interpolation machinery built on top of them.

Only the half ``x_{n+1} >= 0`` is stored. Every field is understood to be
even in the last coordinate, so volume and surface integrals over a full
ball are computed on the upper half and doubled.

Array layout: a scalar field has shape ``grid.shape`` with axes
``(x_1, ..., x_n, x_{n+1})``; the plate is index 0 of the last axis. A vector
field carries a leading component axis, ``(m, *grid.shape)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "Grid",
    "Ball",
    "BallWeights",
    "VectorField",
    "make_grid",
    "interpolate",
    "ball_quadrature",
    "omega",
    "rect_disk_area",
]


def omega(k: int) -> float:
    """Volume of the unit ball in R^k."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


@dataclass(frozen=True)
class Grid:
    """Box ``[-R, R]^n x [0, R]`` sampled with spacing ``h``."""

    n: int
    m: int
    h: float
    extent: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"plate dimension n must be 1 or 2, got {self.n}")
        if self.m < 1:
            raise ValueError(f"number of components m must be >= 1, got {self.m}")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if not self.extent > 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        ratio = self.extent / self.h
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"extent/h = {ratio!r} is not an integer")

    @property
    def cells(self) -> int:
        """Number of cells per half-width, R/h."""
        return int(round(self.extent / self.h))

    @property
    def shape(self) -> tuple[int, ...]:
        N = self.cells
        return (2 * N + 1,) * self.n + (N + 1,)

    @property
    def plate_shape(self) -> tuple[int, ...]:
        return self.shape[:-1]

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return tuple(s - 1 for s in self.shape)

    def axis(self, k: int) -> np.ndarray:
        N = self.cells
        if k < self.n:
            return (np.arange(2 * N + 1) - N) * self.h
        return np.arange(N + 1) * self.h

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        out = []
        for k in range(self.n + 1):
            shp = [1] * (self.n + 1)
            shp[k] = -1
            out.append(self.axis(k).reshape(shp))
        return out

    def plate_coords(self) -> list[np.ndarray]:
        out = []
        for k in range(self.n):
            shp = [1] * self.n
            shp[k] = -1
            out.append(self.axis(k).reshape(shp))
        return out

    def points(self) -> np.ndarray:
        """All node coordinates, shape ``(*shape, n+1)``."""
        return np.stack(np.meshgrid(*[self.axis(k) for k in range(self.n + 1)], indexing="ij"), axis=-1)

    def plate_points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*[self.axis(k) for k in range(self.n)], indexing="ij"), axis=-1)

    def boundary_mask(self) -> np.ndarray:
        """Nodes carrying Dirichlet data: lateral faces and the top face."""
        b = np.zeros(self.shape, dtype=bool)
        for k in range(self.n):
            sl = [slice(None)] * (self.n + 1)
            sl[k] = 0
            b[tuple(sl)] = True
            sl[k] = -1
            b[tuple(sl)] = True
        b[..., -1] = True
        return b

    def plate_interior(self) -> np.ndarray:
        """Plate nodes whose mask is a free variable (not on the lateral faces)."""
        return ~self.boundary_mask()[..., 0]

    def contains(self, X, tol: float = 1e-12) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        R = self.extent + tol
        inside = np.all(np.abs(X[..., : self.n]) <= R, axis=-1)
        return inside & (np.abs(X[..., self.n]) <= R)


def make_grid(n: int, m: int, h: float, extent: float) -> Grid:
    return Grid(n=n, m=m, h=float(h), extent=float(extent))


@dataclass(frozen=True)
class Ball:
    """Ball ``B_r(x0, 0)`` centred on the plate."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @classmethod
    def at(cls, center, radius) -> "Ball":
        c = tuple(float(v) for v in np.atleast_1d(center))
        return cls(c, float(radius))

    def check_inside(self, grid: Grid):
        if len(self.center) != grid.n:
            raise ValueError(f"ball centre has {len(self.center)} coordinates, plate has {grid.n}")
        lo = min(grid.extent - abs(c) for c in self.center)
        lo = min(lo, grid.extent)
        if self.radius >= lo - 1e-12:
            raise ValueError(
                f"ball of radius {self.radius} at {self.center} touches the box of half-width {grid.extent}"
            )


@dataclass
class VectorField:
    """An m-component field sampled on ``grid`` together with its plate positivity mask."""

    grid: Grid
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.m,) + self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != {(self.grid.m,) + self.grid.shape}")
        if self.mask is None:
            self.mask = positivity_mask(self.values, self.grid)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.grid.plate_shape:
            raise ValueError(f"mask shape {self.mask.shape} != {self.grid.plate_shape}")

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy(), self.mask.copy())

    def scaled(self, lam: float) -> "VectorField":
        return VectorField(self.grid, lam * self.values, self.mask.copy())

    def __call__(self, X) -> np.ndarray:
        return interpolate(self.grid, self.values, X)


def positivity_mask(values: np.ndarray, grid: Grid, tau: float | None = None) -> np.ndarray:
    """Threshold ``|G| > tau`` on the plate; ``tau`` defaults to ``h**0.5 / 4``.

    Only meant for closed-form profiles; solver states carry their own mask.
    """
    if tau is None:
        tau = grid.h**0.5 / 4
    plate = np.sqrt(np.sum(np.asarray(values)[..., 0] ** 2, axis=0))
    return plate > tau


def interpolate(grid: Grid, field_values, X) -> np.ndarray:
    """Multilinear interpolation of nodal values at points ``X`` (shape ``(..., n+1)``).

    Points below the plate are evaluated by even reflection. A vector field
    (leading component axis) returns shape ``(m, ...)``.
    """
    vals = np.asarray(field_values, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != grid.n + 1:
        raise ValueError(f"points must have {grid.n + 1} coordinates, got {X.shape[-1]}")
    if not np.all(grid.contains(X)):
        raise ValueError("interpolation point outside the grid box")
    lead = X.shape[:-1]
    P = X.reshape(-1, grid.n + 1)
    idx = np.empty((grid.n + 1, P.shape[0]))
    idx[: grid.n] = ((P[:, : grid.n] + grid.extent) / grid.h).T
    idx[grid.n] = np.abs(P[:, grid.n]) / grid.h
    # guard against rounding just past the last node
    upper = np.array(grid.shape, dtype=float)[:, None] - 1
    np.clip(idx, 0.0, upper, out=idx)
    if vals.shape == grid.shape:
        out = ndimage.map_coordinates(vals, idx, order=1, mode="nearest", prefilter=False)
        return out.reshape(lead)
    if vals.shape[1:] != grid.shape:
        raise ValueError(f"field shape {vals.shape} does not match grid {grid.shape}")
    out = np.stack(
        [ndimage.map_coordinates(v, idx, order=1, mode="nearest", prefilter=False) for v in vals]
    )
    return out.reshape((vals.shape[0],) + lead)


# --------------------------------------------------------------------------
# quadrature


def _chord_primitive(x, r):
    # antiderivative of sqrt(r^2 - x^2)
    x = np.clip(x, -r, r)
    return 0.5 * (x * np.sqrt(np.maximum(r * r - x * x, 0.0)) + r * r * np.arcsin(x / r))


def _clipped_integral(a, b, y0, y1, r, sign):
    """Integral over [a, b] of clip(sign*sqrt(r^2-x^2), y0, y1); assumes [a,b] within [-r,r]."""
    if b <= a:
        return 0.0
    bps = {a, b}
    for c in (y0, y1):
        if abs(c) < r:
            xc = math.sqrt(r * r - c * c)
            for p in (-xc, xc):
                if a < p < b:
                    bps.add(p)
    bps = sorted(bps)
    total = 0.0
    for lo, hi in zip(bps[:-1], bps[1:]):
        mid = 0.5 * (lo + hi)
        f = sign * math.sqrt(max(r * r - mid * mid, 0.0))
        if f <= y0:
            total += y0 * (hi - lo)
        elif f >= y1:
            total += y1 * (hi - lo)
        else:
            total += sign * (_chord_primitive(hi, r) - _chord_primitive(lo, r))
    return total


def rect_disk_area(x0: float, x1: float, y0: float, y1: float, r: float) -> float:
    """Exact area of ``[x0,x1] x [y0,y1]`` intersected with the disk of radius r at the origin."""
    a, b = max(x0, -r), min(x1, r)
    if b <= a or y1 <= y0:
        return 0.0
    upper = _clipped_integral(a, b, y0, y1, r, +1.0)
    lower = _clipped_integral(a, b, y0, y1, r, -1.0)
    return max(upper - lower, 0.0)


@dataclass
class BallWeights:
    """Quadrature for one ball on one grid.

    ``cell`` holds the fraction of each upper-half cell inside the ball;
    ``plate`` the fraction of each plate node's dual cell inside the plate
    ball. ``surface_points``/``surface_weights`` sample the upper half of
    the sphere with weights already doubled, so they integrate over the
    whole sphere.
    """

    grid: Grid
    ball: Ball
    cell: np.ndarray
    plate: np.ndarray
    surface_points: np.ndarray
    surface_weights: np.ndarray
    surface_normals: np.ndarray

    def volume(self) -> float:
        return 2.0 * self.cell.sum() * self.grid.h ** (self.grid.n + 1)

    def plate_measure(self, indicator) -> float:
        return float(np.sum(self.plate * np.asarray(indicator, dtype=float)) * self.grid.h**self.grid.n)

    def surface_integral(self, values) -> float:
        return float(np.sum(np.asarray(values) * self.surface_weights))


def _cell_fractions(grid: Grid, ball: Ball) -> np.ndarray:
    h, n, r = grid.h, grid.n, ball.radius
    frac = np.zeros(grid.cell_shape)
    lo = [grid.axis(k)[:-1] for k in range(n + 1)]
    c = list(ball.center) + [0.0]
    # index window around the ball
    sl = []
    for k in range(n + 1):
        i0 = max(int(math.floor((c[k] - r - lo[k][0]) / h)) - 1, 0)
        i1 = min(int(math.ceil((c[k] + r - lo[k][0]) / h)) + 1, grid.cell_shape[k])
        sl.append(slice(i0, i1))
    sub = [lo[k][sl[k]] for k in range(n + 1)]
    mesh = np.meshgrid(*sub, indexing="ij")
    # nearest / farthest distance from the centre to each cell
    near = np.zeros(mesh[0].shape)
    far = np.zeros(mesh[0].shape)
    for k in range(n + 1):
        a = mesh[k] - c[k]
        b = a + h
        near += np.where(a > 0, a, np.where(b < 0, b, 0.0)) ** 2
        far += np.maximum(a * a, b * b)
    near, far = np.sqrt(near), np.sqrt(far)
    block = np.zeros(mesh[0].shape)
    block[far <= r] = 1.0
    cut = (near < r) & (far > r)
    if n == 1:
        for i, j in zip(*np.nonzero(cut)):
            x0 = mesh[0][i, j] - c[0]
            y0 = mesh[1][i, j]
            block[i, j] = rect_disk_area(x0, x0 + h, y0, y0 + h, r) / (h * h)
    else:
        off = (np.array([0.25, 0.75]) * h)
        sub_pts = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1).reshape(-1, 3)
        idx = np.nonzero(cut)
        corner = np.stack([mesh[k][idx] - c[k] for k in range(3)], axis=-1)
        pts = corner[:, None, :] + sub_pts[None, :, :]
        inside = np.sum(pts**2, axis=-1) < r * r
        block[idx] = inside.mean(axis=1)
    frac[tuple(sl)] = block
    return frac


def _plate_fractions(grid: Grid, ball: Ball) -> np.ndarray:
    h, n, r = grid.h, grid.n, ball.radius
    N = grid.cells
    if n == 1:
        x = grid.axis(0)
        a = np.maximum(x - h / 2, -grid.extent)
        b = np.minimum(x + h / 2, grid.extent)
        lo = np.maximum(a, ball.center[0] - r)
        hi = np.minimum(b, ball.center[0] + r)
        return np.clip(hi - lo, 0.0, None) / h
    frac = np.zeros(grid.plate_shape)
    x = grid.axis(0)
    y = grid.axis(1)
    cx, cy = ball.center
    for i in range(2 * N + 1):
        xa, xb = max(x[i] - h / 2, -grid.extent) - cx, min(x[i] + h / 2, grid.extent) - cx
        if xb <= -r or xa >= r:
            continue
        for j in range(2 * N + 1):
            ya, yb = max(y[j] - h / 2, -grid.extent) - cy, min(y[j] + h / 2, grid.extent) - cy
            if yb <= -r or ya >= r:
                continue
            frac[i, j] = rect_disk_area(xa, xb, ya, yb, r) / (h * h)
    return frac


def sphere_samples(grid: Grid, ball: Ball, refine: int = 4):
    """Polar samples of the upper half sphere; angular step at most ``h / (refine * r)``.

    Returns points, doubled weights and outward unit normals.
    """
    h, n, r = grid.h, grid.n, ball.radius
    step = h / (refine * r)
    c = np.array(list(ball.center) + [0.0])
    if n == 1:
        K = max(int(math.ceil(math.pi / step)), 16)
        th = (np.arange(K) + 0.5) * math.pi / K
        nrm = np.stack([np.cos(th), np.sin(th)], axis=-1)
        w = np.full(K, 2.0 * r * math.pi / K)
    else:
        Kp = max(int(math.ceil(0.5 * math.pi / step)), 8)
        Ka = max(int(math.ceil(2 * math.pi / step)), 16)
        ph = (np.arange(Kp) + 0.5) * (0.5 * math.pi / Kp)
        az = (np.arange(Ka) + 0.5) * (2 * math.pi / Ka)
        P, A = np.meshgrid(ph, az, indexing="ij")
        nrm = np.stack([np.sin(P) * np.cos(A), np.sin(P) * np.sin(A), np.cos(P)], axis=-1).reshape(-1, 3)
        w = (np.sin(P) * (0.5 * math.pi / Kp) * (2 * math.pi / Ka)).reshape(-1)
        # exact hemisphere area, then double for the reflected half
        w *= 2 * math.pi / w.sum()
        w *= 2.0 * r * r
    pts = c + r * nrm
    return pts, w, nrm


def ball_quadrature(grid: Grid, ball: Ball, refine: int = 4) -> BallWeights:
    """Volume, plate and sphere quadrature weights for ``ball`` on ``grid``."""
    ball.check_inside(grid)
    pts, w, nrm = sphere_samples(grid, ball, refine)
    return BallWeights(
        grid=grid,
        ball=ball,
        cell=_cell_fractions(grid, ball),
        plate=_plate_fractions(grid, ball),
        surface_points=pts,
        surface_weights=w,
        surface_normals=nrm,
    )
