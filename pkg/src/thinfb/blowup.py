"""
Blow-up rescalings ``G_{X0,r}(X) = r^{-1/2} G(X0 + r X)`` and their fit to
the family ``alpha U(<x,nu>, x_{n+1}) xi``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .energy import rescale_field
from .geometry import Grid, VectorField
from .profiles import eval_U

__all__ = [
    "ProfileFit",
    "BlowupSeries",
    "rescale",
    "fit_profile",
    "blowup_series",
    "reference_grid",
    "is_free_boundary_point",
    "write_blowup_csv",
    "MIN_SCALE_CELLS",
    "TUBE_CELLS",
]

# rescalings below MIN_SCALE_CELLS * h are refused
MIN_SCALE_CELLS = 8
# radius, in source cells, of the tube around the fitted free boundary left out of dist_inf
TUBE_CELLS = 4


@dataclass(frozen=True)
class ProfileFit:
    xi: tuple[float, ...]
    nu: tuple[float, ...]
    alpha: float
    dist_inf: float
    tube: float

    def row(self) -> list[float]:
        return [self.alpha, *self.nu, *self.xi, self.dist_inf, self.tube]


@dataclass
class BlowupSeries:
    center: tuple[float, ...]
    scales: list[float]
    fields: list[VectorField]
    fits: list[ProfileFit]
    stab_tol: float = 0.05

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError("blow-up scales must be strictly decreasing")

    @property
    def dist(self) -> list[float]:
        return [f.dist_inf for f in self.fits]

    @property
    def nonincreasing(self) -> bool:
        d = self.dist
        return all(b <= a for a, b in zip(d, d[1:]))

    @property
    def stabilized(self) -> bool:
        """Consecutive fits agree: relative alpha change, and |delta nu|, |delta xi| at most ``stab_tol``."""
        for a, b in zip(self.fits, self.fits[1:]):
            if abs(b.alpha - a.alpha) > self.stab_tol * max(a.alpha, b.alpha):
                return False
            if np.linalg.norm(np.subtract(a.nu, b.nu)) > self.stab_tol:
                return False
            if np.linalg.norm(np.subtract(a.xi, b.xi)) > self.stab_tol:
                return False
        return True

    def rows(self):
        return [[r, *f.row()] for r, f in zip(self.scales, self.fits)]


def reference_grid(grid: Grid) -> Grid:
    """Extent-1 grid with the source spacing."""
    return Grid(grid.n, grid.m, grid.h, 1.0)


def rescale(G: VectorField, X0, r: float, ref: Grid | None = None) -> VectorField:
    """``r^{-1/2} G(X0 + r X)`` sampled on ``ref`` by interpolation."""
    ref = reference_grid(G.grid) if ref is None else ref
    if r < MIN_SCALE_CELLS * G.grid.h - 1e-12:
        raise ValueError(f"blow-up scale {r} below {MIN_SCALE_CELLS}h")
    return rescale_field(G, X0, r, ref)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _nu_from_angle(a: float) -> np.ndarray:
    return np.array([math.cos(a), math.sin(a)])


def fit_profile(F: VectorField, sweep_deg: float = 1.0, tube: float | None = None) -> ProfileFit:
    """Least-squares fit of ``alpha U(<x,nu>, x_{n+1}) xi`` on the closed unit ball of ``F``'s grid.

    For fixed ``nu`` the optimum is closed form: with ``v = sum G u``,
    ``xi = v/|v|`` and ``alpha = |v| / sum u^2``. ``nu`` maximises
    ``|v|^2 / sum u^2``: both signs for n = 1, a ``sweep_deg`` sweep refined by
    golden-section search for n = 2.

    ``tube`` (reference units) defaults to ``TUBE_CELLS * h``; a blow-up at
    scale r passes ``TUBE_CELLS * h / r`` so the excluded region is always
    four cells of the grid the data was sampled on.
    """
    grid = F.grid
    n = grid.n
    X = grid.points()
    inball = np.linalg.norm(X, axis=-1) <= 1.0 + 1e-12
    P = X[inball]
    Gv = F.values[:, inball]
    if not np.any(Gv):
        raise ValueError("cannot fit a profile to the zero field")

    def parts(nu):
        u = eval_U(P[:, :n] @ nu, P[:, n])
        return Gv @ u, float(u @ u)

    def score(nu):
        v, uu = parts(nu)
        return -float(v @ v) / uu

    if n == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
        nu = min(cands, key=score)
    else:
        angles = np.deg2rad(np.arange(0.0, 360.0, sweep_deg))
        vals = [score(_nu_from_angle(a)) for a in angles]
        a0 = angles[int(np.argmin(vals))]
        d = math.radians(sweep_deg)
        res = optimize.minimize_scalar(
            lambda a: score(_nu_from_angle(a)), bracket=(a0 - d, a0, a0 + d), method="golden"
        )
        a = res.x if res.fun <= min(vals) else a0
        nu = _nu_from_angle(a)
    v, uu = parts(nu)
    xi = _unit(v)
    alpha = float(np.linalg.norm(v)) / uu
    # sup-norm residual off the tube around the fitted free boundary
    tube = TUBE_CELLS * grid.h if tube is None else float(tube)
    u = eval_U(P[:, :n] @ nu, P[:, n])
    keep = np.hypot(P[:, :n] @ nu, P[:, n]) >= tube
    err = np.linalg.norm(Gv - alpha * np.outer(xi, u), axis=0)
    dist = float(err[keep].max()) if keep.any() else 0.0
    return ProfileFit(tuple(float(t) for t in xi), tuple(float(t) for t in nu), alpha, dist, tube)


def is_free_boundary_point(G: VectorField, X0) -> bool:
    """True when plate nodes within one diagonal cell of ``X0`` carry both mask values."""
    grid = G.grid
    x0 = np.atleast_1d(np.asarray(X0, dtype=float))[: grid.n]
    d = np.linalg.norm(grid.plate_points() - x0, axis=-1)
    near = d <= grid.h * math.sqrt(grid.n) + 1e-12
    vals = G.mask[near]
    return bool(vals.any() and not vals.all())


def blowup_series(G: VectorField, X0, scales, ref: Grid | None = None, stab_tol: float = 0.05) -> BlowupSeries:
    """Rescale and fit at each scale (given in decreasing order)."""
    if not is_free_boundary_point(G, X0):
        raise ValueError(f"{X0} is not a free boundary point of the mask")
    ref = reference_grid(G.grid) if ref is None else ref
    scales = [float(s) for s in scales]
    fields, fits = [], []
    for r in scales:
        F = rescale(G, X0, r, ref)
        fields.append(F)
        fits.append(fit_profile(F, tube=TUBE_CELLS * G.grid.h / r))
    x0 = tuple(float(v) for v in np.atleast_1d(np.asarray(X0, dtype=float))[: G.grid.n])
    return BlowupSeries(x0, scales, fields, fits, stab_tol)


def blowup_columns(n: int, m: int) -> list[str]:
    return ["r", "alpha", *[f"nu_{k + 1}" for k in range(n)], *[f"xi_{k + 1}" for k in range(m)], "dist_inf", "tube"]


def write_blowup_csv(path, series: BlowupSeries):
    n = len(series.center)
    m = len(series.fits[0].xi) if series.fits else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(blowup_columns(n, m))
        for row in series.rows():
            w.writerow([repr(float(v)) for v in row])
