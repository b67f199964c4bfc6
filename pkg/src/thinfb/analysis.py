"""
Free boundary extraction and pointwise diagnostics of computed states:
density ratios, Hoelder and non-degeneracy fits, flatness, domain
variations, slopes, trap decay, improvement of flatness and labelling of
free boundary points.

Flatness-type quantities are evaluated at unit scale: the ball
``B_rho(x0)`` is mapped to ``B_1`` and the field is divided by
``A rho^{1/2}``, where ``A`` is the slope constant of the computed
states (``A = 1`` compares against ``U`` itself).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import optimize, spatial

from .blowup import blowup_series, is_free_boundary_point
from .geometry import Ball, Grid, VectorField, interpolate, omega, ball_quadrature
from .profiles import ProfileParams, eval_U, eval_profile, shift_to_match
from .solver import SolverConfig, solve, laplacian

__all__ = [
    "FreeBoundary",
    "extract_fb",
    "refine_fb",
    "density_ratio",
    "PowerFit",
    "holder_fit",
    "nondeg_fit",
    "Flatness",
    "flatness",
    "best_flatness",
    "DomainVariation",
    "domain_variation",
    "slope",
    "estimate_A",
    "HarnackReport",
    "harnack_decay",
    "IofReport",
    "iof_check",
    "ClassifyThresholds",
    "Classification",
    "classify",
    "ComponentReport",
    "component_structure",
    "subharmonicity_defect",
    "DEFAULT_RADII",
    "UNIT_RADIUS",
    "EPS_BAR",
]

DEFAULT_RADII = (1 / 16, 1 / 8, 1 / 4)
# physical radius of the ball treated as B_1 by flatness-type diagnostics
UNIT_RADIUS = 0.5
EPS_BAR = 0.1


class PreconditionError(ValueError):
    pass


# --------------------------------------------------------------------------
# free boundary


@dataclass
class FreeBoundary:
    points: np.ndarray
    normals: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(len(self.points), -1)
        self.normals = np.asarray(self.normals, dtype=float).reshape(self.points.shape)

    def __len__(self) -> int:
        return len(self.points)

    def within(self, grid: Grid, margin: float) -> "FreeBoundary":
        """Points whose distance to the plate edge is at least ``margin``."""
        keep = np.all(np.abs(self.points) <= grid.extent - margin + 1e-12, axis=1)
        return FreeBoundary(self.points[keep], self.normals[keep])


def _mask_normal(mask: np.ndarray, grid: Grid, pt: np.ndarray, half: int = 2) -> np.ndarray:
    """Gradient of a least-squares plane fitted to the mask on a (2*half+1)^n stencil."""
    x = grid.plate_points()
    idx = np.rint((pt + grid.extent) / grid.h).astype(int)
    sl = tuple(slice(max(i - half, 0), min(i + half + 2, s)) for i, s in zip(idx, mask.shape))
    P = x[sl].reshape(-1, grid.n) - pt
    y = mask[sl].reshape(-1).astype(float)
    A = np.column_stack([np.ones(len(P)), P])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    g = coef[1:]
    nrm = np.linalg.norm(g)
    if nrm == 0:
        raise ValueError("degenerate mask stencil")
    return g / nrm


def _midpoint_normals(P: np.ndarray, mask: np.ndarray, grid: Grid, reach: float = 6.0) -> np.ndarray:
    """Normals of the edge-midpoint cloud: least principal axis of the midpoints within
    ``reach`` cells, oriented by the plane fitted to the mask."""
    tree = spatial.cKDTree(P)
    out = np.empty_like(P)
    for k, p in enumerate(P):
        near = P[tree.query_ball_point(p, reach * grid.h + 1e-12)]
        orient = _mask_normal(mask, grid, p)
        if len(near) < grid.n + 1:
            out[k] = orient
            continue
        _, _, vt = np.linalg.svd(near - near.mean(axis=0))
        nv = vt[-1]
        out[k] = nv if nv @ orient >= 0 else -nv
    return out


def extract_fb(mask, grid: Grid) -> FreeBoundary:
    """Midpoints of plate edges joining a mask = 1 node to a mask = 0 node.

    Normals point into the mask = 1 side; for n = 2 they are the least
    principal axis of nearby midpoints, oriented by a plane fitted to the mask.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.plate_shape:
        raise ValueError("mask shape does not match the plate")
    if mask.all() or not mask.any():
        raise ValueError("mask has no free boundary")
    x = grid.plate_points()
    pts, nrms = [], []
    for a in range(grid.n):
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        ml, mh = mask[tuple(lo)], mask[tuple(hi)]
        diff = ml != mh
        mids = 0.5 * (x[tuple(lo)][diff] + x[tuple(hi)][diff])
        pts.append(mids)
        if grid.n == 1:
            nrms.append(np.where(mh[diff], 1.0, -1.0)[:, None])
    P = np.concatenate(pts)
    N = np.concatenate(nrms) if grid.n == 1 else _midpoint_normals(P, mask, grid)
    order = np.lexsort(P.T[::-1])
    return FreeBoundary(P[order], N[order])


def refine_fb(G: VectorField, fb: FreeBoundary, k: int = 4) -> FreeBoundary:
    """Sub-cell free boundary locations from the trace.

    The trace grows like ``A t^{1/2}`` off the free boundary, so ``|G|^2`` is
    close to linear in the signed distance ``t``. It is sampled at the
    ``k`` half-integer offsets ``(j - 1/2) h`` along the normal from each edge
    midpoint, fitted by a line, and the point moves to its root (by at most
    two cells). Points where the fit is not increasing are left unchanged.
    """
    grid = G.grid
    h = grid.h
    s = (np.arange(1, k + 1) - 0.5) * h
    out = fb.points.copy()
    for i, (p, nv) in enumerate(zip(fb.points, fb.normals)):
        q = p[None, :] + s[:, None] * nv[None, :]
        if not np.all(np.abs(q) <= grid.extent):
            continue
        X = np.concatenate([q, np.zeros((k, 1))], axis=1)
        tr2 = np.sum(interpolate(grid, G.values, X) ** 2, axis=0)
        a, b = np.polyfit(s, tr2, 1)
        if a <= 0:
            continue
        out[i] = p + float(np.clip(-b / a, -2 * h, 2 * h)) * nv
    return FreeBoundary(out, fb.normals.copy())


def density_ratio(mask, grid: Grid, x0, r: float) -> float:
    """Plate measure of ``{mask} cap B_r(x0)`` over ``omega_n r^n``."""
    x0 = tuple(float(v) for v in np.atleast_1d(np.asarray(x0, dtype=float))[: grid.n])
    ball = Ball(x0, float(r))
    ball.check_inside(grid)
    from .geometry import _plate_fractions

    frac = _plate_fractions(grid, ball)
    val = float(np.sum(frac * np.asarray(mask, dtype=float))) * grid.h**grid.n
    return min(max(val / (omega(grid.n) * r**grid.n), 0.0), 1.0)


# --------------------------------------------------------------------------
# growth fits


@dataclass
class PowerFit:
    slope: float
    constant: float
    radii: list[float]
    sups: list[float]


def _center3(grid: Grid, x0) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x0, dtype=float))[: grid.n]
    return np.concatenate([x, [0.0]])


def _sup_ball(G: VectorField, x0, r: float, plate: bool) -> float:
    grid = G.grid
    c = _center3(grid, x0)
    if plate:
        d = np.linalg.norm(grid.plate_points() - c[:-1], axis=-1)
        vals = G.norm[..., 0][d <= r + 1e-12]
    else:
        d = np.linalg.norm(grid.points() - c, axis=-1)
        vals = G.norm[d <= r + 1e-12]
    return float(vals.max()) if vals.size else 0.0


def _power_fit(G, x0, radii, plate, envelope) -> PowerFit:
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise ValueError("growth fits need at least three radii")
    h = G.grid.h
    if min(radii) < 8 * h - 1e-12:
        raise ValueError(f"radii must be at least 8h = {8 * h}")
    Ball(tuple(_center3(G.grid, x0)[:-1]), max(radii)).check_inside(G.grid)
    sups = [_sup_ball(G, x0, r, plate) for r in radii]
    if min(sups) <= 0:
        return PowerFit(math.nan, 0.0, radii, sups)
    slope_, _ = np.polyfit(np.log(radii), np.log(sups), 1)
    ratios = [s / math.sqrt(r) for s, r in zip(sups, radii)]
    return PowerFit(float(slope_), float(envelope(ratios)), radii, sups)


def holder_fit(G: VectorField, x0, radii=DEFAULT_RADII) -> PowerFit:
    """Regression of ``log sup_{B_r(x0)} |G|`` on ``log r``; constant = max of ``sup / r^{1/2}``."""
    return _power_fit(G, x0, radii, plate=False, envelope=max)


def nondeg_fit(G: VectorField, x0, radii=DEFAULT_RADII) -> PowerFit:
    """Same regression over plate balls; constant = min of ``sup / r^{1/2}``."""
    return _power_fit(G, x0, radii, plate=True, envelope=min)


# --------------------------------------------------------------------------
# flatness


@dataclass
class Flatness:
    eps: float
    sup_term: float
    zero_term: float
    f: tuple[float, ...]
    nu: tuple[float, ...]
    rho: float
    A: float


def _unit_ball_nodes(G: VectorField, x0, rho: float, A: float):
    """Source nodes in the closed ball ``B_rho(x0)`` in unit coordinates, with the normalised field."""
    grid = G.grid
    c = _center3(grid, x0)
    Ball(tuple(c[:-1]), rho).check_inside(grid)
    X = grid.points()
    inside = np.linalg.norm(X - c, axis=-1) <= rho + 1e-12
    P = (X[inside] - c) / rho
    F = G.values[:, inside] / (A * math.sqrt(rho))
    xp = grid.plate_points()
    pin = np.linalg.norm(xp - c[:-1], axis=-1) <= rho + 1e-12
    plate_pts = (xp[pin] - c[:-1]) / rho
    plate_mask = G.mask[pin]
    return P, F, plate_pts, plate_mask


def _flat_terms(P, F, plate_pts, plate_mask, f, nu):
    n = len(nu)
    u = eval_U(P[:, :n] @ nu, P[:, n])
    sup_term = float(np.max(np.linalg.norm(F - np.outer(f, u), axis=0))) if P.size else 0.0
    proj = plate_pts @ nu
    pos = plate_mask & (proj < 0)
    zero_term = float(np.max(-proj[pos])) if pos.any() else 0.0
    return sup_term, zero_term


def flatness(G: VectorField, x0, rho: float, f, nu, A: float = 1.0) -> Flatness:
    """``max(sup |G - U(<x,nu>, x_{n+1}) f|, inf{s : mask = 0 on <x,nu> < -s})`` at unit scale."""
    f = np.asarray(f, dtype=float)
    nu = np.asarray(nu, dtype=float)
    P, F, pp, pm = _unit_ball_nodes(G, x0, rho, A)
    s, z = _flat_terms(P, F, pp, pm, f, nu)
    return Flatness(max(s, z), s, z, tuple(f), tuple(nu), rho, A)


def _best_f(P, F, nu):
    n = len(nu)
    u = eval_U(P[:, :n] @ nu, P[:, n])
    v = F @ u
    nv = np.linalg.norm(v)
    if nv == 0:
        e = np.zeros(F.shape[0])
        e[0] = 1.0
        return e
    return v / nv


def best_flatness(G: VectorField, x0, rho: float = UNIT_RADIUS, A: float = 1.0, sweep_deg: float = 1.0) -> Flatness:
    """Flatness minimised over ``nu`` (two signs for n = 1; sweep plus golden-section for n = 2),
    with ``f`` the least-squares direction for each ``nu``."""
    P, F, pp, pm = _unit_ball_nodes(G, x0, rho, A)
    n = G.grid.n

    def evaluate(nu):
        f = _best_f(P, F, nu)
        s, z = _flat_terms(P, F, pp, pm, f, nu)
        return max(s, z), s, z, f

    if n == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
        results = [(evaluate(nu), nu) for nu in cands]
        (eps, s, z, f), nu = min(results, key=lambda t: t[0][0])
    else:
        angles = np.deg2rad(np.arange(0.0, 360.0, sweep_deg))
        vals = [evaluate(np.array([math.cos(a), math.sin(a)]))[0] for a in angles]
        a0 = angles[int(np.argmin(vals))]
        d = math.radians(sweep_deg)
        res = optimize.minimize_scalar(
            lambda a: evaluate(np.array([math.cos(a), math.sin(a)]))[0],
            bracket=(a0 - d, a0, a0 + d),
            method="golden",
        )
        a = res.x if res.fun <= min(vals) else a0
        nu = np.array([math.cos(a), math.sin(a)])
        eps, s, z, f = evaluate(nu)
    return Flatness(eps, s, z, tuple(float(t) for t in f), tuple(float(t) for t in nu), rho, A)


# --------------------------------------------------------------------------
# domain variation


@dataclass
class DomainVariation:
    points: np.ndarray
    w: np.ndarray
    eps: float
    trapped: bool
    monotone: bool
    trap_lo: float
    trap_hi: float


def _as_scalar_callable(g):
    if callable(g):
        return g
    if isinstance(g, tuple) and len(g) == 2:
        grid, vals = g
        return lambda X: interpolate(grid, vals, X)
    raise TypeError("g must be a callable or a (grid, values) pair")


def domain_variation(g, eps: float, points, iters: int = 60) -> DomainVariation:
    """Solve ``g(X - w e_n) = U(X)`` for ``w`` in ``[-eps, eps]`` by bisection at each point.

    ``g`` is a callable on points ``(..., n+1)`` or a ``(grid, values)``
    pair. ``points`` must avoid the set ``{x_n <= 0, x_{n+1} = 0}``. The
    trap ``U(X - eps e_n) <= g <= U(X + eps e_n)`` is checked first at the
    points, and ``g`` is checked to be non-decreasing along ``e_n`` over the
    bracket. Raises if the trap fails.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    gf = _as_scalar_callable(g)
    X = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
    n = X.shape[1] - 1
    en = np.zeros(n + 1)
    en[n - 1] = 1.0
    target = eval_U(X[:, n - 1], X[:, n])
    if np.any((X[:, n] == 0) & (X[:, n - 1] <= 0)):
        raise ValueError("points must lie off the plate zero set of U")
    g0 = gf(X)
    lo_u = eval_U(X[:, n - 1] - eps, X[:, n])
    hi_u = eval_U(X[:, n - 1] + eps, X[:, n])
    slack = 1e-12
    if np.any(g0 < lo_u - slack) or np.any(g0 > hi_u + slack):
        raise ValueError("g is not trapped between U(X - eps e_n) and U(X + eps e_n)")
    # phi(w) = g(X - w e_n) - U(X) is >= 0 at w = -eps and <= 0 at w = +eps
    a = np.full(len(X), -eps)
    b = np.full(len(X), eps)
    fa = gf(X + eps * en) - target
    fb = gf(X - eps * en) - target
    if np.any(fa < -slack) or np.any(fb > slack):
        raise ValueError("root not bracketed in [-eps, eps]")
    ws = np.linspace(-eps, eps, 9)
    prof = np.stack([gf(X - w * en) for w in ws])
    monotone = bool(np.all(np.diff(prof, axis=0) <= 1e-12))
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = gf(X - mid[:, None] * en) - target
        right = fm > 0
        a = np.where(right, mid, a)
        b = np.where(right, b, mid)
    w = 0.5 * (a + b)
    # tightest trap of g in units of eps
    pos = g0 > 0
    s = shift_to_match(g0[pos], X[pos, n - 1], X[pos, n])
    lo = float(np.min(s) / eps) if s.size else -1.0
    hi = float(np.max(s) / eps) if s.size else 1.0
    return DomainVariation(X, w, eps, True, monotone, lo, hi)


# --------------------------------------------------------------------------
# slope and A*


def slope(G: VectorField, x0, nu, window=(4, 32)) -> float:
    """Least-squares ``alpha`` in ``|G|(x0 + t nu, 0) ~ alpha t^{1/2}`` for ``t`` in ``[4h, 32h]``."""
    grid = G.grid
    h = grid.h
    nu = np.asarray(nu, dtype=float).reshape(grid.n)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))[: grid.n]
    if grid.n == 1:
        xp = grid.plate_points()[:, 0]
        t = (xp - x0[0]) * nu[0]
        sel = (t >= window[0] * h - 1e-12) & (t <= window[1] * h + 1e-12)
        tt = t[sel]
        g = G.norm[..., 0][sel]
    else:
        tt = np.arange(window[0], window[1] + 1) * h
        pts = np.concatenate([x0 + tt[:, None] * nu, np.zeros((len(tt), 1))], axis=1)
        g = np.linalg.norm(interpolate(grid, G.values, pts), axis=0)
    if tt.size == 0:
        raise ValueError("slope window is empty")
    return float(np.sum(np.sqrt(tt) * g) / np.sum(tt))


@dataclass
class AEstimate:
    A: float
    history: list[float]
    slopes: list[float]
    state: object


def estimate_A(grid: Grid, config: SolverConfig | None = None, alpha0: float = 1.0, rounds: int = 4, tol: float = 1e-3, margin: float = 0.25) -> AEstimate:
    """Median slope over the free boundary of the state solved with ``alpha U f^1`` data,
    iterated with ``alpha`` set to the previous median."""
    config = config or SolverConfig()
    alpha = float(alpha0)
    history = [alpha]
    init = None
    state = None
    slopes = []
    xi = tuple([1.0] + [0.0] * (grid.m - 1))
    nu = tuple([0.0] * (grid.n - 1) + [1.0])
    for _ in range(rounds):
        prof = ProfileParams(alpha=alpha, nu=nu, xi=xi)
        state = solve(lambda X, s=prof: eval_profile(s, X), grid, config, init=init)
        fb = extract_fb(state.mask, grid).within(grid, margin)
        if len(fb) == 0:
            raise RuntimeError("no free boundary away from the box edge")
        slopes = [slope(state.G, p, nv) for p, nv in zip(fb.points, fb.normals)]
        new = float(np.median(slopes))
        history.append(new)
        init = state.mask
        done = abs(new - alpha) <= tol
        alpha = new
        if done:
            break
    return AEstimate(alpha, history, slopes, state)


# --------------------------------------------------------------------------
# rotated frame helpers


def _frame(grid: Grid, nu) -> np.ndarray:
    """Orthogonal map on plate coordinates sending ``nu`` to ``e_n``."""
    nu = np.asarray(nu, dtype=float)
    if grid.n == 1:
        return np.array([[float(np.sign(nu[0]) or 1.0)]])
    e2 = nu / np.linalg.norm(nu)
    e1 = np.array([e2[1], -e2[0]])
    return np.stack([e1, e2])


def _unit_frame_nodes(G: VectorField, x0, rho: float, A: float, nu):
    P, F, pp, pm = _unit_ball_nodes(G, x0, rho, A)
    R = _frame(G.grid, nu)
    P = P.copy()
    P[:, : G.grid.n] = P[:, : G.grid.n] @ R.T
    pp = pp @ R.T
    return P, F, pp, pm


# --------------------------------------------------------------------------
# traps and Harnack decay


def _trap(P, g1, gnorm):
    """Tightest ``[lo, hi]`` with ``U(X + lo e_n) <= g1`` and ``|G| <= U(X + hi e_n)`` (unit coordinates)."""
    n = P.shape[1] - 1
    xn, y = P[:, n - 1], P[:, n]
    on_plate = y == 0
    lo_vals = []
    pos = g1 > 0
    lo_vals.append(shift_to_match(g1[pos], xn[pos], y[pos]))
    # g1 <= 0 is allowed only where U(X + lo e_n) can vanish: plate nodes with x_n + lo <= 0
    nonpos = ~pos
    if np.any(nonpos & ~on_plate):
        lo = -math.inf
    else:
        lo_vals.append(-xn[nonpos & on_plate])
        allv = np.concatenate(lo_vals)
        lo = float(allv.min()) if allv.size else math.inf
    posn = gnorm > 0
    hi_vals = shift_to_match(gnorm[posn], xn[posn], y[posn])
    hi = float(hi_vals.max()) if hi_vals.size else -math.inf
    return lo, hi


@dataclass
class HarnackReport:
    eta: float
    scales: list[float]
    widths: list[float]
    traps: list[tuple[float, float]]
    failure_scale: float | None
    eps_top: float


def harnack_decay(G: VectorField, x0, scales, A: float = 1.0, eps_bar: float = EPS_BAR) -> HarnackReport:
    """Trap widths ``b - a`` of ``U(X + a e_n) <= g^1 <= |G| <= U(X + b e_n)`` at each scale.

    The frame ``(f, nu)`` comes from ``best_flatness`` at the largest scale.
    Widths are reported in the units of the largest ball, so a geometric
    decay ``(1 - eta)^k`` per scale step is fitted to them.
    """
    scales = sorted((float(s) for s in scales), reverse=True)
    top = best_flatness(G, x0, scales[0], A)
    if top.eps > eps_bar:
        raise PreconditionError(f"flatness {top.eps:.3g} at the largest scale exceeds {eps_bar}")
    f = np.asarray(top.f)
    widths, traps = [], []
    failure = None
    for rho in scales:
        P, F, _, _ = _unit_frame_nodes(G, x0, rho, A, top.nu)
        g1 = f @ F
        lo, hi = _trap(P, g1, np.linalg.norm(F, axis=0))
        if not (math.isfinite(lo) and math.isfinite(hi)):
            failure = rho
            break
        # convert to the units of the largest ball
        scale = rho / scales[0]
        traps.append((lo * scale, hi * scale))
        widths.append(max(hi - lo, 0.0) * scale)
    eta = math.nan
    if len(widths) >= 2 and min(widths) > 0:
        k = np.arange(len(widths))
        rate, _ = np.polyfit(k, np.log(widths), 1)
        eta = float(1.0 - math.exp(rate))
    return HarnackReport(eta, scales[: len(widths)], widths, traps, failure, top.eps)


# --------------------------------------------------------------------------
# improvement of flatness


@dataclass
class IofReport:
    eps_before: float
    eps_after: float
    tolerance: float
    passed: bool
    component_max: float
    component_bound: float
    component_ok: bool
    rho: float


def iof_check(G: VectorField, x0, rho: float = 1 / 8, A: float = 1.0, unit: float = UNIT_RADIUS, eps_bar: float = EPS_BAR) -> IofReport:
    """Best flatness on ``B_1`` and on ``B_rho`` (unit coordinates); pass iff
    ``eps_after <= eps_before / 2 + 4 h^{1/2}``. Also measures
    ``|G - (G.f)f|`` on ``B_rho`` against ``(eps_before/2)^{3/4} rho^{1/2}``."""
    before = best_flatness(G, x0, unit, A)
    if before.eps > eps_bar:
        raise PreconditionError(f"flatness {before.eps:.3g} exceeds {eps_bar}")
    after = best_flatness(G, x0, rho * unit, A)
    tol = 4 * math.sqrt(G.grid.h)
    passed = after.eps <= before.eps / 2 + tol
    # component bound in unit coordinates of B_1
    P, F, _, _ = _unit_ball_nodes(G, x0, rho * unit, A)
    F = F * math.sqrt(rho)
    f = np.asarray(after.f)
    orth = F - np.outer(f, f @ F)
    cmax = float(np.max(np.linalg.norm(orth, axis=0)))
    bound = (before.eps / 2) ** 0.75 * math.sqrt(rho)
    return IofReport(before.eps, after.eps, tol, bool(passed), cmax, bound, cmax <= bound, rho)


# --------------------------------------------------------------------------
# vectorial structure


@dataclass
class ComponentReport:
    eps: float
    f: tuple[float, ...]
    nu: tuple[float, ...]
    g1_min: float
    g1_positive: bool
    C_hat: float


def component_structure(G: VectorField, x0, A: float = 1.0, unit: float = UNIT_RADIUS) -> ComponentReport:
    """In the best-flatness frame: the least value of ``<G, f>`` over positivity nodes of
    ``B_1`` and the smallest ``C`` with ``|G - (G.f)f| <= C eps U(X + eps e_n)`` on ``B_{1/2}``."""
    flat = best_flatness(G, x0, unit, A)
    P, F, _, _ = _unit_frame_nodes(G, x0, unit, A, flat.nu)
    grid = G.grid
    n = grid.n
    c = _center3(grid, x0)
    X = grid.points()
    inside = np.linalg.norm(X - c, axis=-1) <= unit + 1e-12
    plate_zero = np.zeros(grid.shape, dtype=bool)
    plate_zero[..., 0] = ~G.mask
    positive = ~plate_zero[inside]
    f = np.asarray(flat.f)
    g1 = f @ F
    g1_min = float(g1[positive].min()) if positive.any() else math.nan
    orth = np.linalg.norm(F - np.outer(f, g1), axis=0)
    half = np.linalg.norm(P, axis=1) <= 0.5 + 1e-12
    env = eval_U(P[:, n - 1] + flat.eps, P[:, n])
    sel = half & (orth > 0)
    if not sel.any():
        C = 0.0
    elif flat.eps == 0 or np.any(env[sel] == 0):
        C = math.inf
    else:
        C = float(np.max(orth[sel] / (flat.eps * env[sel])))
    return ComponentReport(flat.eps, flat.f, flat.nu, g1_min, bool(g1_min > 0), C)


def subharmonicity_defect(G: VectorField) -> float:
    """Least normalised discrete Laplacian of ``|G|`` over core nodes off the plate zero set."""
    grid = G.grid
    lap = laplacian(G.norm[None])[0]
    from .solver import free_nodes

    sel = free_nodes(grid.shape, G.mask)
    return float(lap[sel].min())


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassifyThresholds:
    density_band: float = 0.05
    singular_floor: float = 0.55
    fit_factor: float = 0.1
    scales: tuple[float, ...] = (1 / 4, 1 / 8, 1 / 16)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scales"] = list(self.scales)
        return d


@dataclass
class Classification:
    label: str
    densities: tuple[float, float]
    radii: tuple[float, float]
    fit_residual: float


def classify(G: VectorField, x0, A: float, thresholds: ClassifyThresholds | None = None) -> Classification:
    """Regular, singular or unresolved from densities at ``8h`` and ``16h`` and the blow-up fit."""
    th = thresholds or ClassifyThresholds()
    grid = G.grid
    if not is_free_boundary_point(G, x0):
        raise ValueError(f"{x0} is not a free boundary point")
    radii = (8 * grid.h, 16 * grid.h)
    dens = tuple(density_ratio(G.mask, grid, x0, r) for r in radii)
    try:
        series = blowup_series(G, x0, th.scales)
        resid = series.fits[-1].dist_inf
    except ValueError:
        resid = math.inf
    band = all(abs(d - 0.5) <= th.density_band for d in dens)
    if band and resid < th.fit_factor * A:
        label = "regular"
    elif all(d >= th.singular_floor for d in dens):
        label = "singular"
    else:
        label = "unresolved"
    return Classification(label, dens, radii, float(resid))
