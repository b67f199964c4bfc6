"""
Discrete local minimizers of J on the half box.

Components are relaxed to the discrete Laplace equation at a fixed plate
mask, with even reflection at plate nodes of mask 1 and zero at mask 0.
Relaxation is a sparse direct factorisation or red-black SOR ("auto" picks
the direct solve for 2D lattices and small 3D ones). The mask is then
improved by greedy single-node flips, each judged by re-relaxing a patch
around the node and comparing the exact discrete J before and after.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import cell_energy, dirichlet_total
from .geometry import Ball, Grid, VectorField

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SolveState",
    "BudgetExhausted",
    "relax",
    "relax_components",
    "flip_pass",
    "solve",
    "harmonic_replacement",
    "total_energy",
    "laplacian",
    "residual",
]

FLIP_ORDERS = ("lex", "reverse", "alternate", "random")
SWEEPS = ("auto", "direct", "redblack-sor")
# "auto" factorises systems up to this many unknowns in 3D (2D systems always)
AUTO_DIRECT_3D = 20000
# default patch radius in cells, by plate dimension
PATCH_RADIUS = {1: 32, 2: 8}


class BudgetExhausted(RuntimeWarning):
    pass


@dataclass
class SolverConfig:
    max_outer: int = 200
    relax_tol: float = 1e-9
    max_sweeps: int = 20000
    sweep: str = "auto"
    flip_pass_order: str = "alternate"
    patch_radius: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.relax_tol > 0:
            raise ValueError("relax_tol must be positive")
        if self.max_outer < 1 or self.max_sweeps < 1:
            raise ValueError("iteration budgets must be positive")
        if self.sweep not in SWEEPS:
            raise ValueError(f"unknown relaxation scheme {self.sweep!r}")
        if self.flip_pass_order not in FLIP_ORDERS:
            raise ValueError(f"unknown flip order {self.flip_pass_order!r}")
        if self.patch_radius is not None and self.patch_radius < 1:
            raise ValueError("patch_radius must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveState:
    G: VectorField
    energy_trace: list[float] = field(default_factory=list)
    outer_iters: int = 0
    sweeps: int = 0
    flips_accepted: int = 0
    converged: bool = False
    budget_exhausted: bool = False

    @property
    def mask(self) -> np.ndarray:
        return self.G.mask

    @property
    def grid(self) -> Grid:
        return self.G.grid


# --------------------------------------------------------------------------
# relaxation kernel


def _neighbor_avg(v: np.ndarray) -> np.ndarray:
    """Weighted neighbour average at interior-horizontal, below-top nodes.

    ``v`` has shape ``(m, *spatial)``; returns the average for the block
    ``[1:-1, ..., 1:-1, 0:-1]`` with the j = -1 neighbour reflected to j = 1.
    """
    dim = v.ndim - 1
    core = (slice(None),) + (slice(1, -1),) * (dim - 1) + (slice(0, -1),)
    s = np.zeros(v[core].shape)
    for a in range(dim - 1):
        lo = [slice(None)] + [slice(1, -1)] * (dim - 1) + [slice(0, -1)]
        hi = list(lo)
        lo[a + 1] = slice(0, -2)
        hi[a + 1] = slice(2, None)
        s += v[tuple(lo)] + v[tuple(hi)]
    horiz = (slice(None),) + (slice(1, -1),) * (dim - 1)
    up = v[horiz + (slice(1, None),)]
    down = np.concatenate([v[horiz + (slice(1, 2),)], v[horiz + (slice(0, -2),)]], axis=-1)
    s += up + down
    return s / (2 * dim)


def _core(dim):
    return (slice(1, -1),) * (dim - 1) + (slice(0, -1),)


def free_nodes(shape, mask: np.ndarray, pinned: np.ndarray | None = None) -> np.ndarray:
    """Nodes updated by relaxation: interior, below the top, plate only where mask is set."""
    free = np.zeros(shape, dtype=bool)
    dim = len(shape)
    free[_core(dim)] = True
    plate = free[..., 0]
    plate &= np.asarray(mask, dtype=bool)
    if pinned is not None:
        free &= ~pinned
    return free


def residual(values: np.ndarray, free: np.ndarray) -> float:
    """Largest ``|avg(neighbours) - g|`` over free nodes and components."""
    dim = values.ndim - 1
    core = _core(dim)
    avg = _neighbor_avg(values)
    diff = np.abs(avg - values[(slice(None),) + core])
    f = free[core]
    if not f.any():
        return 0.0
    return float(diff[:, f].max())


def laplacian(values: np.ndarray) -> np.ndarray:
    """Normalised discrete Laplacian ``avg(neighbours) - g`` on the core block, zero elsewhere."""
    comp = np.asarray(values, dtype=float)
    out = np.zeros_like(comp)
    dim = comp.ndim - 1
    core = (slice(None),) + _core(dim)
    out[core] = _neighbor_avg(comp) - comp[core]
    return out


def sor_omega(shape) -> float:
    """``2 / (1 + sin(pi h / 2R))`` in index units for the longest axis."""
    L = max(max(s - 1 for s in shape[:-1]) / 2, shape[-1] - 1)
    return 2.0 / (1.0 + math.sin(math.pi / (2 * L)))


def relax(values: np.ndarray, free: np.ndarray, tol: float, max_sweeps: int, omega: float | None = None):
    """Red-black SOR in place until the residual is below ``tol``.

    Returns ``(sweeps, residual)``.
    """
    dim = values.ndim - 1
    shape = values.shape[1:]
    if omega is None:
        omega = sor_omega(shape)
    core = _core(dim)
    idx = np.indices(shape).sum(axis=0)
    colors = [free & (idx % 2 == 0), free & (idx % 2 == 1)]
    ccore = [c[core] for c in colors]
    if not free.any():
        return 0, 0.0
    res = residual(values, free)
    sweeps = 0
    check = 10
    while res > tol and sweeps < max_sweeps:
        for _ in range(check):
            for cc in ccore:
                avg = _neighbor_avg(values)
                blk = values[(slice(None),) + core]
                upd = blk + omega * (avg - blk)
                blk[:, cc] = upd[:, cc]
            sweeps += 1
        res = residual(values, free)
    return sweeps, res


def _neighbor_offsets(dim):
    for a in range(dim):
        for d in (-1, 1):
            off = [0] * dim
            off[a] = d
            yield off


def relax_direct(values: np.ndarray, free: np.ndarray):
    """Solve the discrete Laplace system on ``free`` exactly (sparse LU), in place.

    Returns ``(0, residual)`` so it can stand in for :func:`relax`.
    """
    shape = free.shape
    dim = len(shape)
    coords = np.nonzero(free)
    k = coords[0].size
    if k == 0:
        return 0, 0.0
    index = -np.ones(shape, dtype=np.int64)
    index[coords] = np.arange(k)
    w = 1.0 / (2 * dim)
    rows = [np.arange(k)]
    cols = [np.arange(k)]
    data = [np.ones(k)]
    rhs = np.zeros((k, values.shape[0]))
    for off in _neighbor_offsets(dim):
        q = [c + o for c, o in zip(coords, off)]
        # even reflection across the plate
        q[-1] = np.abs(q[-1])
        qi = index[tuple(q)]
        inner = qi >= 0
        rows.append(np.nonzero(inner)[0])
        cols.append(qi[inner])
        data.append(np.full(int(inner.sum()), -w))
        outer = ~inner
        rhs[outer] += w * values[(slice(None),) + tuple(c[outer] for c in q)].T
    A = sp.csc_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(k, k))
    sol = spla.splu(A).solve(rhs)
    values[(slice(None),) + coords] = sol.T
    return 0, residual(values, free)


def _relax(values, free, config: SolverConfig):
    use_direct = config.sweep == "direct" or (
        config.sweep == "auto" and (free.ndim == 2 or int(free.sum()) <= AUTO_DIRECT_3D)
    )
    if use_direct:
        return relax_direct(values, free)
    return relax(values, free, config.relax_tol, config.max_sweeps)


def total_energy(G: VectorField) -> float:
    """Discrete J over the whole box: doubled Dirichlet plus h^n times the free mask count."""
    grid = G.grid
    measure = float(np.sum(G.mask & grid.plate_interior())) * grid.h**grid.n
    return dirichlet_total(G.values, grid.h) + measure


def _enforce(G: VectorField):
    zero = ~G.mask & G.grid.plate_interior()
    G.values[..., 0][:, zero] = 0.0


def relax_components(state: SolveState, config: SolverConfig) -> SolveState:
    G = state.G
    _enforce(G)
    free = free_nodes(G.grid.shape, G.mask)
    sweeps, res = _relax(G.values, free, config)
    state.sweeps += sweeps
    state.energy_trace.append(total_energy(G))
    if res > config.relax_tol:
        state.budget_exhausted = True
        warnings.warn(f"relaxation stopped at residual {res:.3e} > {config.relax_tol:.1e}", BudgetExhausted)
    return state


# --------------------------------------------------------------------------
# mask flips


def _boundary_candidates(mask: np.ndarray, interior: np.ndarray) -> np.ndarray:
    """Interior plate nodes with at least one axis neighbour of the other mask value."""
    cand = np.zeros(mask.shape, dtype=bool)
    m = mask.astype(np.int8)
    for a in range(mask.ndim):
        d = np.diff(m, axis=a) != 0
        lo = [slice(None)] * mask.ndim
        hi = [slice(None)] * mask.ndim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        cand[tuple(lo)] |= d
        cand[tuple(hi)] |= d
    return cand & interior


def _patch_slices(idx, grid: Grid, radius: int):
    sl = []
    for k, i in enumerate(idx):
        sl.append(slice(max(i - radius, 0), min(i + radius + 1, grid.shape[k])))
    sl.append(slice(0, min(radius + 1, grid.shape[-1])))
    return tuple(sl)


def try_flip(G: VectorField, idx, config: SolverConfig, commit: bool = True) -> float:
    """Toggle the mask at plate node ``idx`` and re-relax a patch around it.

    Returns the exact change in J for the patch-relaxed candidate; the
    change is committed only if it is below ``-relax_tol``.
    """
    grid = G.grid
    radius = config.patch_radius or PATCH_RADIUS[grid.n]
    sl = _patch_slices(idx, grid, radius)
    vals = G.values[(slice(None),) + sl].copy()
    pmask = G.mask[sl[:-1]].copy()
    local = tuple(i - s.start for i, s in zip(idx, sl[:-1]))
    before = 2.0 * float(np.sum(cell_energy(vals, grid.h)))
    new_state = not pmask[local]
    pmask[local] = new_state
    # patch faces stay fixed; so do true boundary nodes
    pinned = grid.boundary_mask()[sl]
    free = free_nodes(vals.shape[1:], pmask, pinned)
    if not new_state:
        vals[(slice(None),) + local + (0,)] = 0.0
    _relax(vals, free, config)
    after = 2.0 * float(np.sum(cell_energy(vals, grid.h)))
    dJ = after - before + (grid.h**grid.n if new_state else -(grid.h**grid.n))
    if commit and dJ < -config.relax_tol:
        G.values[(slice(None),) + sl] = vals
        G.mask[sl[:-1]] = pmask
    return dJ


def _order(cands: list, config: SolverConfig, pass_no: int) -> list:
    mode = config.flip_pass_order
    if mode == "reverse" or (mode == "alternate" and pass_no % 2 == 1):
        return cands[::-1]
    if mode == "random":
        rng = np.random.default_rng(config.seed + pass_no)
        return [cands[i] for i in rng.permutation(len(cands))]
    return cands


def flip_pass(state: SolveState, config: SolverConfig, pass_no: int = 0) -> int:
    """One traversal of the plate; returns the number of accepted flips."""
    G = state.G
    grid = G.grid
    interior = grid.plate_interior()
    nodes = [tuple(int(i) for i in ix) for ix in zip(*np.nonzero(interior))]
    accepted = 0
    for idx in _order(nodes, config, pass_no):
        # candidacy is re-evaluated as the mask changes during the pass
        if not _is_candidate(G.mask, idx):
            continue
        dJ = try_flip(G, idx, config)
        if dJ < -config.relax_tol:
            accepted += 1
            state.energy_trace.append(state.energy_trace[-1] + dJ if state.energy_trace else total_energy(G))
    state.flips_accepted += accepted
    return accepted


def _is_candidate(mask: np.ndarray, idx) -> bool:
    v = mask[idx]
    for a in range(mask.ndim):
        for d in (-1, 1):
            j = list(idx)
            j[a] += d
            if 0 <= j[a] < mask.shape[a] and mask[tuple(j)] != v:
                return True
    return False


# --------------------------------------------------------------------------
# driver


def boundary_field(grid: Grid, phi) -> np.ndarray:
    """Dirichlet data on the lateral and top faces, zero elsewhere.

    ``phi`` is a full-grid array (only its boundary values are used) or a
    callable mapping points ``(..., n+1)`` to ``(m, ...)``.
    """
    if callable(phi):
        data = np.asarray(phi(grid.points()), dtype=float)
    else:
        data = np.asarray(phi, dtype=float)
    if data.shape != (grid.m,) + grid.shape:
        raise ValueError(f"boundary data shape {data.shape} != {(grid.m,) + grid.shape}")
    out = np.zeros_like(data)
    b = grid.boundary_mask()
    out[:, b] = data[:, b]
    return out


def initial_mask(grid: Grid, values: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Threshold the trace of the plate-unconstrained harmonic extension at ``h^{1/2}/4``."""
    work = values.copy()
    full = np.ones(grid.plate_shape, dtype=bool)
    _relax(work, free_nodes(grid.shape, full), config)
    trace = np.sqrt(np.sum(work[..., 0] ** 2, axis=0))
    return trace > grid.h**0.5 / 4


def _edge_mask(grid: Grid, values: np.ndarray) -> np.ndarray:
    # lateral plate nodes carry data, their mask is |Phi| > 0
    trace = np.sqrt(np.sum(values[..., 0] ** 2, axis=0))
    return trace > 0


def solve(phi, grid: Grid, config: SolverConfig | None = None, init=None) -> SolveState:
    """Alternate relaxation and flip passes until a pass accepts nothing."""
    config = config or SolverConfig()
    values = boundary_field(grid, phi)
    edge = _edge_mask(grid, values) & ~grid.plate_interior()
    if not np.any(values):
        G = VectorField(grid, values, np.zeros(grid.plate_shape, dtype=bool))
        state = SolveState(G, energy_trace=[0.0], converged=True)
        return state
    if init is None:
        mask = initial_mask(grid, values, config)
    else:
        mask = np.asarray(init, dtype=bool).copy()
    mask = np.where(grid.plate_interior(), mask, edge)
    G = VectorField(grid, values, mask)
    state = SolveState(G)
    relax_components(state, config)
    for outer in range(config.max_outer):
        state.outer_iters = outer + 1
        accepted = flip_pass(state, config, pass_no=outer)
        relax_components(state, config)
        log.debug("outer %d: %d flips, J=%.10f", outer, accepted, state.energy_trace[-1])
        if accepted == 0 and not state.budget_exhausted:
            state.converged = True
            break
    else:
        state.budget_exhausted = True
        warnings.warn(f"no flip-stable state after {config.max_outer} passes", BudgetExhausted)
    return state


# --------------------------------------------------------------------------
# harmonic replacement


def ball_nodes(grid: Grid, ball: Ball) -> np.ndarray:
    X = grid.points()
    c = np.array(list(ball.center) + [0.0])
    return np.linalg.norm(X - c, axis=-1) < ball.radius


def harmonic_replacement(G: VectorField, i: int, ball: Ball, tol: float = 1e-10, max_sweeps: int = 50000) -> np.ndarray:
    """Component ``i`` made discrete-harmonic at the nodes inside ``ball``.

    Plate nodes inside the ball use the even reflection regardless of the
    mask. Everything outside keeps its values. Returns the full component
    array.
    """
    grid = G.grid
    ball.check_inside(grid)
    comp = G.values[i][None].copy()
    free = ball_nodes(grid, ball) & free_nodes(grid.shape, np.ones(grid.plate_shape, dtype=bool))
    sweeps, res = relax(comp, free, tol, max_sweeps)
    if res > tol:
        raise RuntimeError(f"harmonic replacement did not converge (residual {res:.3e})")
    return comp[0]


def replacement_cells(grid: Grid, ball: Ball) -> np.ndarray:
    """Cells touching a node that the replacement is free to change."""
    free = ball_nodes(grid, ball)
    cells = np.zeros(grid.cell_shape, dtype=bool)
    dim = grid.n + 1
    for corner in np.ndindex(*(2,) * dim):
        sl = tuple(slice(c, c + s) for c, s in zip(corner, grid.cell_shape))
        cells |= free[sl]
    return cells


def bilinear_form(a: np.ndarray, b: np.ndarray, h: float, cells: np.ndarray) -> float:
    """Reflection-doubled ``int <grad a, grad b>`` restricted to ``cells`` (polarisation of cell_energy)."""
    ea = cell_energy((a + b)[None], h)
    eb = cell_energy((a - b)[None], h)
    return 0.5 * float(np.sum(((ea - eb) * cells)))


def component_energy(a: np.ndarray, h: float, cells: np.ndarray) -> float:
    return 2.0 * float(np.sum(cell_energy(a[None], h) * cells))
