"""
Closed-form fields built from the half-plane ground state

    U(t, s) = Re sqrt(t + i s) = r^{1/2} cos(theta / 2),  theta in [-pi, pi],

and its translates, rotations and amplitudes ``alpha U(<x,nu> - c, x_{n+1}) xi``.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .geometry import Grid, VectorField, positivity_mask

__all__ = [
    "ProfileParams",
    "eval_U",
    "grad_U",
    "grad_U_sq",
    "eval_profile",
    "sample_profiles",
    "shift_to_match",
    "is_strict_subsolution",
    "is_strict_supersolution",
]

KINDS = ("halfplane", "comparison")


def eval_U(t, s):
    """``U(t, s) = r^{1/2} cos(theta/2)``; vanishes exactly on ``{t <= 0, s = 0}``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    r = np.hypot(t, s)
    theta = np.arctan2(s, t)
    # arctan2(+0, t<0) = pi and arctan2(-0, t<0) = -pi; both give cos(pi/2) ~ 6e-17
    out = np.sqrt(r) * np.cos(0.5 * theta)
    return np.where((s == 0) & (t <= 0), 0.0, out)


def grad_U(t, s):
    """Gradient ``(dU/dt, dU/ds)`` off the slit: real and minus-imaginary parts of 1/(2 sqrt z)."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    r = np.hypot(t, s)
    theta = np.arctan2(s, t)
    c = 0.5 / np.sqrt(r)
    return c * np.cos(0.5 * theta), c * np.sin(0.5 * theta)


def grad_U_sq(X) -> float:
    """``|grad U|^2 = 1 / (4 |X|)`` at a point of the (t, s) plane."""
    X = np.asarray(X, dtype=float)
    r = np.hypot(X[..., 0], X[..., 1])
    if np.any(r == 0):
        raise ValueError("|grad U|^2 is singular at the origin")
    return 0.25 / r


@dataclass(frozen=True)
class ProfileParams:
    kind: str = "halfplane"
    alpha: float = 1.0
    nu: tuple[float, ...] = (1.0,)
    shift: float = 0.0
    xi: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError(f"amplitude must be positive, got {self.alpha}")
        for name in ("nu", "xi"):
            v = np.asarray(getattr(self, name), dtype=float)
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a unit vector, got {v.tolist()}")
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileParams":
        known = {k: d[k] for k in ("kind", "alpha", "nu", "shift", "xi") if k in d}
        for k in ("nu", "xi"):
            if k in known:
                known[k] = tuple(known[k])
        return cls(**known)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["nu"] = list(self.nu)
        d["xi"] = list(self.xi)
        return d


def eval_profile(prof: ProfileParams, X) -> np.ndarray:
    """``xi * alpha * U(<x,nu> - c, x_{n+1})``; returns shape ``(m, ...)``."""
    X = np.asarray(X, dtype=float)
    n = len(prof.nu)
    if X.shape[-1] != n + 1:
        raise ValueError(f"point dimension {X.shape[-1]} does not match nu in R^{n}")
    t = X[..., :n] @ np.asarray(prof.nu) - prof.shift
    u = prof.alpha * eval_U(t, X[..., n])
    xi = np.asarray(prof.xi).reshape((-1,) + (1,) * u.ndim)
    return xi * u


def sample_profiles(grid: Grid, profs, tau: float | None = None) -> VectorField:
    """Sum of closed-form profiles sampled on the grid, mask by thresholding."""
    if isinstance(profs, ProfileParams):
        profs = [profs]
    X = grid.points()
    vals = np.zeros((grid.m,) + grid.shape)
    for prof in profs:
        if len(prof.xi) != grid.m or len(prof.nu) != grid.n:
            raise ValueError("profile dimensions do not match the grid")
        vals += eval_profile(prof, X)
    return VectorField(grid, vals, positivity_mask(vals, grid, tau))


def shift_to_match(value, x_n, y):
    """Shift ``s`` with ``U(x_n + s, y) = value`` for ``value > 0``.

    From sqrt(z) = p + i q with p = value and 2 p q = y.
    """
    v = np.asarray(value, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return v * v - np.asarray(y) ** 2 / (4 * v * v) - np.asarray(x_n)


def is_strict_subsolution(prof: ProfileParams) -> bool:
    # translates of U are harmonic off their zero set, so strictness is carried by alpha alone
    if prof.kind != "comparison":
        raise ValueError("sub/supersolution tests apply to comparison profiles")
    return prof.alpha > 1.0


def is_strict_supersolution(prof: ProfileParams) -> bool:
    if prof.kind != "comparison":
        raise ValueError("sub/supersolution tests apply to comparison profiles")
    return prof.alpha < 1.0
