"""
Run configuration and the solve / diagnose pipeline behind the CLI.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    EPS_BAR,
    UNIT_RADIUS,
    ClassifyThresholds,
    PreconditionError,
    best_flatness,
    classify,
    component_structure,
    density_ratio,
    extract_fb,
    refine_fb,
    harnack_decay,
    holder_fit,
    iof_check,
    nondeg_fit,
    slope,
)
from .blowup import blowup_columns, blowup_series
from .energy import ENERGY_COLUMNS, energy, scaling_check
from .fieldio import FieldFileError, read_field, write_field
from .geometry import Ball, Grid, VectorField, make_grid
from .profiles import ProfileParams, eval_profile
from .solver import BudgetExhausted, SolverConfig, SolveState, solve
from .weiss import WEISS_COLUMNS, weiss_series

__all__ = [
    "ConfigError",
    "RunConfig",
    "DiagnosticsConfig",
    "load_config",
    "run_solve",
    "run_diagnose",
    "CHECKS",
    "CRITERIA",
]

CHECKS = ("weiss", "scaling", "density", "regularity", "vectorial", "blowup", "flatness", "harnack", "iof", "classify")

# acceptance criterion -> check that produces it
CRITERIA = {
    "2": "weiss",
    "3": "scaling",
    "4": "density",
    "5": "regularity",
    "6": "vectorial",
    "7": "blowup",
    "8": "iof",
}

CRITERION_NAMES = {
    "2": "Weiss monotonicity",
    "3": "scaling identity",
    "4": "density estimates",
    "5": "regularity and non-degeneracy",
    "6": "vectorial structure",
    "7": "blow-up homogeneity",
    "8": "improvement of flatness",
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass
class DiagnosticsConfig:
    checks: list[str] = field(default_factory=list)
    A: float | None = None
    weiss_r_min: float | None = None
    weiss_r_max: float = 0.25
    weiss_k: int = 5
    weiss_tol: float | None = None
    weiss_slope_tol: float | None = None
    density_band: tuple[float, float] = (0.05, 0.95)
    regular_density_band: tuple[float, float] = (0.45, 0.55)
    growth_radii: tuple[float, ...] = (1 / 16, 1 / 8, 1 / 4)
    growth_slope_band: tuple[float, float] = (0.45, 0.55)
    unit_radius: float = UNIT_RADIUS
    eps_bar: float = EPS_BAR
    flat_threshold: float = 0.1
    component_C_max: float = 20.0
    blowup_scales: tuple[float, ...] = (1 / 4, 1 / 8, 1 / 16)
    fit_factor: float = 0.1
    density_tolerance: float = 0.05
    singular_floor: float = 0.55
    iof_rho: float = 1 / 8
    iof_pass_fraction: float = 0.9
    harnack_scales: tuple[float, ...] = (1 / 2, 1 / 4, 1 / 8, 1 / 16)
    scaling_pairs: tuple[tuple[float, float], ...] = ((1 / 2, 1 / 2), (1 / 4, 1 / 2))
    scaling_tol: float | None = None
    margin: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown diagnostics keys: {sorted(unknown)}")
        kw = dict(d)
        for k in ("density_band", "regular_density_band", "growth_radii", "growth_slope_band", "blowup_scales", "harnack_scales"):
            if k in kw:
                kw[k] = tuple(kw[k])
        if "scaling_pairs" in kw:
            kw["scaling_pairs"] = tuple(tuple(p) for p in kw["scaling_pairs"])
        cfg = cls(**kw)
        bad = [c for c in cfg.checks if c not in CHECKS]
        if bad:
            raise ConfigError(f"unknown checks {bad}; choose from {list(CHECKS)}")
        return cfg

    def thresholds(self, h: float) -> dict:
        """Every number a check compares against, with grid-dependent defaults resolved."""
        d = asdict(self)
        d.pop("checks")
        d["weiss_r_min"] = self.weiss_r_min or 8 * h
        d["weiss_tol"] = 5 * h if self.weiss_tol is None else self.weiss_tol
        d["weiss_slope_tol"] = 10 * h if self.weiss_slope_tol is None else self.weiss_slope_tol
        d["scaling_tol"] = 10 * h if self.scaling_tol is None else self.scaling_tol
        d["iof_tolerance"] = 4 * math.sqrt(h)
        d["density_radii"] = density_radii(h, self.weiss_r_max)
        d["classify_radii"] = [8 * h, 16 * h]
        d["margin"] = self.resolved_margin(h)
        return json.loads(json.dumps(d))

    def resolved_margin(self, h: float) -> float:
        if self.margin is not None:
            return self.margin
        reach = max(self.unit_radius, self.weiss_r_max + h, max(self.blowup_scales), max(self.growth_radii))
        return reach + 2 * h


def density_radii(h: float, r_max: float) -> list[float]:
    radii, r = [], 8 * h
    while r <= r_max + 1e-12:
        radii.append(r)
        r *= 2
    return radii


@dataclass
class RunConfig:
    grid: Grid
    profiles: list[ProfileParams]
    amplitude: float | str
    field_path: str | None
    solver: SolverConfig
    diagnostics: DiagnosticsConfig
    out_dir: str
    formats: list[str]
    raw: dict


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing '{key}' in {where}")
    return d[key]


def parse_config(raw: dict, base: Path | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    g = _require(raw, "grid", "config")
    try:
        grid = make_grid(int(g["n"]), int(g["m"]), float(g["h"]), float(g.get("extent", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid block: {exc}") from exc
    bd = raw.get("boundary_data", {})
    profiles, field_path = [], None
    try:
        profiles = [ProfileParams.from_dict(p) for p in bd.get("profiles", [])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid profile: {exc}") from exc
    for p in profiles:
        if len(p.nu) != grid.n or len(p.xi) != grid.m:
            raise ConfigError("profile dimensions do not match the grid")
    if "field" in bd:
        fp = Path(bd["field"])
        if base is not None and not fp.is_absolute():
            fp = base / fp
        if not fp.exists():
            raise ConfigError(f"boundary field file {fp} does not exist")
        field_path = str(fp)
    amplitude = bd.get("amplitude", 1.0)
    if not (amplitude == "A*" or (isinstance(amplitude, (int, float)) and amplitude > 0)):
        raise ConfigError("amplitude must be a positive number or \"A*\"")
    try:
        solver = SolverConfig.from_dict(raw.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver block: {exc}") from exc
    try:
        diagnostics = DiagnosticsConfig.from_dict(raw.get("diagnostics", {}))
    except TypeError as exc:
        raise ConfigError(f"invalid diagnostics block: {exc}") from exc
    out = raw.get("output", {})
    return RunConfig(
        grid=grid,
        profiles=profiles,
        amplitude=amplitude,
        field_path=field_path,
        solver=solver,
        diagnostics=diagnostics,
        out_dir=out.get("dir", "out"),
        formats=list(out.get("formats", ["csv", "json"])),
        raw=raw,
    )


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, base=p.parent)


# --------------------------------------------------------------------------
# solve


def versions() -> dict:
    return {
        "thinfb": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def boundary_values(cfg: RunConfig, A: float | None):
    scale = A if cfg.amplitude == "A*" else float(cfg.amplitude)
    if cfg.field_path is not None:
        src = read_field(cfg.field_path)
        if src.grid != cfg.grid:
            raise ConfigError("boundary field grid does not match the config grid")
        return scale * src.values
    profs = cfg.profiles

    def phi(X):
        out = np.zeros((cfg.grid.m,) + X.shape[:-1])
        for s in profs:
            out += eval_profile(s, X)
        return scale * out

    return phi


@dataclass
class SolveResult:
    state: SolveState
    A: float | None
    wall_time: float


def run_solve(cfg: RunConfig, out_dir: Path, threads: int = 1) -> SolveResult:
    from .analysis import estimate_A

    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    A = None
    if cfg.amplitude == "A*":
        A = estimate_A(cfg.grid, cfg.solver).A
    phi = boundary_values(cfg, A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetExhausted)
        state = solve(phi, cfg.grid, cfg.solver)
    wall = time.perf_counter() - t0
    write_field(out_dir / "field.thf", state.G)
    with open(out_dir / "energy_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "J"])
        for i, J in enumerate(state.energy_trace):
            w.writerow([i, repr(float(J))])
    manifest = {
        "command": "solve",
        "config": cfg.raw,
        "versions": versions(),
        "threads": threads,
        "wall_time_s": wall,
        "A_star": A,
        "solver": {**cfg.solver.to_dict(), "outer_iters": state.outer_iters, "flips_accepted": state.flips_accepted},
        "converged": state.converged,
        "budget_exhausted": state.budget_exhausted,
        "thresholds": {"relax_tol": cfg.solver.relax_tol, "mask_threshold": cfg.grid.h**0.5 / 4},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return SolveResult(state, A, wall)


# --------------------------------------------------------------------------
# diagnose


def _f(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


class _PointCache:
    """Lazily computed per-point quantities shared between checks."""

    def __init__(self, G: VectorField, A: float, dc: DiagnosticsConfig):
        self.G, self.A, self.dc = G, A, dc
        self._cls, self._flat = {}, {}

    def classification(self, k, p):
        if k not in self._cls:
            th = ClassifyThresholds(self.dc.density_tolerance, self.dc.singular_floor, self.dc.fit_factor, tuple(self.dc.blowup_scales))
            self._cls[k] = classify(self.G, p, self.A, th)
        return self._cls[k]

    def flatness(self, k, p):
        if k not in self._flat:
            self._flat[k] = best_flatness(self.G, p, self.dc.unit_radius, self.A)
        return self._flat[k]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in r])


def estimate_field_A(G: VectorField, margin: float) -> float:
    fb = extract_fb(G.mask, G.grid).within(G.grid, margin)
    if len(fb) == 0:
        raise ValueError("no free boundary points to estimate A* from")
    return float(np.median([slope(G, p, nv) for p, nv in zip(fb.points, fb.normals)]))


def run_diagnose(G: VectorField, dc: DiagnosticsConfig, out_dir: Path, checks=None) -> dict:
    """Run the selected checks; write CSV/JSON reports and verdict.json. Returns the verdict."""
    out_dir.mkdir(parents=True, exist_ok=True)
    checks = list(dc.checks if checks is None else checks)
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise ConfigError(f"unknown checks {bad}")
    grid = G.grid
    h = grid.h
    th = dc.thresholds(h)
    verdict = {"checks": sorted(checks), "criteria": {}, "points": []}
    if not checks:
        (out_dir / "verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True))
        return verdict
    margin = th["margin"]
    try:
        fb = extract_fb(G.mask, grid).within(grid, margin)
    except ValueError:
        fb = None
    # lattice checks use the extracted edge midpoints; blow-ups are centred on the sub-cell estimate
    points = [] if fb is None else list(zip(fb.points, fb.normals))
    centers = [] if fb is None else list(refine_fb(G, fb).points)
    A = dc.A if dc.A is not None else (estimate_field_A(G, margin) if points else 1.0)
    th["A"] = A
    cache = _PointCache(G, A, dc)
    records = [
        {"index": k, "x": [float(v) for v in p], "x_refined": [float(v) for v in c], "normal": [float(v) for v in nv]}
        for k, ((p, nv), c) in enumerate(zip(points, centers))
    ]
    results: dict[str, dict] = {}

    def criterion(key, passed, failures, **extra):
        results[key] = {"name": CRITERION_NAMES[key], "pass": bool(passed), "failures": failures, **extra}

    def vacuous(key, what):
        criterion(key, False, [f"no {what} to test"])

    if "classify" in checks or "density" in checks or "blowup" in checks or "iof" in checks:
        for k, c0 in enumerate(centers):
            c = cache.classification(k, c0)
            records[k]["label"] = c.label
            records[k]["classify_densities"] = [float(v) for v in c.densities]
            records[k]["fit_residual"] = _f(c.fit_residual)

    if "weiss" in checks:
        rows, energy_rows, fails = [], [], []
        for k, (p, _) in enumerate(points):
            ws = weiss_series(G, None, p, th["weiss_r_min"], dc.weiss_r_max, dc.weiss_k, th["weiss_tol"], th["weiss_slope_tol"])
            for row in ws.rows():
                rows.append([k, *row])
            for r in ws.radii:
                e = energy(G, Ball(tuple(float(v) for v in p), r))
                energy_rows.append([k, *e.row()])
            records[k]["weiss"] = {"W": ws.W, "slopes": ws.slopes, "deriv_lb": ws.deriv_lb, "W_8h": ws.W[0]}
            if ws.violations() or ws.bound_violations():
                fails.append({"point": k, "drops": ws.violations(), "below_lower_bound": ws.bound_violations()})
        _write_csv(out_dir / "weiss.csv", ["point", *WEISS_COLUMNS], rows)
        _write_csv(out_dir / "energy.csv", ["point", *ENERGY_COLUMNS], energy_rows)
        if points:
            criterion("2", not fails, fails)
        else:
            vacuous("2", "free boundary points")

    if "scaling" in checks:
        fails, pairs = [], []
        center = tuple(float(v) for v in points[0][0]) if points else (0.0,) * grid.n
        for r, R in dc.scaling_pairs:
            lhs, rhs = scaling_check(G, center, r, R)
            pairs.append({"r": r, "R": R, "lhs": lhs, "rhs": rhs, "diff": abs(lhs - rhs)})
            if abs(lhs - rhs) > th["scaling_tol"]:
                fails.append({"r": r, "R": R, "diff": abs(lhs - rhs)})
        criterion("3", not fails, fails, pairs=pairs, center=list(center))

    if "density" in checks:
        fails = []
        lo, hi = dc.density_band
        rlo, rhi = dc.regular_density_band
        for k, (p, _) in enumerate(points):
            dens = [density_ratio(G.mask, grid, p, r) for r in th["density_radii"]]
            records[k]["density"] = dict(zip([repr(r) for r in th["density_radii"]], dens))
            bad = [r for r, d in zip(th["density_radii"], dens) if not lo <= d <= hi]
            if bad:
                fails.append({"point": k, "radii": bad})
            if records[k].get("label") == "regular" and not rlo <= dens[0] <= rhi:
                fails.append({"point": k, "regular_density": dens[0]})
        if points:
            criterion("4", not fails, fails)
        else:
            vacuous("4", "free boundary points")

    if "regularity" in checks:
        fails = []
        lo, hi = dc.growth_slope_band
        for k, (p, _) in enumerate(points):
            hf = holder_fit(G, p, dc.growth_radii)
            nf = nondeg_fit(G, p, dc.growth_radii)
            records[k]["holder"] = {"slope": _f(hf.slope), "C1": _f(hf.constant)}
            records[k]["nondeg"] = {"slope": _f(nf.slope), "c": _f(nf.constant)}
            ok = lo <= hf.slope <= hi and lo <= nf.slope <= hi and nf.constant > 0
            if not ok:
                fails.append({"point": k, "holder_slope": _f(hf.slope), "nondeg_slope": _f(nf.slope), "c": _f(nf.constant)})
        if points:
            criterion("5", not fails, fails)
        else:
            vacuous("5", "free boundary points")

    if "flatness" in checks or "vectorial" in checks or "iof" in checks or "harnack" in checks:
        for k, (p, _) in enumerate(points):
            fl = cache.flatness(k, p)
            records[k]["flatness"] = {"eps": fl.eps, "sup_term": fl.sup_term, "zero_term": fl.zero_term, "f": list(fl.f), "nu": list(fl.nu), "rho": fl.rho}
            records[k]["slope"] = slope(G, p, points[k][1])

    flat_pts = [k for k, (p, _) in enumerate(points) if "flatness" in records[k] and records[k]["flatness"]["eps"] <= dc.flat_threshold]

    if "vectorial" in checks:
        fails, Cs = [], []
        for k in flat_pts:
            rep = component_structure(G, points[k][0], A, dc.unit_radius)
            records[k]["vectorial"] = {"g1_min": rep.g1_min, "C_hat": _f(rep.C_hat)}
            Cs.append(rep.C_hat)
            if not rep.g1_positive or not rep.C_hat <= dc.component_C_max:
                fails.append({"point": k, "g1_min": rep.g1_min, "C_hat": _f(rep.C_hat)})
        if flat_pts:
            criterion("6", not fails, fails, C_hat_max=_f(max(Cs)))
        else:
            vacuous("6", "flat free boundary points")

    if "blowup" in checks:
        rows, fails, regular = [], [], 0
        n, m = grid.n, grid.m
        for k, c0 in enumerate(centers):
            try:
                bs = blowup_series(G, c0, dc.blowup_scales)
            except ValueError as exc:
                records[k]["blowup_error"] = str(exc)
                continue
            for row in bs.rows():
                rows.append([k, *row])
            records[k]["blowup"] = {"dist_inf": bs.dist, "alpha": [f.alpha for f in bs.fits], "nonincreasing": bs.nonincreasing, "stabilized": bs.stabilized}
            if records[k].get("label") == "regular":
                regular += 1
                final = bs.fits[-1].dist_inf
                if not bs.nonincreasing or final > dc.fit_factor * A:
                    fails.append({"point": k, "dist_inf": bs.dist, "bound": dc.fit_factor * A})
        _write_csv(out_dir / "blowup.csv", ["point", *blowup_columns(n, m)], rows)
        if regular:
            criterion("7", not fails, fails)
        else:
            vacuous("7", "regular free boundary points")

    if "harnack" in checks:
        for k in flat_pts:
            try:
                hr = harnack_decay(G, points[k][0], dc.harnack_scales, A, dc.eps_bar)
                records[k]["harnack"] = {"eta": _f(hr.eta), "widths": hr.widths, "failure_scale": hr.failure_scale}
            except PreconditionError as exc:
                records[k]["harnack"] = {"error": str(exc)}

    if "iof" in checks:
        tested, fails = 0, []
        for k in flat_pts:
            if records[k].get("label") != "regular":
                continue
            try:
                rep = iof_check(G, points[k][0], dc.iof_rho, A, dc.unit_radius, dc.eps_bar)
            except PreconditionError as exc:
                records[k]["iof"] = {"error": str(exc)}
                continue
            tested += 1
            records[k]["iof"] = {
                "eps_before": rep.eps_before,
                "eps_after": rep.eps_after,
                "tolerance": rep.tolerance,
                "pass": rep.passed,
                "component_max": rep.component_max,
                "component_bound": rep.component_bound,
            }
            if not rep.passed:
                fails.append({"point": k, "eps_before": rep.eps_before, "eps_after": rep.eps_after})
        if tested:
            frac = 1 - len(fails) / tested
            criterion("8", frac >= dc.iof_pass_fraction, fails, pass_fraction=frac, tested=tested)
        else:
            vacuous("8", "flat regular free boundary points")

    verdict["criteria"] = {k: results[k] for k in sorted(results)}
    verdict["points"] = records
    verdict["thresholds"] = th
    (out_dir / "diagnostics.json").write_text(json.dumps(records, indent=2, sort_keys=True, default=_f))
    if records:
        summary = []
        for r in records:
            summary.append([
                r["index"],
                " ".join(repr(v) for v in r["x"]),
                " ".join(repr(v) for v in r["x_refined"]),
                r.get("label", ""),
                r.get("slope", math.nan),
                r.get("flatness", {}).get("eps", math.nan),
                r.get("holder", {}).get("slope", math.nan) if r.get("holder") else math.nan,
                r.get("nondeg", {}).get("c", math.nan) if r.get("nondeg") else math.nan,
            ])
        _write_csv(out_dir / "points.csv", ["point", "x", "x_refined", "label", "slope", "flatness", "holder_slope", "nondeg_c"], summary)
    (out_dir / "verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True, default=_f))
    return verdict
