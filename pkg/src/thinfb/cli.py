"""
Command line entry point: ``thinfb solve | diagnose | verify``.

Exit codes: 0 success, 1 verification failure, 2 invalid input,
3 solver budget exhausted (partial output is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .fieldio import FieldFileError, read_field
from .pipeline import CHECKS, ConfigError, DiagnosticsConfig, load_config, run_diagnose, run_solve, versions

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


def _checks_arg(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in names if t not in CHECKS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown checks {bad}; choose from {', '.join(CHECKS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinfb", description="Thin one-phase free boundary solver and diagnostics.")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides the config's output.dir)")
    common.add_argument("--threads", type=int, default=1, help="thread count recorded in the manifest")

    s = sub.add_parser("solve", parents=[common], help="minimise the energy for the configured boundary data")
    s.add_argument("--config", required=True, help="run configuration (JSON)")

    d = sub.add_parser("diagnose", parents=[common], help="run diagnostics on a field file")
    d.add_argument("--field", required=True, help="field file written by 'solve'")
    d.add_argument("--config", help="run configuration whose diagnostics block selects checks and thresholds")
    d.add_argument("--checks", type=_checks_arg, help=f"comma list from: {', '.join(CHECKS)}")

    sub.add_parser("verify", help="run the built-in oracle suite")
    return p


def _out_dir(args, cfg_dir: str | None) -> Path:
    return Path(args.out or cfg_dir or "out")


def cmd_solve(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _out_dir(args, cfg.out_dir)
    try:
        result = run_solve(cfg, out, threads=args.threads)
    except (ConfigError, FieldFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    st = result.state
    print(f"solve: {st.outer_iters} passes, {st.flips_accepted} flips, J = {st.energy_trace[-1]:.10g}, wrote {out}")
    if st.budget_exhausted:
        print("error: solver budget exhausted before convergence", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_diagnose(args) -> int:
    raw_cfg = None
    try:
        if args.config:
            cfg = load_config(args.config)
            dc, out_cfg, raw_cfg = cfg.diagnostics, cfg.out_dir, cfg.raw
        else:
            dc, out_cfg = DiagnosticsConfig(checks=list(CHECKS)), None
        G = read_field(args.field)
    except (ConfigError, FieldFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.checks is not None:
        dc.checks = args.checks
    out = _out_dir(args, out_cfg)
    t0 = time.perf_counter()
    try:
        verdict = run_diagnose(G, dc, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    manifest = {
        "command": "diagnose",
        "field": str(args.field),
        "config": raw_cfg,
        "checks": sorted(dc.checks),
        "versions": versions(),
        "threads": args.threads,
        "wall_time_s": time.perf_counter() - t0,
        "thresholds": verdict.get("thresholds", dc.thresholds(G.grid.h)),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for key, res in verdict["criteria"].items():
        print(f"criterion {key} ({res['name']}): {'pass' if res['pass'] else 'FAIL'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .oracles import run_suite

    results = run_suite()
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"verify: {len(failed)} of {len(results)} checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"verify: all {len(results)} checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"solve": cmd_solve, "diagnose": cmd_diagnose, "verify": cmd_verify}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
