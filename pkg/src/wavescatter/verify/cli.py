"""Command line entry point: run suites, write a structure decomposition, scan a coupling family."""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from ..errors import (AccuracyError, ConfigError, DivergenceError, GrowthError, NearEigenvalueError,
                      NonConvergenceError, SingularFamilyError)
from ..keyvalue import get_float, read_key_values, subsection
from ..potential_lab import load_potential
from ..ray_transform import compute_l1
from ..structure import decompose_w1, structure_t_grid
from .config import SUITES, config_from_mapping, load_config
from .report import Report, environment_snapshot
from .suites import SuiteContext, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
NUMERICAL_ERRORS = (NonConvergenceError, DivergenceError, AccuracyError, SingularFamilyError, NearEigenvalueError,
                    GrowthError)


def _threads(n: int | None):
    return threadpool_limits(limits=n) if n else nullcontext()


def run_suites(cfg, names, out_dir: Path, threads: int | None = None, echo=print) -> int:
    """Run suites in order, write their reports, and return the exit status."""
    env = environment_snapshot(cfg.seed, threads)
    ctx = SuiteContext(cfg)
    status = EXIT_OK
    summary = []
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in names:
        start = time.perf_counter()
        try:
            rep = run_suite(name, ctx)
        except NUMERICAL_ERRORS as exc:
            rep = Report(name, skipped=f"numerical failure: {type(exc).__name__}: {exc}")
            status = EXIT_NUMERICAL
        elapsed = time.perf_counter() - start
        rep.write(out_dir, env)
        for c in rep.checks:
            echo(f"{'PASS' if c.passed else 'FAIL'} {name}: {c.name} ({c.ratio:.3g} vs {c.tolerance:.3g})")
        if rep.skipped:
            echo(f"SKIP {name}: {rep.skipped}")
        if not rep.passed and status == EXIT_OK:
            status = EXIT_FAIL
        summary.append({"suite": name, "passed": rep.passed, "skipped": rep.skipped,
                        "checks": len(rep.checks), "seconds": round(elapsed, 3)})
    (out_dir / "summary.json").write_text(
        json.dumps({"suites": summary, "exit_status": status, "environment": env}, indent=2, sort_keys=True),
        encoding="utf-8")
    return status


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.suite:
        overrides["suites"] = tuple(args.suite)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["out_dir"] = Path(args.out)
    if overrides:
        cfg = cfg.with_overrides(**overrides)
        if args.suite:
            bad = [s for s in args.suite if s not in SUITES]
            if bad:
                raise ConfigError(f"unknown suites {bad}; registered: {', '.join(SUITES)}")
    with _threads(args.threads):
        return run_suites(cfg, cfg.suites, Path(cfg.out_dir), args.threads)


def _potential_file(path: str):
    mapping = read_key_values(path)
    prefix = None if "kind" in mapping else "potential"
    return load_potential(path, prefix)


def _cmd_decompose(args) -> int:
    V = _potential_file(args.potential)
    profile = compute_l1(V, t_grid=structure_t_grid(args.t_max, args.dt))
    D = decompose_w1(profile, args.order)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    D.write(out)
    print(f"{len(D)} atoms, mass {D.mass:.6g}, digest {D.digest()} -> {out}")
    return EXIT_OK


def _cmd_scan(args) -> int:
    m = read_key_values(args.family)
    mapping = {f"resonance.potential.{k}": v for k, v in subsection(m, "potential").items()}
    for k, v in subsection(m, "grid").items():
        mapping[f"resonance.grid.{k}"] = v
    for key in ("c_max", "points"):
        if key in m:
            mapping[f"resonance.{key}"] = m[key]
    mapping.update({k: v for k, v in m.items() if k.startswith("resonance.")})
    if "resonance.potential.kind" not in mapping:
        raise ConfigError("family file needs potential.kind")
    get_float(mapping, "resonance.c_max", 4.0)
    cfg = config_from_mapping(mapping, Path(args.family).parent)
    with _threads(args.threads):
        return run_suites(cfg, ("resonance_scan",), Path(args.out), args.threads)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavescatter", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run verification suites from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--suite", action="append", help="suite to run (repeatable); overrides the config list")
    r.add_argument("--out", help="output directory for reports")
    r.add_argument("--threads", type=int, help="BLAS/FFT thread limit")
    r.add_argument("--seed", type=int, help="seed for randomized test functions")
    r.set_defaults(func=_cmd_run)
    d = sub.add_parser("decompose", help="write the first-order structure decomposition of a potential")
    d.add_argument("--potential", required=True)
    d.add_argument("--out", default="decomposition.csv")
    d.add_argument("--order", type=int, default=23, help="sphere rule order for radial potentials")
    d.add_argument("--t-max", type=float, default=20.0)
    d.add_argument("--dt", type=float, default=0.2)
    d.set_defaults(func=_cmd_decompose)
    s = sub.add_parser("scan", help="zero-energy resonance scan of a coupling family")
    s.add_argument("--family", required=True)
    s.add_argument("--out", default="wavescatter-scan")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=_cmd_scan)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
