"""Run every verification suite on a config and print one timing line per suite.

    python3 scripts/run_all.py [--config configs/default.cfg] [--out wavescatter-out]
"""

import argparse
import time
from pathlib import Path

from wavescatter.verify.config import load_config
from wavescatter.verify.suites import SuiteContext, run_suite

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "default.cfg"))
    ap.add_argument("--out", default="wavescatter-out")
    args = ap.parse_args()
    cfg = load_config(args.config)
    ctx = SuiteContext(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for name in cfg.suites:
        start = time.perf_counter()
        rep = run_suite(name, ctx)
        elapsed = time.perf_counter() - start
        bad = [c.name for c in rep.checks if not c.passed]
        failures += len(bad)
        state = "SKIP" if rep.skipped else ("FAIL" if bad else "PASS")
        print(f"{name:24s} {state}  {len(rep.checks):3d} checks  {elapsed:7.1f} s  {' '.join(bad)}")
        rep.write(out)
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
