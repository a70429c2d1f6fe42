"""`sim` command-line entry point."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import ConfigError, parse_config, parse_range, preset, run_batch, summary_rows, SUMMARY_COLUMNS, write_results
from .recovery import RecoveryConfig


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="OLSR / MP-OLSR failure-recovery simulator")
    p.add_argument("--preset", type=int, choices=(1, 2, 3))
    p.add_argument("--protocol", choices=("olsr", "mpolsr"))
    p.add_argument("--recovery", choices=("none", "re", "ftc", "dr"))
    p.add_argument("--seeds", help="seed list, e.g. 1..5 or 1,4,9")
    p.add_argument("--tf", type=float, action="append", help="failure time in seconds (repeatable)")
    p.add_argument("--n", type=int, action="append", help="scenario 2 failure depth (repeatable)")
    p.add_argument("--speed", type=float, action="append", help="scenario 3 node speed in m/s (repeatable)")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--trace", action="store_true", help="write per-run event traces")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return p


def make_spec(args):
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        if args.preset is not None:
            text = f"preset={args.preset}\n" + text
        spec = parse_config(text)
    else:
        if args.preset is None:
            raise ConfigError("either --preset or --config is required")
        spec = preset(args.preset, args.protocol or "olsr", args.recovery or "none")
    updates = {}
    if args.protocol:
        updates["protocol"] = args.protocol
    if args.recovery:
        updates["recovery"] = replace(spec.recovery, scheme=args.recovery) if spec.recovery else RecoveryConfig(args.recovery)
    if args.seeds:
        updates["seeds"] = parse_range(args.seeds)
    if args.tf:
        updates["t_f"] = tuple(args.tf)
    if args.n:
        updates["n"] = tuple(args.n)
    if args.speed:
        updates["speeds"] = tuple(args.speed)
    if args.trace:
        updates["trace"] = True
    return replace(spec, **updates) if updates else spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = make_spec(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"sim: error: {exc}", file=sys.stderr)
        return 2
    try:
        results = run_batch(spec, jobs=args.jobs)
        runs_path, summary_path = write_results(results, args.out)
    except Exception as exc:  # noqa: BLE001 - any run failure aborts with a message
        print(f"sim: run failed: {exc}", file=sys.stderr)
        return 1
    bad = [r for r in results if not r.conserved]
    if bad:
        print(f"sim: packet conservation violated in {len(bad)} run(s)", file=sys.stderr)
        return 1
    print(",".join(SUMMARY_COLUMNS))
    for row in summary_rows(results):
        print(",".join(row))
    print(f"wrote {runs_path} and {summary_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
