"""Command-line sweep runner.

Example::

    msbeam --config sweep.yaml --out results.csv --threads 2 --seeds 0-4
"""
from __future__ import annotations

import argparse
import logging
import sys

from .experiment import emit_csv, experiment_from_config, run_experiment

LOG = logging.getLogger("msbeam")


def parse_seeds(text):
    """``"0,2,5"`` or ``"0-4"`` (inclusive) or a mix of both."""
    seeds = []
    text = text.replace(" ", "")
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError(f"no seeds in {text!r}")
    return seeds


def build_parser():
    p = argparse.ArgumentParser(prog="msbeam", description="Run a multi-satellite precoding sweep.")
    p.add_argument("--config", required=True, help="YAML experiment file")
    p.add_argument("--out", help="CSV output path (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per cell")
    p.add_argument("--seeds", type=parse_seeds, help="seed list, e.g. 0-4 or 1,3,7")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exp = experiment_from_config(args.config, out=args.out, threads=args.threads,
                                     trials=args.trials, seeds=args.seeds,
                                     timing=True if args.timing else None)
        if not exp.out:
            raise ValueError("no output path: pass --out or set experiment.out")
        rows = run_experiment(exp)
        emit_csv(rows, exp.out)
    except (OSError, ValueError) as err:
        print(f"msbeam: error: {err}", file=sys.stderr)
        return 2
    LOG.info("wrote %d rows to %s", len(rows), exp.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
