#!/usr/bin/env python3
"""Run a history-pricing algorithm on many random scripts and report the worst ratio and dual slack.

    python3 scripts/guarantee_suite.py --grid results/h_FullyOnline_n40.json --model fully --runs 1000
"""

from __future__ import annotations

import argparse
import json
import math

import numpy as np

from onlinematch.algorithms import Algorithm, RunConfig, batch_run
from onlinematch.instances import random_fully_script, random_general_script
from onlinematch.pricing import HGrid, PriceSystem


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", required=True)
    ap.add_argument("--model", choices=["fully", "general"], default="fully")
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--max-vertices", type=int, default=40)
    ap.add_argument("--step", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    prices = PriceSystem(HGrid.load(args.grid))
    fully = args.model == "fully"
    algo = Algorithm.history_fully(prices) if fully else Algorithm.history_general(prices)
    make = random_fully_script if fully else random_general_script
    rng = np.random.default_rng(args.seed)
    scripts = [make(int(rng.integers(2, args.max_vertices + 1)), float(rng.uniform(0.05, 0.6)),
                    seed=args.seed + i, bipartite=bool(i % 2)) for i in range(args.runs)]
    res = batch_run(scripts, algo, RunConfig(step=args.step), parallelism=args.workers)
    agg = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in res.aggregate.items()}
    print(json.dumps(agg, indent=2))


if __name__ == "__main__":
    main()
