#!/usr/bin/env python3
"""Print the hardness numbers and write their plot data.

    python3 scripts/hardness_numbers.py --out results/
"""

from __future__ import annotations

import argparse
import csv
import math
from pathlib import Path

from onlinematch import hardness as hd


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--sweep-n", type=int, default=500)
    ap.add_argument("--target", type=float, default=0.584)
    ap.add_argument("--triangle-k", type=int, default=2000)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    best = hd.fully_minimize_ratio()
    print(f"fully online: min closed-form ratio {best.value:.6f} at alpha {best.alpha_star:.5f}")
    with open(args.out / "fully_closed_form.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "ratio"])
        w.writerows((a / 1000, hd.fully_ratio_closed_form(a / 1000)) for a in range(0, 951))

    for alpha in (0.0, 0.2, 0.43, 0.6):
        rec = hd.fully_recurrence(100_000, 1000, alpha)
        limit = alpha + (2 - alpha) * rec.x_sequence[-1]
        print(f"  alpha {alpha}: closed form {hd.fully_ratio_closed_form(alpha):.8f}, recurrence {limit:.8f}")

    sweep = hd.general_hardness_sweep(args.sweep_n, args.target)
    hd.write_sweep_csv(sweep, args.out / f"r_curve_n{args.sweep_n}.csv")
    verdict = "below" if sweep.passed else "NOT below"
    print(f"general arrival: max r = {sweep.max_r:.6f} at gamma {sweep.argmax_gamma:.3f} ({verdict} {args.target})")

    for prefill in (0.0, 0.3, 0.6):
        per = hd.simulate_upper_triangle(args.triangle_k, prefill) / args.triangle_k
        print(f"triangle k={args.triangle_k} prefill {prefill}: {per:.5f} vs 1 - e^(a-1) = "
              f"{1 - math.exp(prefill - 1):.5f}")


if __name__ == "__main__":
    main()
