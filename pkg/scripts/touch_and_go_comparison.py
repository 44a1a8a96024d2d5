"""Touch-and-go comparison of the three horn configurations.

Prints per-configuration pitch RMSE, contact delay and the RMSE reductions of
FullSoft against the other two, then writes comparison.json to --out.

    python scripts/touch_and_go_comparison.py --seeds 5 --out out/tng
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from hornsim import export
from hornsim.harness import ExperimentConfig, compare_configs

NAMES = ["FullSoft", "FullHard", "HalfSoft"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5, help="number of seeds (0..N-1)")
    ap.add_argument("--bumps", type=int, default=3)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="out/touch_and_go")
    args = ap.parse_args()

    base = ExperimentConfig()
    base = replace(base, profile=replace(base.profile, n_bumps=args.bumps))
    cmp = compare_configs(base, NAMES, list(range(args.seeds)), jobs=args.jobs)

    print(f"{'config':10s} {'bumps':>5s} {'RMSE deg':>9s} {'sd':>6s} {'delay ms':>9s}")
    for n in NAMES:
        r = cmp.bump_rmse(n)
        delays = [d for s in cmp.seeds for d in cmp.reports[(n, s)].contact_delay_ms if d is not None]
        delay = f"{np.mean(delays):9.1f}" if delays else f"{'-':>9s}"
        print(f"{n:10s} {len(r):5d} {np.mean(r):9.2f} {np.std(r):6.2f} {delay}")
    red = cmp.reductions()
    print(f"FullSoft vs FullHard: {red['FullSoft_vs_FullHard']:.1f}% lower RMSE")
    print(f"FullSoft vs HalfSoft: {red['FullSoft_vs_HalfSoft']:.1f}% lower RMSE")
    path = export.write_json(cmp.to_dict(), Path(args.out) / "comparison.json")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
