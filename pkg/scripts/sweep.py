"""Sensitivity of the touch-and-go ordering to one horn parameter.

Sweeps a ``section.key`` setting (soft horn stiffness by default) for each
configuration and prints mean pitch RMSE and contact delay per value.

    python scripts/sweep.py --param horns.soft_k --values 200,300,400 --seeds 2
"""
import argparse

import numpy as np

from hornsim.config import parse_value, set_value
from hornsim.harness import ExperimentConfig, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--param", default="horns.soft_k")
    ap.add_argument("--values", default="200,300,400")
    ap.add_argument("--configs", default="FullSoft,HalfSoft")
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    for name in args.configs.split(","):
        base = ExperimentConfig(configuration=name)
        values = [parse_value(base, args.param, v) for v in args.values.split(",")]
        rows = sweep(base, args.param, values, list(range(args.seeds)), jobs=args.jobs, setter=set_value)
        print(f"{name}: {args.param}")
        for v in values:
            sel = [r for r in rows if r["value"] == v]
            rmse = [r["mean_pitch_rmse_deg"] for r in sel if r["mean_pitch_rmse_deg"] is not None]
            delay = [r["mean_contact_delay_ms"] for r in sel if r["mean_contact_delay_ms"] is not None]
            print(f"  {v!s:>10}  RMSE {np.mean(rmse):6.2f} deg" + (f"  delay {np.mean(delay):6.1f} ms" if delay else ""))


if __name__ == "__main__":
    main()
