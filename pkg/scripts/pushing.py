"""Sustained push against the wall followed by a release command.

Reports the stability verdict, the pitch band over the hold and how long the
horns take to leave the wall after release; optionally writes the time series.

    python scripts/pushing.py --config FullSoft --pitch 15 --out out/push
"""
import argparse
import math
from dataclasses import replace

import numpy as np

from hornsim import export
from hornsim.harness import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="FullSoft", choices=["FullSoft", "FullHard", "HalfSoft"])
    ap.add_argument("--pitch", type=float, default=15.0, help="approach/hold pitch, deg")
    ap.add_argument("--hold", type=float, default=10.0, help="hold duration, s")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="directory for CSV/JSON output")
    args = ap.parse_args()

    cfg = ExperimentConfig(scenario="Pushing", configuration=args.config, seed=args.seed)
    cfg = replace(cfg, profile=replace(cfg.profile, approach_pitch_deg=args.pitch, hold_duration=args.hold))
    series, rep = run_experiment(cfg)
    st = rep.stability
    print(f"{args.config} pushing at {args.pitch:.1f} deg for {args.hold:.1f} s: {st.verdict.value}")
    if st.theta_min_deg is not None:
        print(f"  pitch band {st.theta_min_deg:.1f} .. {st.theta_max_deg:.1f} deg, "
              f"mean normal force {st.mean_normal_force_n:.2f} N over {st.span[1] - st.span[0]:.1f} s")
    if st.onset_t is not None:
        print(f"  first exit at t = {st.onset_t:.2f} s ({st.reason})")
    if rep.release_disengage_s is not None:
        rel = rep.release_disengage_s
        print(f"  release disengaged in {rel:.2f} s" if math.isfinite(rel) else "  horns never left the wall")
    theta = np.degrees(series["theta"])
    print(f"  pitch over the whole run {theta.min():.1f} .. {theta.max():.1f} deg")
    if args.out:
        for p in export.export(series, rep.to_dict(), args.out, f"pushing_{args.config}").values():
            print(f"wrote {p}")


if __name__ == "__main__":
    main()
