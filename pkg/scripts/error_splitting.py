#!/usr/bin/env python3
"""Temporal and spatial refinement sweeps for u in L2 at t = 1.

Sweep A: M = 128, N = 5, 10, 20, 40 steps, compared with a 320-step run on
the same mesh. Sweep B: 512 steps, M = 8, 16, 32.
"""

import sys

from thermistor_cn.experiments import ExperimentConfig, run_split


def main():
    res = run_split(ExperimentConfig(experiment="split", T=1.0, report_times=(1.0,)))
    sys.stdout.write(res.temporal.to_csv())
    sys.stdout.write(res.spatial.to_csv())
    print(f"temporal slope   {res.temporal_slope:.3f}  (against the exact solution: {res.temporal_slope_vs_exact:.3f})")
    print(f"spatial slope    {res.spatial_slope:.3f}")


if __name__ == "__main__":
    main()
