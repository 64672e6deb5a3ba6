#!/usr/bin/env python3
"""Export nodal values of U and Phi at t = T and print their range.

    python3 scripts/snapshot.py 40 out.csv
"""

import sys

import numpy as np

from thermistor_cn.cli import main as cli_main

if __name__ == "__main__":
    M = sys.argv[1] if len(sys.argv) > 1 else "20"
    path = sys.argv[2] if len(sys.argv) > 2 else "snapshot.csv"
    code = cli_main(["--experiment", "solve", "--M", M, "--T", "1", "--out", path])
    if code == 0:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        print(f"{len(data)} dofs; U in [{data[:, -2].min():.4f}, {data[:, -2].max():.4f}], "
              f"Phi in [{data[:, -1].min():.4f}, {data[:, -1].max():.4f}]")
    sys.exit(code)
