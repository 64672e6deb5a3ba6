#!/usr/bin/env python3
"""Run the table configurations in scripts/configs and collect the CSVs.

    python3 scripts/reproduce_tables.py                 # all 2D tables
    python3 scripts/reproduce_tables.py table1 table5   # a subset
    python3 scripts/reproduce_tables.py --with-3d       # also the 3D runs (slow)
"""

import argparse
import sys
import time
from pathlib import Path

from thermistor_cn.cli import main as cli_main

HERE = Path(__file__).resolve().parent
CONFIGS = HERE / "configs"
TABLES_2D = ["table1", "table2", "table3", "table4", "table5"]
TABLES_3D = ["table6", "table7_small"]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("tables", nargs="*", help="config names without .cfg")
    p.add_argument("--with-3d", action="store_true")
    p.add_argument("--outdir", default="results")
    args = p.parse_args(argv)

    names = args.tables or TABLES_2D + (TABLES_3D if args.with_3d else [])
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name in names:
        cfg = CONFIGS / f"{name}.cfg"
        start = time.perf_counter()
        code = cli_main(["--config", str(cfg), "--out", str(out / f"{name}.csv")])
        print(f"{name}: exit {code} in {time.perf_counter() - start:.1f}s -> {out / (name + '.csv')}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
