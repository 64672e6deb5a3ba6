"""Command-line driver.

Examples::

    thermistor-cn --experiment converge --dim 2 --degree 1 --M 20,40,80 --tau-rule h
    thermistor-cn --experiment stability --M 80 --k 1,5,10,20 --out table5.csv
    thermistor-cn --config runs/table2.cfg --out table2.csv

A config file holds ``key = value`` lines with the flag names as keys
(``tau-rule`` or ``tau_rule``); command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .experiments import (
    TAU_RULES,
    ConfigError,
    ExperimentConfig,
    run_convergence,
    run_solve,
    run_split,
    run_stability,
)
from .linalg import ConvergenceError
from .scheme import EXPLICIT, SEMI_IMPLICIT, ModelViolationError, SchemeError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DIVERGED = 0, 1, 2, 3

INIT_NAMES = {"semi": SEMI_IMPLICIT, "explicit": EXPLICIT}

log = logging.getLogger("thermistor_cn")


def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    vals = _floats(text)
    if any(not v.is_integer() for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


# key -> (ExperimentConfig field, parser)
_KEYS = {
    "experiment": ("experiment", str),
    "dim": ("dim", int),
    "degree": ("degree", int),
    "M": ("M", _ints),
    "tau-rule": ("tau_rule", str),
    "k": ("k", _floats),
    "T": ("T", float),
    "times": ("report_times", _floats),
    "init": ("init", lambda v: INIT_NAMES[v] if v in INIT_NAMES else v),
    "out": ("out", str),
    "case": ("case", str),
    "rtol": ("rtol", float),
}


def read_config_file(path):
    """Parse ``key = value`` lines; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("_", "-") if key.replace("_", "-") in _KEYS else key
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def build_parser():
    p = argparse.ArgumentParser(
        prog="thermistor-cn",
        description="Linearized Crank-Nicolson Galerkin FEM for the thermistor equations.",
    )
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--experiment", choices=["converge", "stability", "split", "solve"])
    p.add_argument("--dim", choices=["2", "3"])
    p.add_argument("--degree", choices=["1", "2"])
    p.add_argument("--M", help="comma-separated mesh subdivisions, e.g. 20,40,80")
    p.add_argument("--tau-rule", dest="tau_rule", choices=TAU_RULES)
    p.add_argument("--k", help="comma-separated tau/h ratios for --tau-rule kh or stability runs")
    p.add_argument("--T", help="final time (default 4)")
    p.add_argument("--times", help="comma-separated report times (default 1,2,3,4)")
    p.add_argument("--init", choices=sorted(INIT_NAMES), help="start-up half step (default semi)")
    p.add_argument("--case", choices=["example", "zero"])
    p.add_argument("--rtol", help="CG relative tolerance (default 1e-10)")
    p.add_argument("--out", help="output CSV path (split writes <stem>_temporal/_spatial.csv)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(args):
    raw = read_config_file(args.config) if args.config else {}
    for key in _KEYS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            raw[key] = flag
    experiment = raw.get("experiment", "converge")
    if "M" not in raw:
        raw["M"] = "80" if experiment == "stability" else ("20,40,80" if experiment != "solve" else "20")
    if experiment == "stability" and "k" not in raw:
        raw["k"] = "1,5,10,20"
    kwargs = {}
    for key, value in raw.items():
        name, parse = _KEYS[key]
        try:
            kwargs[name] = parse(value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if experiment == "split" and "T" not in raw:
        kwargs["T"] = 1.0
    if "report_times" not in kwargs:
        T = kwargs.get("T", 4.0)
        kwargs["report_times"] = tuple(float(t) for t in range(1, int(T) + 1)) or (T,)
    return ExperimentConfig(**kwargs)


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = make_config(args)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.experiment == "converge":
            table = run_convergence(cfg)
            _emit(table.to_csv(), cfg.out)
            for var, norm in (("u", "L2"), ("phi", "L2"), ("u", "H1"), ("phi", "H1")):
                if len(cfg.M) > 1:
                    fits = [table.fitted_order(var, norm, t) for t in cfg.report_times]
                    print(f"# fitted {norm} order of {var}: " + ", ".join(f"{f:.3f}" for f in fits), file=sys.stderr)
            if table.metadata["diverged"]:
                print("divergence detected", file=sys.stderr)
                return EXIT_DIVERGED
        elif cfg.experiment == "stability":
            table = run_stability(cfg)
            _emit(table.to_csv(), cfg.out)
            for flag in table.metadata["diverged"]:
                print(f"# diverged: {flag}", file=sys.stderr)
        elif cfg.experiment == "split":
            res = run_split(cfg)
            if cfg.out:
                stem, ext = os.path.splitext(cfg.out)
                res.temporal.to_csv(f"{stem}_temporal{ext or '.csv'}")
                res.spatial.to_csv(f"{stem}_spatial{ext or '.csv'}")
            else:
                sys.stdout.write(res.temporal.to_csv())
                sys.stdout.write(res.spatial.to_csv())
            print(
                f"# temporal slope {res.temporal_slope:.3f} "
                f"(vs exact {res.temporal_slope_vs_exact:.3f}), spatial slope {res.spatial_slope:.3f}",
                file=sys.stderr,
            )
        else:
            _emit(run_solve(cfg), cfg.out)
    except (SchemeError, ConvergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ModelViolationError as exc:
        print(f"model violation: {exc}", file=sys.stderr)
        return EXIT_DIVERGED if cfg.experiment == "converge" else EXIT_SOLVER
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
