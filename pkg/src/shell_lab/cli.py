"""Command-line experiment runner.

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 constraint violation, 4 numerical failure, 5 I/O error (including an
unreadable ``--config`` file).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .config import ConfigError, RunConfig, dumps, loads
from .drivers import DriverError, is_ou, stable_index, stream
from .quadrature import QuadratureError
from .simulation import SimulationError, simulate_chunked
from .stochastic import (PSDError, covariance_matrix, ou_limit_variance, ou_path_ensemble,
                         second_moment_limit, stable_abs_moment, stable_ou_limit_scale, stable_scale,
                         summability_report)
from .thermalization import ConstraintError, CutoffConfig, bound_report, small_noise_profile, window_scan

EXIT_CONFIG, EXIT_CONSTRAINT, EXIT_NUMERIC, EXIT_IO = 2, 3, 4, 5
SUBCOMMANDS = ("simulate", "covariance", "moments", "bounds", "cutoff-scan", "small-noise",
               "summability", "selftest")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


class Table:
    """Named columns plus rows; written as CSV and/or JSON."""

    def __init__(self, name, columns, rows, meta=None):
        self.name, self.columns, self.rows, self.meta = name, list(columns), list(rows), meta or {}

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def json_text(self):
        def plain(v):
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            return v
        doc = {**self.meta, "columns": self.columns,
               "rows": [{c: plain(v) for c, v in zip(self.columns, row)} for row in self.rows]}
        return json.dumps(doc, indent=2) + "\n"


def _write(tables, out: Path, fmt: str):
    out.mkdir(parents=True, exist_ok=True)
    for t in tables:
        if fmt in ("csv", "both"):
            (out / f"{t.name}.csv").write_text(t.csv_text())
        if fmt in ("json", "both"):
            (out / f"{t.name}.json").write_text(t.json_text())


def _cutoff_config(cfg: RunConfig, workers: int) -> CutoffConfig:
    return CutoffConfig(cfg.lattice(), cfg.driver(), cfg.x0(), epsilons=cfg["experiment.epsilons"],
                        offsets_r=cfg["experiment.offsets"], p=cfg["experiment.p"],
                        mc_samples=cfg["experiment.mc_samples"], seed=cfg.seed, dt=cfg["experiment.dt"],
                        leading_modes=cfg["experiment.modes"], norm_samples=cfg["experiment.norm_samples"],
                        workers=workers)


def cmd_simulate(cfg, args):
    lat, spec, x0 = cfg.lattice(), cfg.driver(), cfg.x0()
    K = min(cfg["experiment.modes"], lat.truncation)
    columns = ["t", "path"] + [f"mode_{n}" for n in range(1, K + 1)] + (["ou"] if is_ou(spec) else [])
    rows = []
    for index, t in enumerate(cfg["experiment.t_grid"]):
        ens = simulate_chunked(x0, spec, t, cfg["experiment.dt"], lat.nu, stream(cfg.seed, index),
                               cfg["experiment.paths"], workers=args.workers)
        for i in range(len(ens)):
            extra = [ens.ou[i]] if ens.ou is not None else []
            rows.append([t, i, *ens.shell[i, :K], *extra])
    return [Table("simulate", columns, rows, {"driver": spec.variant})]


def cmd_covariance(cfg, args):
    lat, spec = cfg.lattice(), cfg.driver()
    sigma = getattr(spec, "sigma", None)
    if sigma is None or stable_index(spec) is not None:
        raise ConstraintError("covariances need a Gaussian driver (brownian)")
    N = min(cfg["experiment.modes"], lat.truncation)
    rows = []
    for t in list(cfg["experiment.t_grid"]) + [math.inf]:
        for r, c, v in covariance_matrix(N, t, sigma, lat.nu).triples():
            rows.append(["inf" if math.isinf(t) else t, r, c, v])
    return [Table("covariance", ["t", "row", "col", "value"], rows)]


def cmd_moments(cfg, args):
    lat, spec = cfg.lattice(), cfg.driver()
    N = min(cfg["experiment.modes"], lat.truncation)
    alpha = stable_index(spec)
    if spec.variant == "alpha_stable":
        theta = cfg["experiment.theta"]
        rows = []
        for n in range(1, N + 1):
            s = stable_scale(n, math.inf, alpha, spec.sigma, lat.nu)
            rows.append([n, s, theta, stable_abs_moment(theta, alpha, s)])
        return [Table("moments", ["mode", "scale", "theta", "abs_moment"], rows)]
    if spec.variant == "stable_ou":
        rows = [[n, stable_ou_limit_scale(n, alpha, spec.gamma, lat.nu, spec.sigma),
                 stable_ou_limit_scale(n, alpha, spec.gamma, lat.nu, spec.sigma, include_initial=False)]
                for n in range(1, N + 1)]
        return [Table("moments", ["mode", "scale_closed_form", "scale_convolution"], rows)]
    if spec.variant == "gauss_ou":
        ens = ou_path_ensemble(spec.gamma, lat.nu, spec.sigma, stream(cfg.seed, 0),
                               paths=cfg["experiment.paths"], dt=cfg["experiment.dt"],
                               truncation=lat.truncation)
        rows = []
        for n in range(1, N + 1):
            v = ou_limit_variance(n, spec.gamma, lat.nu, spec.sigma, ensemble=ens)
            rows.append([n, v.closed_form, v.laplace_term, v.convolution_term, v.path_estimate,
                         v.path_se, v.closed_form - v.path_estimate, v.bound])
        return [Table("moments", ["mode", "closed_form", "laplace_term", "convolution_term",
                                  "path_estimate", "path_se", "discrepancy", "second_term_bound"], rows)]
    rows = [[n, second_moment_limit(spec, n, lat.nu)] for n in range(1, N + 1)]
    return [Table("moments", ["mode", "second_moment"], rows)]


def cmd_bounds(cfg, args):
    rep = bound_report(_cutoff_config(cfg, args.workers))
    cols = ["epsilon", "r", "t", "lower", "measured", "upper", "mc_error", "verdict"]
    return [Table("bounds", cols, [list(r.values()) for r in rep.rows],
                  {"driver": rep.driver, "method": rep.method, "mean_limit_norm": rep.mean_limit_norm,
                   "tail": [r.tail for r in rep.rows]})]


def cmd_cutoff_scan(cfg, args):
    s = window_scan(_cutoff_config(cfg, args.workers))
    rows = [[s.epsilon, r, m, q] for r, m, q in zip(s.offsets, s.measured, s.ratios)]
    meta = {"epsilon": s.epsilon, "left_ok": s.left_ok, "right_ok": s.right_ok, "spread": s.spread,
            "spread_bound": s.spread_bound, "monotone": s.monotone}
    return [Table("window", ["epsilon", "r", "measured", "ratio_to_r0"], rows, meta)]


def cmd_small_noise(cfg, args):
    prof = small_noise_profile(_cutoff_config(cfg, args.workers))
    rows = [[r.epsilon, r.r, r.value, r.limit, r.excess, r.gap, q, r.ok]
            for r, q in zip(prof.rows, prof.gap_ratios)]
    return [Table("profile", ["epsilon", "r", "value", "limit", "excess", "gap", "gap_ratio", "ok"], rows,
                  {"mean_limit_norm": prof.mean_limit_norm})]


def cmd_summability(cfg, args):
    spec = cfg.driver()
    alpha = stable_index(spec)
    theta = cfg["experiment.theta"] if alpha is not None else None
    rep = summability_report(cfg["lattice.nu"], alpha, theta, cfg["experiment.n_max"])
    meta = {"relative_change": rep.relative_change, "converged": rep.converged, "bounds_hold": rep.bounds_hold}
    return [Table("summability", ["n", "b_n", "term", "partial_sum", "bound_small", "bound_tail",
                                  "within_bound"], list(rep.rows()), meta)]


def cmd_selftest(cfg, args):
    numbers = None
    if args.criteria:
        try:
            numbers = sorted({int(v) for v in args.criteria.split(",")})
        except ValueError:
            raise ConfigError("--criteria takes a comma-separated list of integers") from None
        bad = [n for n in numbers if n not in acceptance.CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}")
    echo = None if args.quiet else print
    outcomes = acceptance.run_all(numbers, seed=cfg.seed, quick=args.quick, echo=echo)
    rows = [[o.number, o.name, o.passed, o.summary] for o in outcomes]
    metrics = [[o.number, k, v] for o in outcomes for k, v in o.metrics.items()]
    args.selftest_failed = not all(o.passed for o in outcomes)
    return [Table("selftest", ["criterion", "name", "passed", "summary"], rows),
            Table("selftest_metrics", ["criterion", "metric", "value"], metrics)]


COMMANDS = {
    "simulate": cmd_simulate, "covariance": cmd_covariance, "moments": cmd_moments,
    "bounds": cmd_bounds, "cutoff-scan": cmd_cutoff_scan, "small-noise": cmd_small_noise,
    "summability": cmd_summability, "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shell-lab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--seed", type=int, help="master seed (falls back to SHELL_LAB_SEED)")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", type=Path, help="output directory (default: output.directory)")
    common.add_argument("--format", choices=("csv", "json", "both"))
    common.add_argument("--print-config", action="store_true", help="echo the resolved config")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "selftest":
            p.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
            p.add_argument("--criteria", help="comma-separated subset, e.g. 1,2,5")
            p.add_argument("--quiet", action="store_true")
    return parser


def resolve_config(args, overrides) -> RunConfig:
    cfg = RunConfig()
    env_seed = os.environ.get("SHELL_LAB_SEED")
    if env_seed is not None:
        cfg.set("seed", env_seed)
    if args.config is not None:
        loads(args.config.read_text(), cfg)
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"unrecognised argument {item!r} (overrides are --key=value)")
        key, value = item[2:].split("=", 1)
        cfg.set(key, value)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.format is not None:
        cfg.set("output.format", args.format)
    if args.out is not None:
        cfg.set("output.directory", str(args.out))
    cfg.lattice()
    cfg.driver()
    cfg.x0()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args, overrides = parser.parse_known_args(argv)
    args.selftest_failed = False
    try:
        cfg = resolve_config(args, overrides)
        if args.print_config:
            print(dumps(cfg), end="")
        tables = COMMANDS[args.command](cfg, args)
        _write(tables, Path(cfg["output.directory"]), cfg["output.format"])
    except (ConfigError, DriverError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstraintError as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (SimulationError, QuadratureError, PSDError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # remaining parameter checks (step size, ranges) raised below the config layer
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    return 1 if args.selftest_failed else 0


if __name__ == "__main__":
    sys.exit(main())
