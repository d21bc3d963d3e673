"""Command line entry point: ``mimosched {run,sweep,compare,oracle}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys

import numpy as np

from .experiments import ExperimentSpec, compare_schedulers, run_experiment, write_outputs
from .scenario import ConfigError

logger = logging.getLogger("mimosched")

U64_MAX = 2**64 - 1


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _rho(text: str) -> float:
    value = float(text)
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"rho must be a positive finite number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment file; desk profile if omitted")
    common.add_argument("--seed", type=_u64, help="override scenario seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--rho", type=_rho, help="QoS penalty weight for the proposed scheduler")
    common.add_argument("--iters", type=_positive_int, help="maximum BCD sweeps")
    common.add_argument("--trace-exact", action="store_true",
                        help="evaluate exact rates after every BCD sweep")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="mimosched", description="QoS-aware multi-cell MU-MIMO scheduling experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single setting, all replications")
    sub.add_parser("sweep", parents=[common], help="sweep one scenario parameter")
    sub.add_parser("compare", parents=[common], help="compare schedulers per sweep value")
    sub.add_parser("oracle", parents=[common],
                   help="proposed vs exhaustive optimum on tiny instances")
    return parser


def load_spec(args) -> ExperimentSpec:
    spec = ExperimentSpec.from_json(args.config) if args.config else ExperimentSpec()
    if args.seed is not None:
        spec = spec.replace(scenario=spec.scenario.replace(seed=args.seed))
    bcd = {}
    if args.rho is not None:
        bcd["rho"] = args.rho
    if args.iters is not None:
        bcd["max_iters"] = args.iters
    if bcd:
        spec = spec.replace(bcd=dataclasses.replace(spec.bcd, **bcd))
    if args.trace_exact:
        spec = spec.replace(trace_exact=True)
    if args.command == "sweep" and spec.sweep is None:
        raise ConfigError("sweep", "the sweep command needs a 'sweep' block in the config")
    if args.command == "oracle":
        M, K, C, R = (spec.scenario.n_bs, spec.scenario.ue_count, spec.scenario.n_carriers,
                      spec.scenario.rbg_count)
        if K * C * R > 20:
            raise ConfigError("scenario", f"oracle needs K*C*R <= 20, got {K * C * R}")
        spec = spec.replace(scheduler=("proposed", "exhaustive"),
                            exhaustive_rho=spec.bcd.rho if spec.bcd.rho is not None else 1.0)
    return spec


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = load_spec(args)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"mimosched: configuration error: {exc}", file=sys.stderr)
        return 2

    reports = run_experiment(spec)
    table = compare_schedulers(spec, reports) if args.command in ("compare", "oracle") else None
    summ = write_outputs(spec, reports, args.command, out_dir=args.out, table=table)

    if table is not None:
        print(f"{'value':>8} {'scheduler':>10} {'ESR[nat]':>10} {'Sat':>6} {'ms':>9} {'gap':>8}")
        for row in table:
            gap = "" if row["gap"] is None else f"{row['gap']:.4f}"
            print(f"{str(row['sweep_value']):>8} {row['scheduler']:>10} "
                  f"{_num(row['esr_nats']):10.2f} {_num(row['sat']):6.3f} "
                  f"{row['runtime_ms']:9.1f} {gap:>8}")
    else:
        for row in summ["deterministic"]["aggregate"]:
            se = row["esr_nats_se"] or 0.0
            print(f"{row['scheduler']} value={row['sweep_value']} n={row['n']} "
                  f"failed={row['failed']} ESR={_num(row['esr_nats']):.2f}+-{se:.2f} nats "
                  f"Sat={_num(row['sat']):.3f} f_a={_num(row['f_a']):.4f} "
                  f"f_t={_num(row['f_t']):.4f}")
    if args.command == "oracle":
        ratios = _oracle_ratios(reports)
        if ratios.size:
            q = np.percentile(ratios, [0, 5, 50, 100])
            print(f"oracle ratio G_bcd/G*: min={q[0]:.4f} p5={q[1]:.4f} median={q[2]:.4f} "
                  f"max={q[3]:.4f} (n={ratios.size})")
    print(f"deterministic sha256 {summ['deterministic_sha256']}")
    return 0


def _num(x) -> float:
    return float("nan") if x is None else x


def _oracle_ratios(reports) -> np.ndarray:
    best = {r.seed: r.objective for r in reports if r.scheduler == "exhaustive" and not r.failed}
    out = []
    for r in reports:
        if r.scheduler == "proposed" and r.seed in best and best[r.seed]:
            out.append(r.objective / best[r.seed])
    return np.asarray(out)


if __name__ == "__main__":
    sys.exit(main())
