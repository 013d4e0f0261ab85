"""Command line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .thermo import GasModel, verify_hypotheses


def _cmd_check_gas(args):
    gas = harness.load_config(args.config).gas if args.config else GasModel()
    report = verify_hypotheses(gas)
    for line in report.lines():
        print(line)
    return 0 if report.all_passed else 1


def _cmd_decay(args):
    cfg = harness.load_config(args.config)
    sigma, rows = harness.run_acoustic_decay(cfg, args.eps, args.out)
    print(f"sigma = {sigma:.4f} over {len(rows)} samples")
    return 0


def _cmd_run(args):
    cfg = harness.load_config(args.config)
    res = harness.run_single(cfg, args.eps, args.out)
    print(json.dumps(res.summary(), indent=1))
    return 0


def _cmd_sweep(args):
    cfg = harness.load_config(args.config)
    rows, _ = harness.run_sweep(cfg, args.out)
    for row in rows:
        print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def _cmd_fit(args):
    order, r2 = harness.fit_rate(harness.read_table(args.table), args.column)
    print(f"order = {order:.4f}  r^2 = {r2:.4f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="machlimit", description="Low Mach number limit laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check-gas", help="check the structural hypotheses of the gas model")
    c.add_argument("--config")
    c.set_defaults(func=_cmd_check_gas)

    c = sub.add_parser("acoustic-decay", help="measure the dispersive decay exponent")
    c.add_argument("--config", required=True)
    c.add_argument("--eps", type=float)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_decay)

    c = sub.add_parser("run", help="single run at one eps")
    c.add_argument("--config", required=True)
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_run)

    c = sub.add_parser("sweep", help="run every eps in the config")
    c.add_argument("--config", required=True)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_sweep)

    c = sub.add_parser("fit", help="log-log rate of a sweep table column")
    c.add_argument("--table", required=True)
    c.add_argument("--column", required=True)
    c.set_defaults(func=_cmd_fit)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigError, OSError, ValueError) as exc:
        print(f"machlimit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
