"""
Command-line interface.

Subcommands: ``eval``, ``optimize``, ``sweep``, ``traverse`` and
``validate``. Exit status is 0 on success, 1 on a usage or contract error
and 2 when a numerical routine fails to converge.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .channel import SystemConfig, make_rng
from .config import load_config
from .errors import ContractError, NumericalError
from .kgr import Beamformer, kgr_cc_closed, kgr_cc_oracle, kgr_iid_closed, assemble_covariances
from .optimizer import P1, P2
from .ports import (
    METHODS,
    build_instance,
    fa_mrc_baseline,
    fa_opt_baseline,
    reweighted_solve,
    sliding_window_solve,
    traverse,
)
from .sweep import emit, load_sweep_spec, run_sweep
from .validation import format_table, run_checks

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_NUMERIC = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONTRACT, f"{self.prog}: error: {message}\n")


def _config(args):
    return load_config(args.config) if args.config else SystemConfig()


def _instance(args, config):
    config = config.replace(eve_mode=args.scenario)
    return build_instance(config, make_rng(config.seed))


def _kind(scenario):
    return P1 if scenario == "iid" else P2


def _load_w(spec, instance):
    if spec == "leading-eigvec":
        return Beamformer(math.sqrt(instance.P_A) * instance.corr.u_max)
    path = Path(spec)
    if not path.exists():
        raise ContractError(f"--w must be 'leading-eigvec' or an existing file, got {spec!r}")
    if path.suffix == ".npy":
        data = np.load(path)
    else:
        raw = json.loads(path.read_text(encoding="utf-8"))
        data = [complex(v[0], v[1]) if isinstance(v, list) else v for v in raw]
    w = Beamformer(data)
    if w.M != instance.M:
        raise ContractError(f"beamformer has length {w.M}, configuration has M={instance.M}")
    return w


def _result_doc(res):
    return {
        "method": res.method,
        "indices": list(res.indices),
        "w": [[float(z.real), float(z.imag)] for z in res.w.w],
        "objective_t": res.objective_t,
        "kgr_bits": res.kgr.bits,
        "scenario": res.kgr.scenario,
        "converged": res.converged,
        "iterations": res.iterations,
    }


def cmd_eval(args):
    config = _config(args)
    instance = _instance(args, config)
    w = _load_w(args.w, instance)
    if args.scenario == "iid":
        bits = kgr_iid_closed(w, instance.params).bits
    elif instance.params.rho == 1.0:
        bits = kgr_cc_closed(w, instance.params).bits
    else:
        p = instance.params
        bits = kgr_cc_oracle(assemble_covariances(w, p.corr, instance.budget, p.P_B, p.sigma2, p.rho))
    print(repr(float(bits)))
    return EXIT_OK


def cmd_optimize(args):
    config = _config(args)
    instance = _instance(args, config)
    kind = _kind(args.scenario)
    if args.method == "reweighted":
        res = reweighted_solve(kind, instance)
    elif args.method == "sliding_window":
        res = sliding_window_solve(kind, instance)
    elif args.method == "sliding_window_no_opt":
        res = sliding_window_solve(kind, instance, optimize=False)
    elif args.method == "traverse":
        res = traverse(kind, instance)
    elif args.method == "fa_opt":
        res = fa_opt_baseline(kind, instance)
    else:
        res = fa_mrc_baseline(kind, instance, draws=args.draws, rng=make_rng(config.seed, 1))
    print(json.dumps(_result_doc(res), indent=1))
    return EXIT_OK


def cmd_traverse(args):
    config = _config(args)
    instance = _instance(args, config)
    res = traverse(_kind(args.scenario), instance)
    print(json.dumps(_result_doc(res), indent=1))
    return EXIT_OK


def cmd_sweep(args):
    spec = load_sweep_spec(args.spec)
    rows = run_sweep(spec, workers=args.workers)
    out = Path(args.out)
    fmt = args.format or ("json" if out.suffix == ".json" else "csv")
    emit(rows, fmt, out)
    return EXIT_OK


def cmd_validate(args):
    results = run_checks(_config(args))
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CONTRACT


def build_parser():
    parser = _Parser(prog="fas-keygen", description="Secret-key rate tools for fluid-antenna beamforming.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, scenario=True):
        p.add_argument("--config", help="configuration JSON (defaults if omitted)")
        if scenario:
            p.add_argument("--scenario", choices=("iid", "correlated"), default="iid")

    p = sub.add_parser("eval", help="rate of one beamformer")
    common(p)
    p.add_argument("--w", default="leading-eigvec", help="'leading-eigvec', a .npy file or a JSON list")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("optimize", help="run one port-selection method")
    common(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--draws", type=int, default=10_000, help="channel draws for fa_mrc")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="run a sweep spec and write rows")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int, help="override FAS_KEYGEN_THREADS")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("traverse", help="exhaustive port search")
    common(p)
    p.set_defaults(func=cmd_traverse)

    p = sub.add_parser("validate", help="run the self-check table")
    common(p, scenario=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"fas-keygen: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ContractError, OSError) as exc:
        print(f"fas-keygen: error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
