"""Command line entry point: ``martfl run | verify | bench-quant``."""
from __future__ import annotations

import argparse
import json
import sys

from .harness import ExperimentConfig, bench_quant, run_experiment, verify_files


def _run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run_experiment(cfg)
    result.write(args.out)
    print(json.dumps(result.report["aggregate"], sort_keys=True, indent=2))
    return 0


def _verify(args) -> int:
    ok = verify_files(args.proof, args.epoch_state)
    print("accepted" if ok else "rejected")
    return 0 if ok else 1


def _bench(args) -> int:
    rows = bench_quant(args.n, args.m, args.bits, seeds=args.seeds, eta=args.eta)
    print(f"{'seed':>4} {'n':>4} {'m':>7} {'bits':>4} {'max_abs_err':>12} {'bound':>12} ok")
    for r in rows:
        ok = r["max_abs_err"] <= r["bound"]
        print(f"{r['seed']:>4} {r['n']:>4} {r['m']:>7} {r['bits']:>4} {r['max_abs_err']:>12.4e} "
              f"{r['bound']:>12.4e} {'yes' if ok else 'NO'}")
    return 0 if all(r["max_abs_err"] <= r["bound"] for r in rows) else 1


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="martfl", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=_run)
    v = sub.add_parser("verify", help="re-verify a stored proof against its epoch state")
    v.add_argument("--proof", required=True)
    v.add_argument("--epoch-state", required=True)
    v.set_defaults(fn=_verify)
    b = sub.add_parser("bench-quant", help="quantization fidelity table")
    b.add_argument("--n", type=int, default=16)
    b.add_argument("--m", type=int, default=2048)
    b.add_argument("--bits", type=int, default=8, choices=(8, 16))
    b.add_argument("--seeds", type=int, default=5)
    b.add_argument("--eta", type=int, default=22)
    b.set_defaults(fn=_bench)
    args = p.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
