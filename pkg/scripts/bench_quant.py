"""Quantized vs float pipeline: worst coordinate error against the analytic bound, plus end-to-end MTA."""
import argparse

from martfl.harness import bench_quant, run_experiment
from martfl.scenarios import quantization_fidelity

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--mta", action="store_true", help="also train the n=16 scenario with and without quantization")
    args = p.parse_args()
    for n, m, bits in [(4, 1024, 8), (16, 2048, 8), (32, 10_000, 8), (16, 2048, 16)]:
        rows = bench_quant(n, m, bits, seeds=3)
        worst = max(r["max_abs_err"] / r["bound"] for r in rows)
        print(f"n={n:>3} m={m:>6} bits={bits:>2}  max err/bound = {worst:.3f}", flush=True)
    if args.mta:
        per = {q: run_experiment(quantization_fidelity(q)).report["per_seed"] for q in (False, True)}
        for s in per[True]:
            f, q = per[False][s]["final_mta"], per[True][s]["final_mta"]
            print(f"seed {s}: float {100 * f:.2f}%  quantized {100 * q:.2f}%  delta {100 * (q - f):+.2f} pp")
