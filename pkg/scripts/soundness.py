"""Empirical detection rate of column tampering against 1 - (1 - p)^c."""
import argparse

import numpy as np

from martfl.epoch import build_epoch

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--m", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--rates", type=float, nargs="+", default=[0.001, 0.005, 0.01])
    p.add_argument("--samples", type=int, nargs="+", default=[64, 256, 512])
    args = p.parse_args()
    print(f"{'p':>6} {'c':>5} {'detected':>9} {'analytic':>9}")
    for rate in args.rates:
        for c in args.samples:
            hits = 0
            for t in range(args.trials):
                rng = np.random.default_rng(t)
                n = 4
                bad = rng.choice(args.m, size=max(1, int(rate * args.m)), replace=False)
                art = build_epoch(rng.normal(0, 1, args.m), rng.dirichlet(np.ones(n)),
                                  rng.normal(0, 0.1, (n, args.m)), c, seed=t, epoch=t, difficulty=8,
                                  tamper_cols=bad)
                hits += not art.verify()
            k = max(1, int(rate * args.m))
            print(f"{rate:>6.3f} {c:>5} {hits / args.trials:>9.3f} {1 - (1 - k / args.m) ** c:>9.3f}", flush=True)
