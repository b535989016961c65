"""Rate at which the DA's scoring baseline points the same way as a clean reference update."""
from _common import seeds_arg

from martfl.harness import run_experiment
from martfl.scenarios import baseline_selection

if __name__ == "__main__":
    args = seeds_arg((0, 1, 2, 3, 4)).parse_args()
    for bias in ("Unbiased", "TypeII", "TypeI"):
        r = run_experiment(baseline_selection(bias, args.seeds)).report
        per = " ".join(f"{v['baseline_correct_rate']:.2f}" for v in r["per_seed"].values())
        print(f"{bias:>8} {r['aggregate']['baseline_correct_rate']['mean']:.3f}  per seed: {per}", flush=True)
