"""Sign-randomizing adversaries at increasing fractions: martFL vs FedAvg final accuracy."""
from _common import seeds_arg

from martfl.harness import run_experiment
from martfl.scenarios import untargeted

if __name__ == "__main__":
    p = seeds_arg((0, 1, 2))
    p.add_argument("--fractions", type=float, nargs="+", default=[0.0, 0.2, 0.4, 0.6, 0.8])
    args = p.parse_args()
    print(f"{'fraction':>8} {'martFL':>8} {'FedAvg':>8}")
    for frac in args.fractions:
        row = [run_experiment(untargeted(agg, frac, args.seeds)).report["aggregate"]["final_mta"]["mean"]
               for agg in ("martFL", "FedAvg")]
        print(f"{frac:>8.1f} {100 * row[0]:>7.1f}% {100 * row[1]:>7.1f}%", flush=True)
