"""Inclusiveness and robustness with 30% honest, 30% TypeI-biased, 40% label-flipping DPs."""
from _common import seeds_arg

from martfl.harness import run_experiment
from martfl.scenarios import tradeoff

if __name__ == "__main__":
    args = seeds_arg((0, 1, 2, 3, 4)).parse_args()
    print(f"{'aggregator':>10} {'inclusive':>9} {'robust':>7} {'MTA':>6} {'ASR':>6}")
    for agg in ("martFL", "FLTrust", "Krum", "FedAvg", "Median"):
        a = run_experiment(tradeoff(agg, args.seeds)).report["aggregate"]
        print(f"{agg:>10} {a['inclusiveness']['mean']:>9.3f} {a['robustness']['mean']:>7.3f} "
              f"{a['final_mta']['mean']:>6.3f} {a['final_asr']['mean']:>6.3f}", flush=True)
