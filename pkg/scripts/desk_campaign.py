"""Desk-scale cumulative-reward comparison on the synthetic world.

Runs every policy of the campaign config, writes the run/aggregate CSVs and
curve data, and prints each policy's final mean with its ratio to the better
of Random and UCB1.

    python3 scripts/desk_campaign.py --config configs/desk_campaign.json --out results/desk
"""

import argparse
import time
from pathlib import Path

from influence_bandits.analysis import export_plot_data, load_runs
from influence_bandits.harness import CampaignConfig, run_campaign, write_results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=Path(__file__).parents[1] / "configs" / "desk_campaign.json")
    ap.add_argument("--out", type=Path, default=Path("results/desk"))
    ap.add_argument("--runs", type=int, help="override R")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = CampaignConfig.load(args.config)
    if args.runs:
        cfg.R = args.runs
    start = time.perf_counter()
    result = run_campaign(cfg, workers=args.workers)
    elapsed = time.perf_counter() - start
    write_results(result, args.out)
    export_plot_data(load_runs(args.out), args.out / "plot", fmt="svg")

    fm = result.final_means()
    base = max(fm.get("random", 0.0), fm.get("ucb1", 0.0)) or 1.0
    print(f"{cfg.R} runs x {cfg.T} rounds in {elapsed:.1f}s")
    for policy, mean in sorted(fm.items(), key=lambda kv: -kv[1]):
        print(f"  {policy:16s} {mean:9.1f}   x{mean / base:.3f}")


if __name__ == "__main__":
    main()
