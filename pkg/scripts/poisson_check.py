"""Poisson fit of per-arm rewards under Oracle play.

Pools the oracle's per-(arm, regime) new-activation counts over R runs and
reports the fitted rate and the max ECDF gap of every cell with enough data.

    python3 scripts/poisson_check.py --runs 20 --min-samples 200
"""

import argparse
import warnings

from influence_bandits.analysis import poisson_cells
from influence_bandits.harness import CampaignConfig, run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--rounds", type=int, default=200)
    ap.add_argument("--min-samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    cfg = CampaignConfig(environment={"type": "synthetic"}, policies=["oracle"], T=args.rounds, R=args.runs,
                         L=2, K=10, d=8, seed=args.seed)
    result = run_campaign(cfg)
    rows = [{"policy": "oracle", "arm": k, "regime": regime, "new_activations": new}
            for res in result.runs.values() for (_, k, new, regime) in res.selections]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cells = poisson_cells(rows, min_samples=args.min_samples)
    good = 0
    for c in cells:
        good += c["gof"] <= 0.15
        print(f"arm {c['arm']:2d} {c['regime']:20s} n={c['n']:5d} lambda={c['lambda']:7.3f} gof={c['gof']:.3f}")
    print(f"{good}/{len(cells)} cells with gof <= 0.15")


if __name__ == "__main__":
    main()
