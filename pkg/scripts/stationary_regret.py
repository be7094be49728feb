"""Per-round regret of LogNorm-LinUCB on a stationary log-linear bandit.

    python3 scripts/stationary_regret.py --K 5 --d 3 --T 2000 --runs 20
"""

import argparse

import numpy as np

from influence_bandits.analysis import StationaryBandit, empirical_regret, run_stationary
from influence_bandits.policies import PolicyConfig, make_policy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--T", type=int, default=2000)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--policy", default="lognorm-linucb")
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()

    thetas = np.random.default_rng(args.seed).uniform(0.2, 1.5, size=(args.K, args.d))
    per_round = []
    for run in range(args.runs):
        rng = np.random.default_rng([args.seed, run])
        pol = make_policy(args.policy, PolicyConfig(K=args.K, L=1, d=args.d, T=args.T), rng)
        trace = run_stationary(pol, StationaryBandit(thetas, args.noise), args.T, rng)
        per_round.append(np.diff(np.concatenate([[0.0], empirical_regret(trace, thetas)])))
    mean = np.mean(per_round, axis=0)
    width = max(args.T // 4, 1)
    for lo in range(0, args.T, width):
        print(f"rounds {lo + 1:5d}-{min(lo + width, args.T):5d}: mean regret per round {mean[lo:lo + width].mean():.4f}")
    print(f"cumulative regret at T: {mean.sum():.2f}")


if __name__ == "__main__":
    main()
