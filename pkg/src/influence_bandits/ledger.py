"""Global activation history: new-activation rewards and hapax counts.

A hapax is a node activated exactly once so far.  Every hapax is owned by the
(round, influencer) pair that activated it; the ownership is dropped the moment
the node is activated a second time.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class Feedback:
    round: int
    per_influencer: Mapping[int, frozenset]

    @classmethod
    def from_sets(cls, round: int, sets: Mapping[int, Iterable[int]]) -> "Feedback":
        return cls(round, {int(k): frozenset(int(j) for j in v) for k, v in sets.items()})

    def union(self) -> set:
        out: set = set()
        for nodes in self.per_influencer.values():
            out |= nodes
        return out

    def size(self) -> int:
        return sum(len(v) for v in self.per_influencer.values())

    def check_disjoint(self) -> None:
        if self.size() != len(self.union()):
            raise ValueError(f"round {self.round}: attributed activation sets overlap")


def split_uniformly(round: int, nodes: Iterable[int], chosen: Iterable[int], rng) -> Feedback:
    """Attribute an aggregate activation set uniformly at random among ``chosen``."""
    chosen = sorted(chosen)
    nodes = sorted(nodes)
    owners = rng.integers(len(chosen), size=len(nodes)) if nodes else np.empty(0, dtype=int)
    sets: dict[int, set] = {k: set() for k in chosen}
    for j, o in zip(nodes, owners):
        sets[chosen[int(o)]].add(j)
    return Feedback.from_sets(round, sets)


@dataclass
class ActivationLedger:
    counts: dict = field(default_factory=dict)
    unique_origin: dict = field(default_factory=dict)
    hapax: dict = field(default_factory=lambda: defaultdict(int))
    seen_total: int = 0
    rewards: list = field(default_factory=list)
    last_round: int = 0

    def record(self, f: Feedback) -> int:
        """Fold one round of feedback in and return the number of new activations."""
        if f.round <= self.last_round:
            raise ValueError(f"round {f.round} recorded after round {self.last_round}")
        f.check_disjoint()
        reward = 0
        for k in sorted(f.per_influencer):
            for j in f.per_influencer[k]:
                c = self.counts.get(j, 0)
                if c == 0:
                    reward += 1
                    self.unique_origin[j] = (f.round, k)
                    self.hapax[(f.round, k)] += 1
                elif c == 1:
                    origin = self.unique_origin.pop(j)
                    self.hapax[origin] -= 1
                    if self.hapax[origin] == 0:
                        del self.hapax[origin]
                self.counts[j] = c + 1
        self.seen_total += reward
        self.rewards.append(reward)
        self.last_round = f.round
        return reward

    def hapax_count(self, s: int, k: int) -> int:
        return self.hapax.get((s, k), 0)

    def reward_history(self) -> list:
        return list(self.rewards)

    def is_seen(self, j: int) -> bool:
        return j in self.counts

    def to_json(self) -> dict:
        return {
            "seen_total": self.seen_total,
            "rewards": list(self.rewards),
            "counts": {str(j): c for j, c in sorted(self.counts.items())},
            "hapax": [[s, k, h] for (s, k), h in sorted(self.hapax.items())],
        }


def ledger_record(ledger: ActivationLedger, f: Feedback) -> tuple:
    reward = ledger.record(f)
    return ledger, reward


def ledger_reward_history(ledger: ActivationLedger) -> list:
    return ledger.reward_history()


def ledger_hapax_count(ledger: ActivationLedger, s: int, k: int) -> int:
    return ledger.hapax_count(s, k)
