"""Campaign environments: a synthetic Barabasi-Albert world and cascade-log replay."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import networkx as nx
import numpy as np

from influence_bandits.ledger import ActivationLedger, Feedback


@dataclass(frozen=True)
class Context:
    vector: np.ndarray
    context_id: Optional[int] = None

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.ndim != 1 or v.size < 1 or not np.all(np.isfinite(v)):
            raise ValueError("context must be a finite non-empty vector")
        object.__setattr__(self, "vector", v)


@dataclass(frozen=True)
class ContextDraw:
    context: Context
    viral: bool = False
    viral_set: frozenset = frozenset()


@dataclass(frozen=True)
class WorldParams:
    """Knobs of the synthetic world; defaults are the desk-scale calibration."""

    n: int = 2000
    m: int = 1
    K: int = 10
    d: int = 8
    threshold: float = 0.999
    noise_sigma: float = 2.24
    viral_prob: float = 0.5
    profile_mean: float = 3.01
    profile_std: float = 2.17
    normal_mean: float = 0.238
    viral_mean: float = 0.469
    context_sigma: float = 0.011
    viral_mode: str = "fixed"
    # "orthogonal": scalar normal mean fills the first d//2 coordinates and the
    # viral mean the rest; "shared": both fill every coordinate
    context_layout: str = "orthogonal"


@dataclass
class SyntheticWorld:
    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    node_profiles: np.ndarray
    influencers: np.ndarray
    threshold: float
    noise_sigma: float
    viral_prob: float
    normal_mean: np.ndarray
    viral_mean: np.ndarray
    context_sigma: float
    rng_seed: int
    viral_mode: str = "per_round"

    @property
    def K(self) -> int:
        return len(self.influencers)

    @property
    def d(self) -> int:
        return self.node_profiles.shape[1]

    @property
    def logit_threshold(self) -> float:
        return math.log(self.threshold / (1.0 - self.threshold))

    def neighbors(self, j: int) -> np.ndarray:
        return self.indices[self.indptr[j]:self.indptr[j + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edge_count(self) -> int:
        return int(self.indptr[-1]) // 2


def _csr(n: int, edges) -> tuple:
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(a) for a in adj])
    indices = np.array([v for a in adj for v in sorted(a)], dtype=np.int64)
    return indptr, indices


def mean_vector(value, d: int, part: str = "all") -> np.ndarray:
    """Spread a scalar context mean over ``part`` of d entries, or check a length-d vector.

    ``part`` is "all", "head" (first d//2 entries) or "tail" (the remaining ones);
    entries outside the part are zero. Explicit vectors ignore ``part``.
    """
    vec = np.asarray(value, dtype=float)
    if vec.ndim == 0:
        out = np.zeros(d)
        lo, hi = {"all": (0, d), "head": (0, d // 2), "tail": (d // 2, d)}[part]
        out[lo:hi] = float(vec)
        return out
    if vec.shape != (d,):
        raise ValueError(f"context mean has {vec.size} entries, expected {d}")
    return vec.copy()


def top_degree(degrees: np.ndarray, K: int) -> np.ndarray:
    # stable sort on -degree keeps the lowest id first among ties
    return np.argsort(-degrees, kind="stable")[:K].astype(np.int64)


def world_from_edges(n: int, edges, profiles: np.ndarray, K: int, params: WorldParams | None = None,
                     seed: int = 0, influencers=None) -> SyntheticWorld:
    """Build a world from an explicit edge list (handy for small hand-made graphs)."""
    params = params or WorldParams(n=n, K=K, d=profiles.shape[1])
    if not 0.0 < params.threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if not 0.0 <= params.viral_prob <= 1.0:
        raise ValueError("viral_prob must lie in [0, 1]")
    if params.viral_mode not in ("per_round", "fixed"):
        raise ValueError(f"unknown viral_mode {params.viral_mode!r}")
    if params.context_layout not in ("orthogonal", "shared"):
        raise ValueError(f"unknown context_layout {params.context_layout!r}")
    indptr, indices = _csr(n, edges)
    infl = top_degree(np.diff(indptr), K) if influencers is None else np.asarray(influencers, dtype=np.int64)
    d = profiles.shape[1]
    ortho = params.context_layout == "orthogonal"
    return SyntheticWorld(
        node_count=n, indptr=indptr, indices=indices,
        node_profiles=np.asarray(profiles, dtype=float), influencers=infl,
        threshold=params.threshold, noise_sigma=params.noise_sigma, viral_prob=params.viral_prob,
        normal_mean=mean_vector(params.normal_mean, d, "head" if ortho else "all"),
        viral_mean=mean_vector(params.viral_mean, d, "tail" if ortho else "all"),
        context_sigma=params.context_sigma, rng_seed=int(seed), viral_mode=params.viral_mode,
    )


def generate_ba(n: int, m: int, K: int, d: int, seed: int, params: WorldParams | None = None) -> SyntheticWorld:
    """Preferential-attachment world; the K highest-degree nodes become influencers."""
    if not (n > m >= 1) or not (1 <= K <= n) or d < 1:
        raise ValueError(f"invalid sizes n={n}, m={m}, K={K}, d={d}")
    params = params or WorldParams()
    ss = np.random.SeedSequence(seed)
    graph_seed, profile_seed = ss.spawn(2)
    g = nx.barabasi_albert_graph(n, m, seed=int(graph_seed.generate_state(1)[0]))
    rng = np.random.default_rng(profile_seed)
    profiles = rng.normal(params.profile_mean, params.profile_std, size=(n, d))
    return world_from_edges(n, g.edges(), profiles, K, params, seed=seed)


def unit_ball(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 1.0 else vec


def fixed_viral_set(w: SyntheticWorld, L: int) -> frozenset:
    """The campaign-wide viral influencers used when ``viral_mode == "fixed"``."""
    rng = np.random.default_rng([w.rng_seed, L])
    return frozenset(int(k) for k in rng.choice(w.K, size=min(L + 1, w.K), replace=False))


def draw_context(w: SyntheticWorld, rng, L: int = 1) -> ContextDraw:
    """Draw a round context; viral rounds mark L+1 influencers as viral.

    The viral influencers are redrawn every round (``per_round``) or fixed for
    the whole world (``fixed``).
    """
    viral = bool(w.viral_prob > 0 and rng.random() < w.viral_prob)
    mean = w.viral_mean if viral else w.normal_mean
    vec = unit_ball(np.clip(rng.normal(mean, w.context_sigma), 0.0, 1.0))
    viral_set = frozenset()
    if viral:
        if w.viral_mode == "fixed":
            viral_set = fixed_viral_set(w, L)
        else:
            size = min(L + 1, w.K)
            viral_set = frozenset(int(k) for k in rng.choice(w.K, size=size, replace=False))
    return ContextDraw(Context(vec), viral, viral_set)


def effective_context(w: SyntheticWorld, draw: ContextDraw, arm: int) -> np.ndarray:
    if not draw.viral or arm in draw.viral_set:
        return draw.context.vector
    return w.normal_mean


def cascade(w: SyntheticWorld, seed_node: int, scores: np.ndarray, rng, seeds=()) -> tuple:
    """Breadth-first independent cascade from ``seed_node``.

    ``scores[j]`` is the noiseless activation logit of node j.  Every attempt
    draws fresh noise; returns (nodes, depths) excluding the seed.  Nodes in
    ``seeds`` (the round's other seeds) are already active and never reached.
    """
    cut = w.logit_threshold
    visited = np.zeros(w.node_count, dtype=bool)
    visited[seed_node] = True
    visited[np.asarray(list(seeds), dtype=np.int64)] = True
    frontier = np.array([seed_node], dtype=np.int64)
    out_nodes, out_depth = [], []
    depth = 0
    while frontier.size:
        depth += 1
        starts = w.indptr[frontier]
        counts = w.indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        offsets = np.repeat(starts - np.cumsum(counts) + counts, counts)
        cand = w.indices[offsets + np.arange(total)]
        cand = cand[~visited[cand]]
        if cand.size == 0:
            break
        logits = scores[cand]
        if w.noise_sigma > 0:
            logits = logits + rng.normal(0.0, w.noise_sigma, size=cand.size)
        new = np.unique(cand[logits >= cut])
        visited[new] = True
        out_nodes.append(new)
        out_depth.append(np.full(new.size, depth, dtype=np.int64))
        frontier = new
    if not out_nodes:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(out_nodes), np.concatenate(out_depth)


def _check_arms(K: int, chosen) -> list:
    chosen = sorted(int(k) for k in chosen)
    if len(set(chosen)) != len(chosen) or any(k < 0 or k >= K for k in chosen):
        raise ValueError(f"chosen arms {chosen} are not distinct influencers of [0, {K})")
    return chosen


def step_synthetic(w: SyntheticWorld, chosen, draw: ContextDraw, rng, round: int = 1) -> Feedback:
    """One round: an independent cascade per chosen influencer, first-reach attribution."""
    chosen = _check_arms(w.K, chosen)
    best: dict[int, tuple] = {}
    seeds = [int(w.influencers[k]) for k in chosen]
    for k in chosen:
        scores = w.node_profiles @ effective_context(w, draw, k)
        nodes, depths = cascade(w, int(w.influencers[k]), scores, rng, seeds)
        for j, dep in zip(nodes.tolist(), depths.tolist()):
            key = (dep, k)
            if j not in best or key < best[j]:
                best[j] = key
    sets: dict[int, set] = {k: set() for k in chosen}
    for j, (_, k) in best.items():
        sets[k].add(j)
    return Feedback.from_sets(round, sets)


def single_seed_spreads(w: SyntheticWorld, draw: ContextDraw, rng) -> list:
    out = []
    for k in range(w.K):
        scores = w.node_profiles @ effective_context(w, draw, k)
        nodes, _ = cascade(w, int(w.influencers[k]), scores, rng)
        out.append(nodes)
    return out


def rank_by_new(new_counts, L: int) -> list:
    order = sorted(range(len(new_counts)), key=lambda k: (-new_counts[k], k))
    return order[:L]


def true_best(w: SyntheticWorld, draw: ContextDraw, ledger: ActivationLedger, rng, L: int = 1) -> list:
    """Arms whose simulated single-seed cascades hit the most not-yet-seen nodes."""
    if not isinstance(w, SyntheticWorld):
        raise TypeError("true_best needs a synthetic world; replay uses ReplayEnv.oracle")
    spreads = single_seed_spreads(w, draw, rng)
    new = [sum(1 for j in s.tolist() if not ledger.is_seen(j)) for s in spreads]
    return rank_by_new(new, L)


# ---------------------------------------------------------------- replay


@dataclass
class ReplayLog:
    contexts: dict = field(default_factory=dict)
    records: dict = field(default_factory=dict)

    def __post_init__(self):
        for (_, cid) in self.records:
            if cid not in self.contexts:
                raise ValueError(f"record references unknown context_id {cid}")

    def influencers(self) -> list:
        return sorted({k for k, _ in self.records})

    def node_universe(self) -> set:
        out: set = set()
        for recs in self.records.values():
            for r in recs:
                out |= r
        return out

    def add(self, influencer: int, context_id: int, activations) -> None:
        if context_id not in self.contexts:
            raise ValueError(f"unknown context_id {context_id}")
        self.records.setdefault((int(influencer), int(context_id)), []).append(
            frozenset(int(j) for j in activations))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReplayLog):
            return NotImplemented
        if self.contexts.keys() != other.contexts.keys():
            return False
        for cid, c in self.contexts.items():
            if not np.array_equal(c.vector, other.contexts[cid].vector):
                return False
        return self.records == other.records


def step_replay(log: ReplayLog, chosen, ctx: Context, rng, round: int = 1) -> Feedback:
    """Sample one logged cascade per chosen influencer for the round's context.

    A node present in several sampled cascades goes to the lowest influencer id.
    """
    if ctx.context_id not in log.contexts:
        raise ValueError(f"unknown context_id {ctx.context_id}")
    taken: set = set()
    sets = {}
    for k in sorted(int(c) for c in chosen):
        recs = log.records.get((k, ctx.context_id))
        if not recs:
            sets[k] = set()
            continue
        picked = recs[int(rng.integers(len(recs)))] if len(recs) > 1 else recs[0]
        sets[k] = set(picked) - taken
        taken |= picked
    return Feedback.from_sets(round, sets)


def write_log(log: ReplayLog, log_path, contexts_path) -> None:
    with open(contexts_path, "w", encoding="utf-8", newline="\n") as fh:
        for cid in sorted(log.contexts):
            vec = [float(x) for x in log.contexts[cid].vector]
            fh.write(json.dumps({"context_id": int(cid), "vector": vec}) + "\n")
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        for (k, cid) in sorted(log.records):
            for rec in log.records[(k, cid)]:
                fh.write(json.dumps({"influencer": k, "context_id": cid,
                                     "activations": sorted(rec)}) + "\n")


def read_log(log_path, contexts_path) -> ReplayLog:
    contexts = {}
    for obj in _jsonl(contexts_path):
        cid = int(obj["context_id"])
        contexts[cid] = Context(np.array(obj["vector"], dtype=float), cid)
    log = ReplayLog(contexts=contexts)
    for obj in _jsonl(log_path):
        log.add(int(obj["influencer"]), int(obj["context_id"]), obj["activations"])
    return log


def _jsonl(path):
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc.msg}") from exc


def synthesize_log(w: SyntheticWorld, n_contexts: int, n_records: int, seed: int, L: int = 1) -> ReplayLog:
    """Simulate single-seed cascades into a replay log.

    Each context keeps the viral set it was drawn with, so in the log an
    influencer's reach depends on the context it is replayed under.
    """
    rng = np.random.default_rng(seed)
    draws = {}
    for cid in range(n_contexts):
        dr = draw_context(w, rng, L)
        draws[cid] = ContextDraw(Context(dr.context.vector, cid), dr.viral, dr.viral_set)
    log = ReplayLog(contexts={cid: dr.context for cid, dr in draws.items()})
    for _ in range(n_records if n_contexts else 0):
        k = int(rng.integers(w.K))
        cid = int(rng.integers(n_contexts))
        dr = draws[cid]
        scores = w.node_profiles @ effective_context(w, dr, k)
        nodes, _ = cascade(w, int(w.influencers[k]), scores, rng)
        log.add(k, cid, nodes.tolist())
    return log


# ------------------------------------------------------ environment wrappers


class SyntheticEnv:
    """Harness-facing wrapper around a generated world."""

    kind = "synthetic"

    def __init__(self, world: SyntheticWorld, L: int):
        self.world = world
        self.L = L
        self.K = world.K
        self.d = world.d

    def draw(self, rng) -> ContextDraw:
        return draw_context(self.world, rng, self.L)

    def step(self, chosen, draw: ContextDraw, rng, round: int) -> Feedback:
        return step_synthetic(self.world, chosen, draw, rng, round)

    def oracle(self, draw: ContextDraw, ledger: ActivationLedger, rng, L: int) -> list:
        return true_best(self.world, draw, ledger, rng, L)

    def universe_size(self) -> int:
        return self.world.node_count

    def regime(self, draw: ContextDraw, arm: int) -> str:
        if not draw.viral:
            return "normal"
        return "viral" if arm in draw.viral_set else "viral-round-normal"


class ReplayEnv:
    """Replay over a cascade log; arms are the log's influencers in sorted order."""

    kind = "replay"

    def __init__(self, log: ReplayLog, K: int | None = None):
        infl = log.influencers()
        if K is not None:
            if K > len(infl):
                raise ValueError(f"log has {len(infl)} influencers, K={K} requested")
            volume = {k: sum(len(r) for (kk, _), recs in log.records.items() if kk == k for r in recs)
                      for k in infl}
            infl = sorted(sorted(infl, key=lambda k: (-volume[k], k))[:K])
        self.log = log
        self.arm_ids = infl
        self.K = len(infl)
        self.d = len(next(iter(log.contexts.values())).vector)
        self._cids = sorted(log.contexts)
        self._universe = len(log.node_universe())

    def draw(self, rng) -> ContextDraw:
        cid = self._cids[int(rng.integers(len(self._cids)))]
        return ContextDraw(self.log.contexts[cid])

    def step(self, chosen, draw: ContextDraw, rng, round: int) -> Feedback:
        chosen = _check_arms(self.K, chosen)
        fb = step_replay(self.log, [self.arm_ids[k] for k in chosen], draw.context, rng, round)
        back = {self.arm_ids[k]: k for k in chosen}
        return Feedback(round, {back[i]: s for i, s in fb.per_influencer.items()})

    def oracle(self, draw: ContextDraw, ledger: ActivationLedger, rng, L: int) -> list:
        new = []
        for k in range(self.K):
            fb = step_replay(self.log, [self.arm_ids[k]], draw.context, rng)
            new.append(sum(1 for j in fb.union() if not ledger.is_seen(j)))
        return rank_by_new(new, L)

    def universe_size(self) -> int:
        return self._universe

    def regime(self, draw: ContextDraw, arm: int) -> str:
        return f"context-{draw.context.context_id}"


# operation-name aliases
env_generate_ba = generate_ba
env_draw_context = draw_context
env_step_synthetic = step_synthetic
env_step_replay = step_replay
env_true_best = true_best
loggen_synthesize = synthesize_log
