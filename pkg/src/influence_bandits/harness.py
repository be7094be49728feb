"""Campaign orchestration: config, seeding, the round loop, aggregation, CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from influence_bandits.environments import (ReplayEnv, SyntheticEnv, WorldParams, generate_ba,
                                            read_log)
from influence_bandits.ledger import ActivationLedger, split_uniformly
from influence_bandits.linalg import MAX_DIM, ConfigError
from influence_bandits.policies import OraclePolicy, PolicyConfig, make_policy

log = logging.getLogger(__name__)


def stream_seed(master: int, *tags) -> np.random.SeedSequence:
    """Order-independent seed for the stream named by ``tags``."""
    key = tuple(int.from_bytes(hashlib.blake2b(str(t).encode(), digest_size=4).digest(), "little")
                for t in tags)
    return np.random.SeedSequence(entropy=int(master), spawn_key=key)


def stream(master: int, *tags) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master, *tags))


@dataclass
class CampaignConfig:
    environment: dict
    policies: list
    T: int
    R: int
    L: int
    K: int
    d: int
    seed: int = 0
    delta: float = 0.05
    gamma_expl: Optional[float] = None
    gamma_reg: float = 1.0
    boost_enabled: bool = False
    output_dir: Optional[str] = None
    base_dir: str = "."

    def __post_init__(self):
        if self.T < self.K:
            raise ConfigError(f"T={self.T} must be at least K={self.K}")
        if self.R < 1:
            raise ConfigError("R must be at least 1")
        if not 1 <= self.L <= self.K:
            raise ConfigError("need 1 <= L <= K")
        if not 1 <= self.d <= MAX_DIM:
            raise ConfigError(f"d must lie in [1, {MAX_DIM}]")
        if not self.policies:
            raise ConfigError("no policies configured")
        self.policies = [p if isinstance(p, dict) else {"name": p} for p in self.policies]
        labels = [self.label(p) for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate policy labels {labels}")
        kind = self.environment.get("type", "synthetic")
        if kind not in ("synthetic", "replay"):
            raise ConfigError(f"unknown environment type {kind!r}")
        if kind == "replay" and not {"log", "contexts"} <= self.environment.keys():
            raise ConfigError("replay environment needs 'log' and 'contexts' paths")
        if kind == "synthetic":
            known = {f.name for f in fields(WorldParams)}
            extra = set(self.environment) - known - {"type", "aggregate_feedback"}
            if extra:
                raise ConfigError(f"unknown synthetic environment keys {sorted(extra)}")

    @staticmethod
    def label(p: dict) -> str:
        return p.get("label", p["name"])

    @property
    def labels(self) -> list:
        return [self.label(p) for p in self.policies]

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str = ".") -> "CampaignConfig":
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        missing = {"environment", "policies", "T", "R", "L", "K", "d"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys {sorted(missing)}")
        return cls(**dict(raw, base_dir=raw.get("base_dir", base_dir)))

    @classmethod
    def load(cls, path) -> "CampaignConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw, base_dir=str(path.parent))

    def policy_config(self, entry: dict) -> PolicyConfig:
        overrides = {k: v for k, v in entry.items() if k not in ("name", "label")}
        base = dict(K=self.K, L=self.L, d=self.d, T=self.T, gamma_expl=self.gamma_expl,
                    gamma_reg=self.gamma_reg, delta=self.delta,
                    boost=10.0 / self.L if self.boost_enabled else 0.0)
        base.update(overrides)
        return PolicyConfig(**base)

    def world_params(self) -> WorldParams:
        env = {k: tuple(v) if isinstance(v, list) else v
               for k, v in self.environment.items() if k not in ("type", "aggregate_feedback")}
        return WorldParams(**dict(env, K=self.K, d=self.d))


@dataclass
class RunResult:
    policy: str
    run: int
    rewards: list
    cumulative: list
    distinct: list
    selections: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    ledger: Optional[dict] = None
    universe: int = 0


@dataclass
class CampaignResult:
    config: CampaignConfig
    runs: dict

    def curves(self, policy: str) -> np.ndarray:
        """(R, T) cumulative-reward matrix for one policy."""
        return np.array([self.runs[(policy, r)].cumulative for r in range(self.config.R)], dtype=float)

    def aggregates(self) -> dict:
        return {p: aggregate(self.curves(p)) for p in self.config.labels}

    def final_means(self) -> dict:
        return {p: float(self.curves(p)[:, -1].mean()) for p in self.config.labels}


def aggregate(curves) -> tuple:
    """Pointwise mean and sample standard deviation over runs (std 0 for one run)."""
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    if curves.shape[0] < 1 or curves.size == 0:
        raise ValueError("need at least one run")
    mean = curves.mean(axis=0)
    std = curves.std(axis=0, ddof=1) if curves.shape[0] > 1 else np.zeros(curves.shape[1])
    return mean, std


@lru_cache(maxsize=8)
def _world(params: WorldParams, seed: int):
    return generate_ba(params.n, params.m, params.K, params.d, seed, params)


@lru_cache(maxsize=4)
def _replay_log(log_path: str, contexts_path: str):
    return read_log(log_path, contexts_path)


def build_env(cfg: CampaignConfig, run: int):
    env = cfg.environment
    if env.get("type", "synthetic") == "replay":
        base = Path(cfg.base_dir)
        lp, cp = (str(base / env[k]) for k in ("log", "contexts"))
        e = ReplayEnv(_replay_log(lp, cp), cfg.K)
        if e.d != cfg.d:
            raise ConfigError(f"log contexts have d={e.d}, config says d={cfg.d}")
        return e
    params = cfg.world_params()
    seed = int(stream_seed(cfg.seed, "world", run).generate_state(1, np.uint64)[0])
    return SyntheticEnv(_world(params, seed), cfg.L)


def run_pair(cfg: CampaignConfig, label: str, run: int, trace: bool = False,
             dump_ledger: bool = False) -> RunResult:
    """One campaign of T rounds for one policy."""
    entry = next(p for p in cfg.policies if cfg.label(p) == label)
    env = build_env(cfg, run)
    pcfg = cfg.policy_config(entry)
    policy = make_policy(entry["name"], pcfg, stream(cfg.seed, label, run, "policy"))
    ctx_rng = stream(cfg.seed, "context", run)
    env_rng = stream(cfg.seed, label, run, "env")
    ledger = ActivationLedger()
    if isinstance(policy, OraclePolicy):
        policy.bind(env, ledger)
    aggregate_fb = bool(cfg.environment.get("aggregate_feedback", False))
    rewards, cumulative, distinct, selections, snaps = [], [], [], [], []
    for t in range(1, cfg.T + 1):
        draw = env.draw(ctx_rng)
        policy.see(draw)
        chosen = policy.select(draw.context, t)
        if len(set(chosen)) != cfg.L:
            raise RuntimeError(f"{label} selected {chosen}, expected {cfg.L} distinct arms")
        fb = env.step(chosen, draw, env_rng, t)
        if aggregate_fb:
            fb = split_uniformly(t, fb.union(), chosen, env_rng)
        for k in chosen:
            new_k = sum(1 for j in fb.per_influencer.get(k, ()) if not ledger.is_seen(j))
            selections.append((t, k, new_k, env.regime(draw, k)))
        reward = ledger.record(fb)
        policy.update(draw.context, chosen, fb, {k: reward / cfg.L for k in chosen})
        rewards.append(reward)
        cumulative.append(ledger.seen_total)
        distinct.append(ledger.seen_total)
        if trace:
            snaps.append(dict(policy.snapshot(), round=t, chosen=list(chosen)))
    return RunResult(label, run, rewards, cumulative, distinct, selections, snaps,
                     ledger.to_json() if dump_ledger else None, env.universe_size())


def _run_pair_args(args):
    return run_pair(*args)


def run_campaign(cfg: CampaignConfig, workers: int = 1, trace: bool = False,
                 dump_ledger: bool = False) -> CampaignResult:
    jobs = [(cfg, label, r, trace, dump_ledger) for label in cfg.labels for r in range(cfg.R)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_pair_args, jobs, chunksize=1))
    else:
        results = [_run_pair_args(j) for j in jobs]
    runs = {(res.policy, res.run): res for res in results}
    for res in results:
        log.debug("%s run %d: final %d", res.policy, res.run, res.cumulative[-1])
    return CampaignResult(cfg, runs)


# ------------------------------------------------------------------ output


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6f}"


RUN_HEADER = ["policy", "run", "round", "reward", "cum_reward", "distinct_activated"]
AGG_HEADER = ["policy", "round", "mean_cum_reward", "std_cum_reward"]


def write_results(result: CampaignResult, out_dir, trace: bool = False, dump_ledger: bool = False) -> list:
    """Write per-run, aggregate and selection CSVs; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    written = []
    for r in range(cfg.R):
        rows = []
        for label in cfg.labels:
            res = result.runs[(label, r)]
            for t in range(cfg.T):
                rows.append([label, r, t + 1, res.rewards[t], res.cumulative[t], res.distinct[t]])
        written.append(_write(out / f"run_{r:03d}.csv", _csv_text(RUN_HEADER, rows)))
    rows = []
    for label, (mean, std) in result.aggregates().items():
        rows.extend([label, t + 1, _fmt(mean[t]), _fmt(std[t])] for t in range(cfg.T))
    written.append(_write(out / "aggregate.csv", _csv_text(AGG_HEADER, rows)))
    rows = [[label, r, t, k, new, regime]
            for label in cfg.labels for r in range(cfg.R)
            for (t, k, new, regime) in result.runs[(label, r)].selections]
    written.append(_write(out / "selections.csv",
                          _csv_text(["policy", "run", "round", "arm", "new_activations", "regime"], rows)))
    if trace:
        for (label, r), res in sorted(result.runs.items()):
            lines = "".join(json.dumps(s, sort_keys=True) + "\n" for s in res.trace)
            written.append(_write(out / f"trace_{label}_{r:03d}.jsonl", lines))
    if dump_ledger:
        for (label, r), res in sorted(result.runs.items()):
            written.append(_write(out / f"ledger_{label}_{r:03d}.json", json.dumps(res.ledger, sort_keys=True)))
    return written


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
