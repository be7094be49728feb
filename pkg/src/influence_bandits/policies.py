"""Seed-selection policies.

GLM-GT-UCB scores each influencer by a Good-Turing estimate of its remaining
potential, scaled by an exponential external factor learned by ridge
regression on the context.  LogNorm-LinUCB runs disjoint LinUCB on the log of
the per-influencer reward.  Random, UCB1, LinUCB, FAT-GT-UCB and an oracle
pass-through are the baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from influence_bandits.ledger import ActivationLedger, Feedback
from influence_bandits.linalg import ConfigError, DesignMatrix

FATIGUE: dict[str, Callable[[int], float]] = {
    "inverse": lambda n: 1.0 / n,
    "constant": lambda n: 1.0,
}


def default_gamma_expl(T: int, K: int, delta: float) -> float:
    return math.sqrt(0.5 * math.log(math.sqrt(2.0 * T * K / delta)))


@dataclass
class PolicyConfig:
    K: int
    L: int
    d: int
    T: int = 500
    gamma_expl: Optional[float] = None
    gamma_reg: float = 1.0
    delta: float = 0.05
    fatigue: str = "inverse"
    boost: float = 0.0
    fat_weighting: str = "reduction"

    def __post_init__(self):
        if min(self.K, self.L, self.d) < 1 or self.L > self.K:
            raise ConfigError(f"need 1 <= L <= K and d >= 1 (K={self.K}, L={self.L}, d={self.d})")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1)")
        if self.gamma_reg <= 0:
            raise ConfigError("gamma_reg must be positive")
        if self.fatigue not in FATIGUE:
            raise ConfigError(f"unknown fatigue function {self.fatigue!r}")
        if self.boost < 0:
            raise ConfigError("boost must be nonnegative")
        if self.gamma_expl is None:
            self.gamma_expl = default_gamma_expl(self.T, self.K, self.delta)
        if self.gamma_expl < 0:
            raise ConfigError("gamma_expl must be nonnegative")

    @property
    def f(self) -> Callable[[int], float]:
        return FATIGUE[self.fatigue]


@dataclass
class PlayRecord:
    round: int
    context: np.ndarray
    n_at_play: int
    c_bonus: float
    alpha_at_play: float
    r_prime: Optional[float]
    raw_new_activations: int
    activations: int


@dataclass
class InfluencerState:
    """Per-arm sufficient statistics.

    ``n_at_play`` counts the play itself, so the first play has n = 1.
    ``V`` absorbs every played context; ``s_vec`` only the plays whose
    regression target was defined.
    """

    arm_id: int
    V: DesignMatrix
    s_vec: np.ndarray
    plays: list = field(default_factory=list)
    activation_sum: float = 0.0
    # running sums over plays of the per-play exponentials used by the index
    sum_beta_quad: float = 0.0
    sum_beta_lin: float = 0.0
    sum_bias: float = 0.0

    @classmethod
    def fresh(cls, arm_id: int, d: int, reg: float) -> "InfluencerState":
        return cls(arm_id, DesignMatrix.new(d, reg), np.zeros(d))

    @property
    def n(self) -> int:
        return len(self.plays)

    def lambda_hat(self, L: int) -> float:
        return self.activation_sum / (L * self.n) if self.plays else 0.0

    def theta_hat(self, clamp: bool = True) -> np.ndarray:
        th = self.V.solve(self.s_vec)
        norm = float(np.linalg.norm(th))
        if clamp and norm > 1.0:
            th = th / norm
        return th

    def add_play(self, p: PlayRecord) -> None:
        self.plays.append(p)
        self.activation_sum += p.activations
        self.sum_beta_quad += math.exp((2.0 - 2.0 * p.c_bonus) / p.n_at_play)
        self.sum_beta_lin += math.exp((1.0 + p.c_bonus) / p.n_at_play)
        self.sum_bias += math.exp((-2.0 - p.c_bonus) / p.n_at_play)


# ------------------------------------------------------------ index formulas


def glm_alpha(theta_hat, y, n: int, c_bonus: float = 0.0, fatigue: Callable = FATIGUE["inverse"]) -> float:
    """Exponential external factor ``exp(f(n) * (<theta, y> + c_bonus))``."""
    if n < 1:
        raise ValueError("alpha needs n >= 1")
    return math.exp(fatigue(n) * (float(np.dot(theta_hat, y)) + c_bonus))


def discounted_hapax_sum(state: InfluencerState, ledger: ActivationLedger) -> float:
    return sum(ledger.hapax_count(p.round, state.arm_id) / p.alpha_at_play for p in state.plays)


def contextual_bonus(state: InfluencerState, y, gamma_expl: float) -> float:
    return gamma_expl * state.V.quad_norm(y)


def glm_good_turing(state: InfluencerState, ledger: ActivationLedger, y, gamma_expl: float,
                    fatigue: Callable = FATIGUE["inverse"]) -> float:
    """Remaining-potential estimate: live alpha times the alpha-discounted hapax mean."""
    n = state.n
    if n < 1:
        raise ValueError("Good-Turing estimate needs at least one play")
    alpha = glm_alpha(state.theta_hat(), y, n, contextual_bonus(state, y, gamma_expl), fatigue)
    return alpha * discounted_hapax_sum(state, ledger) / n


def play_mass(states) -> float:
    """Sum over every past (round, played arm) of exp(-1/n_arm(round))."""
    return sum(math.exp(-1.0 / p.n_at_play) for st in states for p in st.plays)


def glm_beta(state: InfluencerState, mass: float, y, gamma_expl: float, delta: float, L: int) -> float:
    """Confidence width of the Good-Turing estimate (assumes f(n) = 1/n).

    ``mass`` is :func:`play_mass` over all arms.
    """
    n = state.n
    if n < 1 or mass <= 0:
        raise ValueError("confidence width needs a non-empty play history")
    lam = state.lambda_hat(L)
    c = contextual_bonus(state, y, gamma_expl)
    log_term = math.log(1.0 / delta)
    quad = math.sqrt(max(2.0 * lam * math.exp((3.0 + 2.0 * c) / n) * state.sum_beta_quad / n**2 * log_term, 0.0))
    pot = math.sqrt(max(math.exp(2.0 / n) * lam * log_term / mass, 0.0))
    lin = math.exp((1.0 + c) / n) * state.sum_beta_lin / (3.0 * n) * log_term
    return quad + pot + lin


def glm_bias(state: InfluencerState, y, gamma_expl: float, L: int) -> float:
    n = state.n
    c = contextual_bonus(state, y, gamma_expl)
    return state.lambda_hat(L) * (1.0 - math.exp((-2.0 + c) / n) * state.sum_bias / n)


def glm_index(state: InfluencerState, mass: float, ledger: ActivationLedger, y, gamma_expl: float,
              delta: float, L: int, fatigue: Callable = FATIGUE["inverse"]) -> float:
    g = glm_good_turing(state, ledger, y, gamma_expl, fatigue)
    return g + glm_beta(state, mass, y, gamma_expl, delta, L) + glm_bias(state, y, gamma_expl, L)


def glm_regression_target(reward: float, state: InfluencerState, ledger: ActivationLedger,
                          boost: float = 0.0, fatigue: Callable = FATIGUE["inverse"]) -> Optional[float]:
    """Log-ratio of reward to discounted hapax mass, rescaled by 1/f(n).

    ``state.plays`` must already hold the current play.  Returns None when the
    target is undefined (zero reward or no surviving hapaxes).
    """
    n = state.n
    r = reward + boost
    mass = discounted_hapax_sum(state, ledger)
    if r <= 0 or mass <= 0:
        return None
    return math.log(r * n / mass) / fatigue(n)


def lognorm_index(state: InfluencerState, y, gamma_expl: float) -> float:
    theta = state.theta_hat(clamp=False)
    return float(theta @ np.asarray(y, dtype=float)) + gamma_expl * state.V.quad_norm(y)


linucb_baseline_index = lognorm_index


def lognorm_update_target(reward: float) -> tuple:
    """``(ln r, floored)``; rewards below 1 are floored to a zero target."""
    if reward < 0:
        raise ValueError("reward must be nonnegative")
    if reward < 1.0:
        return 0.0, True
    return math.log(reward), False


def ucb1_index(mean: float, n: int, t: int) -> float:
    return mean + math.sqrt(2.0 * math.log(t) / n)


def fatgt_good_turing(state: InfluencerState, ledger: ActivationLedger, fatigue: Callable = FATIGUE["inverse"]) -> float:
    """Fatigue-weighted variant: f(n+1) * mean of hapax(s) / f(n(s))."""
    n = state.n
    total = sum(ledger.hapax_count(p.round, state.arm_id) / fatigue(p.n_at_play) for p in state.plays)
    return fatigue(n + 1) * total / n


# ---------------------------------------------------------------- policies


def top_l(scores, L: int, priority=()) -> list:
    """Arms in ``priority`` first (lowest id first), then by score, ties to lowest id."""
    priority = sorted(priority)[:L]
    rest = sorted((k for k in range(len(scores)) if k not in set(priority)),
                  key=lambda k: (-scores[k], k))
    return sorted(priority + rest[: L - len(priority)])


class Policy:
    name = "policy"
    needs_init = False

    def __init__(self, cfg: PolicyConfig, rng=None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.last_scores: list = [0.0] * cfg.K

    def see(self, draw) -> None:
        """Hook called with the full round draw before selection."""

    def select(self, ctx, t: int) -> list:
        raise NotImplementedError

    def update(self, ctx, chosen, feedback: Feedback, reward_share: dict) -> None:
        raise NotImplementedError

    def snapshot(self) -> dict:
        return {"policy": self.name, "scores": [float(s) for s in self.last_scores]}

    def _check_share(self, chosen, reward_share: dict) -> list:
        chosen = sorted(int(k) for k in chosen)
        if sorted(reward_share) != chosen:
            raise ValueError(f"reward_share arms {sorted(reward_share)} != chosen {chosen}")
        return chosen


def _vec(ctx) -> np.ndarray:
    return np.asarray(getattr(ctx, "vector", ctx), dtype=float)


class RandomPolicy(Policy):
    name = "random"

    def select(self, ctx, t):
        return sorted(int(k) for k in self.rng.choice(self.cfg.K, size=self.cfg.L, replace=False))

    def update(self, ctx, chosen, feedback, reward_share):
        self._check_share(chosen, reward_share)


class UCB1(Policy):
    name = "ucb1"
    needs_init = True

    def __init__(self, cfg, rng=None):
        super().__init__(cfg, rng)
        self.counts = np.zeros(cfg.K, dtype=int)
        self.sums = np.zeros(cfg.K)

    def select(self, ctx, t):
        unplayed = [k for k in range(self.cfg.K) if self.counts[k] == 0]
        scores = [ucb1_index(self.sums[k] / self.counts[k], int(self.counts[k]), t) if self.counts[k] else math.inf
                  for k in range(self.cfg.K)]
        self.last_scores = scores
        return top_l(scores, self.cfg.L, unplayed)

    def update(self, ctx, chosen, feedback, reward_share):
        for k in self._check_share(chosen, reward_share):
            self.counts[k] += 1
            self.sums[k] += reward_share[k]

    def snapshot(self):
        snap = super().snapshot()
        snap["arms"] = [{"n": int(self.counts[k]), "mean": float(self.sums[k] / max(self.counts[k], 1))}
                        for k in range(self.cfg.K)]
        return snap


class LinUCB(Policy):
    """Disjoint LinUCB on the raw per-influencer reward."""

    name = "linucb"

    def __init__(self, cfg, rng=None):
        super().__init__(cfg, rng)
        self.states = [InfluencerState.fresh(k, cfg.d, cfg.gamma_reg) for k in range(cfg.K)]
        self.floored = 0

    def target(self, reward: float) -> float:
        return reward

    def select(self, ctx, t):
        y = _vec(ctx)
        scores = [lognorm_index(st, y, self.cfg.gamma_expl) for st in self.states]
        self.last_scores = scores
        return top_l(scores, self.cfg.L)

    def update(self, ctx, chosen, feedback, reward_share):
        y = _vec(ctx)
        for k in self._check_share(chosen, reward_share):
            st = self.states[k]
            st.V.update(y)
            st.s_vec = st.s_vec + self.target(reward_share[k]) * y
            st.activation_sum += feedback.size()
            st.plays.append(PlayRecord(feedback.round, y, st.n + 1, 0.0, 1.0, None,
                                       len(feedback.per_influencer.get(k, ())), feedback.size()))

    def snapshot(self):
        snap = super().snapshot()
        snap["arms"] = [{"n": st.n, "lambda_hat": st.lambda_hat(self.cfg.L),
                         "theta_hat": st.theta_hat(clamp=False).tolist()} for st in self.states]
        return snap


class LogNormLinUCB(LinUCB):
    name = "lognorm-linucb"

    def target(self, reward: float) -> float:
        value, floored = lognorm_update_target(reward)
        self.floored += floored
        return value


class GLMGTUCB(Policy):
    name = "glm-gt-ucb"
    needs_init = True
    contextual = True

    def __init__(self, cfg, rng=None):
        super().__init__(cfg, rng)
        self.states = [InfluencerState.fresh(k, cfg.d, cfg.gamma_reg) for k in range(cfg.K)]
        self.ledger = ActivationLedger()
        self.mass = 0.0
        self.skipped = 0
        self._diag: list = [{} for _ in range(cfg.K)]

    @property
    def gamma(self) -> float:
        return self.cfg.gamma_expl if self.contextual else 0.0

    def _y(self, ctx) -> np.ndarray:
        y = _vec(ctx)
        return y if self.contextual else np.zeros_like(y)

    def good_turing(self, st: InfluencerState, y) -> float:
        return glm_good_turing(st, self.ledger, y, self.gamma, self.cfg.f)

    def arm_index(self, st: InfluencerState, y) -> float:
        g = self.good_turing(st, y)
        beta = glm_beta(st, self.mass, y, self.gamma, self.cfg.delta, self.cfg.L)
        bias = glm_bias(st, y, self.gamma, self.cfg.L)
        self._diag[st.arm_id] = {"G": g, "beta": beta, "bias": bias}
        return g + beta + bias

    def select(self, ctx, t):
        y = self._y(ctx)
        unplayed = [st.arm_id for st in self.states if st.n == 0]
        scores = [self.arm_index(st, y) if st.n else math.inf for st in self.states]
        self.last_scores = scores
        return top_l(scores, self.cfg.L, unplayed)

    def update(self, ctx, chosen, feedback, reward_share):
        chosen = self._check_share(chosen, reward_share)
        y = self._y(ctx)
        self.ledger.record(feedback)
        size = feedback.size()
        for k in chosen:
            st = self.states[k]
            n_new = st.n + 1
            c = contextual_bonus(st, y, self.gamma)
            alpha = glm_alpha(st.theta_hat(), y, n_new, c, self.cfg.f)
            play = PlayRecord(feedback.round, y, n_new, c, alpha, None,
                              self.ledger.hapax_count(feedback.round, k), size)
            st.add_play(play)
            self.mass += math.exp(-1.0 / n_new)
            st.V.update(y)
            r_prime = glm_regression_target(reward_share[k], st, self.ledger, self.cfg.boost, self.cfg.f)
            if r_prime is None:
                self.skipped += 1
                continue
            play.r_prime = r_prime
            st.s_vec = st.s_vec + r_prime * y

    def snapshot(self):
        snap = super().snapshot()
        snap["arms"] = [dict({"n": st.n, "lambda_hat": st.lambda_hat(self.cfg.L),
                              "theta_hat": st.theta_hat().tolist()}, **self._diag[st.arm_id])
                        for st in self.states]
        return snap


class FATGTUCB(GLMGTUCB):
    """Context-free GT-UCB: GLM-GT-UCB with the context and its bonus zeroed.

    ``fat_weighting="fatigue"`` swaps the estimator for the fatigue-weighted
    mean ``f(n+1) * mean_s hapax(s) / f(n(s))``.
    """

    name = "fat-gt-ucb"
    contextual = False

    def good_turing(self, st, y):
        if self.cfg.fat_weighting == "fatigue":
            return fatgt_good_turing(st, self.ledger, self.cfg.f)
        return super().good_turing(st, y)


def fatgt_index(state: InfluencerState, ledger: ActivationLedger, mass: float, delta: float, L: int,
                weighting: str = "reduction", fatigue: Callable = FATIGUE["inverse"]) -> float:
    zero = np.zeros(state.V.dim)
    if weighting == "fatigue":
        g = fatgt_good_turing(state, ledger, fatigue)
    else:
        g = glm_good_turing(state, ledger, zero, 0.0, fatigue)
    return g + glm_beta(state, mass, zero, 0.0, delta, L) + glm_bias(state, zero, 0.0, L)


class OraclePolicy(Policy):
    """Picks the arms with the most simulated new activations; needs :meth:`bind`."""

    name = "oracle"

    def __init__(self, cfg, rng=None):
        super().__init__(cfg, rng)
        self.env = None
        self.ledger: Optional[ActivationLedger] = None
        self._draw = None

    def bind(self, env, ledger: ActivationLedger) -> None:
        self.env, self.ledger = env, ledger

    def see(self, draw) -> None:
        self._draw = draw

    def select(self, ctx, t):
        if self.env is None or self._draw is None:
            raise RuntimeError("oracle policy used without a bound environment")
        return sorted(self.env.oracle(self._draw, self.ledger, self.rng, self.cfg.L))

    def update(self, ctx, chosen, feedback, reward_share):
        self._check_share(chosen, reward_share)


POLICIES = {cls.name: cls for cls in (RandomPolicy, UCB1, LinUCB, LogNormLinUCB, GLMGTUCB, FATGTUCB, OraclePolicy)}


def make_policy(name: str, cfg: PolicyConfig, rng=None) -> Policy:
    try:
        return POLICIES[name](cfg, rng)
    except KeyError:
        raise ConfigError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
