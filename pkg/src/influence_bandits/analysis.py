"""Post-hoc analysis: Poisson fits, stationary-bandit regret, plot data."""

from __future__ import annotations

import csv
import json
import warnings
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np
from scipy import stats

from influence_bandits.ledger import Feedback
from influence_bandits.policies import Policy

MIN_FIT_SAMPLES = 30


def poisson_fit(samples) -> tuple:
    """MLE rate and the max |ECDF - Poisson CDF| over 0..max(samples)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("poisson_fit needs at least one sample")
    if np.any(x < 0):
        raise ValueError("samples must be nonnegative counts")
    if x.size < MIN_FIT_SAMPLES:
        warnings.warn(f"only {x.size} samples; a Poisson fit needs at least {MIN_FIT_SAMPLES}", stacklevel=2)
    lam = float(x.mean())
    support = np.arange(int(x.max()) + 1)
    ecdf = np.searchsorted(np.sort(x), support, side="right") / x.size
    gof = float(np.max(np.abs(ecdf - stats.poisson.cdf(support, lam)))) if lam > 0 else float(np.max(np.abs(ecdf - 1.0)))
    return lam, gof


# ------------------------------------------------------- stationary bandit


@dataclass
class StationaryBandit:
    """Log-linear bandit: ``ln r = <theta_k, y> + noise`` with y ~ U[0, 1]^d."""

    thetas: np.ndarray
    noise_sigma: float = 0.1

    @property
    def K(self) -> int:
        return self.thetas.shape[0]

    @property
    def d(self) -> int:
        return self.thetas.shape[1]

    def context(self, rng) -> np.ndarray:
        return rng.random(self.d)

    def log_reward(self, k: int, y: np.ndarray, rng) -> float:
        noise = rng.normal(0.0, self.noise_sigma) if self.noise_sigma > 0 else 0.0
        return float(self.thetas[k] @ y) + noise


@dataclass
class Trace:
    contexts: np.ndarray
    chosen: np.ndarray
    log_rewards: np.ndarray


def run_stationary(policy: Policy, bandit: StationaryBandit, T: int, rng) -> Trace:
    """Drive a single-arm policy (L = 1) on a stationary bandit for T rounds."""
    ys, arms, logs = [], [], []
    for t in range(1, T + 1):
        y = bandit.context(rng)
        (k,) = policy.select(y, t)
        lr = bandit.log_reward(k, y, rng)
        policy.update(y, [k], Feedback(t, {k: frozenset()}), {k: float(np.exp(lr))})
        ys.append(y)
        arms.append(k)
        logs.append(lr)
    return Trace(np.array(ys), np.array(arms), np.array(logs))


def empirical_regret(trace: Trace, true_thetas: Optional[np.ndarray]) -> np.ndarray:
    """Cumulative log-scale regret against the best arm of each round."""
    if true_thetas is None:
        raise ValueError("empirical regret needs the true arm parameters")
    best = np.max(trace.contexts @ np.asarray(true_thetas).T, axis=1)
    return np.cumsum(best - trace.log_rewards)


# ---------------------------------------------------------------- results IO


def load_runs(runs_dir) -> dict:
    """policy -> (R, T) array of cumulative rewards read from ``run_*.csv``."""
    data: dict = defaultdict(dict)
    files = sorted(Path(runs_dir).glob("run_*.csv"))
    if not files:
        raise FileNotFoundError(f"no run_*.csv files in {runs_dir}")
    for path in files:
        with open(path, encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                data[row["policy"]].setdefault(int(row["run"]), []).append((int(row["round"]), int(row["cum_reward"])))
    out = {}
    for policy, runs in data.items():
        out[policy] = np.array([[c for _, c in sorted(runs[r])] for r in sorted(runs)], dtype=float)
    return out


def load_selections(runs_dir) -> list:
    path = Path(runs_dir) / "selections.csv"
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def poisson_cells(rows, policy: str = "oracle", min_samples: int = 200) -> list:
    """Poisson fit per (arm, regime) over a policy's per-arm new activations."""
    cells: dict = defaultdict(list)
    for row in rows:
        if row["policy"] == policy:
            cells[(int(row["arm"]), row["regime"])].append(int(row["new_activations"]))
    out = []
    for (arm, regime), values in sorted(cells.items()):
        if len(values) < min_samples:
            continue
        lam, gof = poisson_fit(values)
        out.append({"arm": arm, "regime": regime, "n": len(values), "lambda": lam, "gof": gof})
    return out


def summarize(curves: dict) -> dict:
    out = {}
    for policy, c in curves.items():
        final = c[:, -1]
        out[policy] = {"runs": int(c.shape[0]), "rounds": int(c.shape[1]), "final_mean": float(final.mean()),
                       "final_std": float(final.std(ddof=1)) if c.shape[0] > 1 else 0.0}
    return out


def analyze(runs_dir, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"summary": summarize(load_runs(runs_dir))}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report["poisson"] = poisson_cells(load_selections(runs_dir), min_samples=MIN_FIT_SAMPLES)
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


# ---------------------------------------------------------------- plot data


def _curve_rows(curves: dict, start: int = 0) -> list:
    rows = []
    for policy, c in curves.items():
        mean = c.mean(axis=0)
        std = c.std(axis=0, ddof=1) if c.shape[0] > 1 else np.zeros(c.shape[1])
        for t in range(start, c.shape[1]):
            rows.append([policy, t + 1, f"{mean[t]:.6f}", f"{std[t]:.6f}"])
    return rows


def export_plot_data(curves: dict, out_dir, fmt: str = "csv", tail: int = 50) -> list:
    """Write ``curves.csv``, ``curves_tail50.csv`` and, for ``fmt="svg"``, SVG charts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["policy", "round", "mean_cum_reward", "std_cum_reward"]
    T = next(iter(curves.values())).shape[1]
    start = max(T - tail, 0)
    written = []
    for name, first in (("curves.csv", 0), (f"curves_tail{tail}.csv", start)):
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(_curve_rows(curves, first))
        written.append(out / name)
    if fmt == "svg":
        for name, first in (("curves.svg", 0), (f"curves_tail{tail}.svg", start)):
            (out / name).write_text(svg_chart(curves, first), encoding="utf-8")
            written.append(out / name)
    elif fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    return written


PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def svg_chart(curves: dict, start: int = 0, width: int = 720, height: int = 420) -> str:
    """Mean cumulative reward per policy with a +-1 std band."""
    pad = 50
    stats_ = {}
    for p, c in curves.items():
        mean = c.mean(axis=0)[start:]
        std = (c.std(axis=0, ddof=1) if c.shape[0] > 1 else np.zeros(c.shape[1]))[start:]
        stats_[p] = (mean, std)
    lo = min(float((m - s).min()) for m, s in stats_.values())
    hi = max(float((m + s).max()) for m, s in stats_.values())
    hi = hi if hi > lo else lo + 1.0
    n = len(next(iter(stats_.values()))[0])
    rounds = np.arange(start + 1, start + n + 1)

    def xy(t, v):
        x = pad + (t - rounds[0]) / max(rounds[-1] - rounds[0], 1) * (width - 2 * pad)
        y = height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)
        return f"{x:.1f},{y:.1f}"

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">round</text>',
             f'<text x="{pad}" y="{pad - 10}" font-size="12">cumulative reward [{lo:.0f}, {hi:.0f}]</text>']
    for i, (p, (mean, std)) in enumerate(stats_.items()):
        color = PALETTE[i % len(PALETTE)]
        upper = [xy(t, v) for t, v in zip(rounds, mean + std)]
        lower = [xy(t, v) for t, v in zip(rounds[::-1], (mean - std)[::-1])]
        parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        parts.append(f'<polyline points="{" ".join(xy(t, v) for t, v in zip(rounds, mean))}" '
                     f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - pad + 5}" y="{pad + 15 * i}" font-size="11" fill="{color}">{escape(p)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
