import json

import numpy as np
import pytest

from influence_bandits.cli import main
from influence_bandits.environments import WorldParams, generate_ba, synthesize_log, write_log
from influence_bandits.harness import (
    AGG_HEADER, RUN_HEADER, CampaignConfig, aggregate, run_campaign, run_pair, stream_seed, write_results,
)
from influence_bandits.linalg import ConfigError

SMALL_ENV = dict(type="synthetic", n=300, profile_mean=3.0, profile_std=2.0, noise_sigma=2.0,
                 normal_mean=0.1, viral_mean=0.3, context_sigma=0.05)


def small_cfg(**kw):
    base = dict(environment=dict(SMALL_ENV), policies=["random", "ucb1", "glm-gt-ucb"],
                T=20, R=2, L=2, K=5, d=3, seed=3)
    base.update(kw)
    return CampaignConfig(**base)


# ---------------------------------------------------------------- config


@pytest.mark.parametrize("bad", [dict(T=3), dict(R=0), dict(L=6), dict(d=0), dict(policies=[]),
                                 dict(policies=["ucb1", "ucb1"]), dict(environment={"type": "graph"}),
                                 dict(environment={"type": "synthetic", "nodes": 5}),
                                 dict(environment={"type": "replay", "log": "x"})])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        small_cfg(**bad)


def test_from_dict_rejects_unknown_and_missing():
    raw = dict(environment={}, policies=["random"], T=10, R=1, L=1, K=2, d=2)
    assert CampaignConfig.from_dict(raw).T == 10
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict(dict(raw, horizon=3))
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict({k: v for k, v in raw.items() if k != "K"})


def test_boost_applies_to_policy_config():
    cfg = small_cfg(boost_enabled=True)
    assert cfg.policy_config({"name": "glm-gt-ucb"}).boost == pytest.approx(5.0)
    assert small_cfg().policy_config({"name": "glm-gt-ucb"}).boost == 0.0


def test_labels_allow_variants():
    cfg = small_cfg(policies=["ucb1", {"name": "ucb1", "label": "ucb1-b"}])
    assert cfg.labels == ["ucb1", "ucb1-b"]


# --------------------------------------------------------------- seeding


def test_stream_seed_is_order_sensitive_and_stable():
    a = stream_seed(7, "ucb1", 0, "env").generate_state(2)
    assert np.array_equal(a, stream_seed(7, "ucb1", 0, "env").generate_state(2))
    assert not np.array_equal(a, stream_seed(7, "ucb1", 1, "env").generate_state(2))
    assert not np.array_equal(a, stream_seed(8, "ucb1", 0, "env").generate_state(2))


# ------------------------------------------------------------------ runs


def test_init_phase_is_round_robin():
    cfg = small_cfg(policies=["glm-gt-ucb"], T=5, R=1, L=1)
    res = run_pair(cfg, "glm-gt-ucb", 0)
    assert [k for (_, k, _, _) in res.selections] == [0, 1, 2, 3, 4]


def test_ledger_identity_and_monotone_curves():
    result = run_campaign(small_cfg())
    for res in result.runs.values():
        assert sum(res.rewards) == res.distinct[-1] == res.cumulative[-1] <= res.universe
        assert all(b >= a for a, b in zip(res.cumulative, res.cumulative[1:]))


def test_policy_isolation():
    one = run_campaign(small_cfg(policies=["ucb1"]))
    two = run_campaign(small_cfg(policies=["random", "ucb1"]))
    for r in range(2):
        assert one.runs[("ucb1", r)].rewards == two.runs[("ucb1", r)].rewards


def test_policies_share_context_sequence():
    result = run_campaign(small_cfg(policies=["random", "ucb1"], R=1))
    reg = {p: [s[3] for s in result.runs[(p, 0)].selections[::2]] for p in ("random", "ucb1")}
    normal = {p: [r == "normal" for r in v] for p, v in reg.items()}
    assert normal["random"] == normal["ucb1"]


def test_aggregate_feedback_split():
    cfg = small_cfg(environment=dict(SMALL_ENV, aggregate_feedback=True), R=1)
    for res in run_campaign(cfg).runs.values():
        assert sum(res.rewards) == res.distinct[-1]


def test_oracle_runs():
    res = run_pair(small_cfg(policies=["oracle"]), "oracle", 0)
    assert len(res.rewards) == 20


def test_aggregate_examples():
    mean, std = aggregate([[3.0], [5.0]])
    assert mean[0] == 4.0 and std[0] == pytest.approx(np.sqrt(2))
    mean, std = aggregate([[1.0, 2.0, 3.0]])
    assert std.tolist() == [0, 0, 0] and mean.tolist() == [1, 2, 3]
    mean, _ = aggregate([[2.0, 2.0]] * 4)
    assert mean.tolist() == [2.0, 2.0]


# ---------------------------------------------------------------- output


def test_outputs_are_deterministic(tmp_path):
    cfg = small_cfg()
    write_results(run_campaign(cfg), tmp_path / "a", trace=True, dump_ledger=True)
    write_results(run_campaign(cfg), tmp_path / "b", trace=True, dump_ledger=True)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "aggregate.csv" in names and "run_000.csv" in names and "ledger_ucb1_001.json" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    text = (tmp_path / "a" / "run_000.csv").read_text()
    assert text.splitlines()[0] == ",".join(RUN_HEADER) and "\r" not in text
    assert (tmp_path / "a" / "aggregate.csv").read_text().splitlines()[0] == ",".join(AGG_HEADER)


def test_parallel_equals_serial(tmp_path):
    cfg = small_cfg(R=2)
    write_results(run_campaign(cfg, workers=1), tmp_path / "s")
    write_results(run_campaign(cfg, workers=3), tmp_path / "p")
    for p in (tmp_path / "s").iterdir():
        assert p.read_bytes() == (tmp_path / "p" / p.name).read_bytes()


def test_replay_campaign(tmp_path):
    w = generate_ba(300, 1, 4, 3, seed=1, params=WorldParams(profile_mean=3.0, noise_sigma=2.0))
    write_log(synthesize_log(w, 4, 200, seed=2), tmp_path / "log.jsonl", tmp_path / "ctx.jsonl")
    cfg = CampaignConfig(environment={"type": "replay", "log": "log.jsonl", "contexts": "ctx.jsonl"},
                         policies=["random", "lognorm-linucb", "glm-gt-ucb", "oracle"], T=12, R=1,
                         L=1, K=4, d=3, boost_enabled=True, base_dir=str(tmp_path))
    for res in run_campaign(cfg).runs.values():
        assert sum(res.rewards) == res.distinct[-1] <= res.universe


# ------------------------------------------------------------------- CLI


def write_cfg(path, **kw):
    raw = dict(environment=dict(SMALL_ENV), policies=["random", "ucb1"], T=12, R=2, L=2, K=5, d=3, seed=1)
    raw.update(kw)
    path.write_text(json.dumps(raw))
    return path


def test_cli_run_writes_csvs(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r1"), "--seed", "7"]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r2"), "--seed", "7"]) == 0
    for name in ("run_000.csv", "run_001.csv", "aggregate.csv", "selections.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    assert "final mean cumulative reward" in capsys.readouterr().out


def test_cli_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_cli_bad_config(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", L=9)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path / "o")]) == 2


def test_cli_bad_flags():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 2


def test_cli_generate_analyze_plot(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    assert main(["generate-log", "--config", str(cfg), "--out", str(tmp_path / "log"),
                 "--contexts", "3", "--records", "30"]) == 0
    assert (tmp_path / "log" / "log.jsonl").exists() and (tmp_path / "log" / "contexts.jsonl").exists()
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "res")]) == 0
    assert main(["analyze", "--runs", str(tmp_path / "res"), "--out", str(tmp_path / "ana")]) == 0
    assert json.loads((tmp_path / "ana" / "summary.json").read_text())
    assert main(["plot-data", "--runs", str(tmp_path / "res"), "--out", str(tmp_path / "plot"),
                 "--format", "svg"]) == 0
    assert (tmp_path / "plot" / "curves.csv").exists()
