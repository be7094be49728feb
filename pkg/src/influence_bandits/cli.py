"""Command line entry point: ``run``, ``generate-log``, ``analyze``, ``plot-data``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from influence_bandits.analysis import analyze, export_plot_data, load_runs
from influence_bandits.environments import WorldParams, generate_ba, synthesize_log, write_log
from influence_bandits.harness import CampaignConfig, run_campaign, write_results
from influence_bandits.linalg import ConfigError

log = logging.getLogger("influence_bandits")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="influence-bandits", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a campaign from a JSON config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--seed", type=int, help="override the config's master seed")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--trace", action="store_true", help="write per-round policy snapshots")
    run.add_argument("--dump-ledger", action="store_true", help="write final activation ledgers")

    gen = sub.add_parser("generate-log", help="simulate a replay log from a synthetic world")
    gen.add_argument("--config", type=Path, help="campaign config whose synthetic environment to use")
    gen.add_argument("--out", required=True, type=Path, help="directory for log.jsonl and contexts.jsonl")
    gen.add_argument("--contexts", type=int, default=20, help="number of distinct contexts")
    gen.add_argument("--records", type=int, default=2000, help="number of logged cascades")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--L", type=int, default=1)

    ana = sub.add_parser("analyze", help="summarize a results directory")
    ana.add_argument("--runs", required=True, type=Path)
    ana.add_argument("--out", required=True, type=Path)

    plot = sub.add_parser("plot-data", help="export cumulative-reward curves")
    plot.add_argument("--runs", required=True, type=Path)
    plot.add_argument("--out", required=True, type=Path)
    plot.add_argument("--format", choices=["csv", "svg"], default="csv")
    return p


def _cmd_run(args) -> int:
    cfg = CampaignConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    result = run_campaign(cfg, workers=max(args.workers, 1), trace=args.trace, dump_ledger=args.dump_ledger)
    write_results(result, args.out, trace=args.trace, dump_ledger=args.dump_ledger)
    for policy, mean in result.final_means().items():
        print(f"{policy:16s} final mean cumulative reward {mean:10.2f}")
    return 0


def _cmd_generate_log(args) -> int:
    if args.config is not None:
        cfg = CampaignConfig.load(args.config)
        if cfg.environment.get("type", "synthetic") != "synthetic":
            raise ConfigError("generate-log needs a synthetic environment")
        params = cfg.world_params()
    else:
        params = WorldParams()
    world = generate_ba(params.n, params.m, params.K, params.d, args.seed, params)
    rlog = synthesize_log(world, args.contexts, args.records, args.seed, args.L)
    args.out.mkdir(parents=True, exist_ok=True)
    write_log(rlog, args.out / "log.jsonl", args.out / "contexts.jsonl")
    print(f"wrote {sum(len(v) for v in rlog.records.values())} records over {len(rlog.contexts)} contexts to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    report = analyze(args.runs, args.out)
    print(json.dumps(report["summary"], indent=2, sort_keys=True))
    return 0


def _cmd_plot_data(args) -> int:
    for path in export_plot_data(load_runs(args.runs), args.out, args.format):
        print(path)
    return 0


COMMANDS = {"run": _cmd_run, "generate-log": _cmd_generate_log, "analyze": _cmd_analyze,
            "plot-data": _cmd_plot_data}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
