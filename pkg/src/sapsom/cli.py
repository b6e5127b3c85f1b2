"""Command line entry point: ``sapsom <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import experiments
from .agent import train
from .cartpole import CartPole, write_trace_csv
from .config import ConfigError, RunConfig, load_config
from .persistence import ArtifactError, ModelArtifact, load_model, save_model

log = logging.getLogger("sapsom")


def _run_config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _load(args) -> tuple[ModelArtifact, RunConfig]:
    artifact = load_model(args.model)
    return artifact, _run_config(args)


def _seed(args, cfg: RunConfig) -> int:
    return args.seed if args.seed is not None else cfg.eval_seed


def _emit(report: experiments.ExperimentReport, out) -> None:
    paths = report.write(out)
    for key, value in report.totals.items():
        print(f"{report.experiment}.{key} = {value}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")


def cmd_train(args) -> None:
    cfg = _run_config(args)
    training = cfg.training if args.seed is None else replace(cfg.training, seed=args.seed)
    out = Path(args.out or "model.sapsom")
    metrics: list = []
    agent = train(CartPole(cfg.env), training, pretrain_only=args.pretrain_only, metrics=metrics)
    save_model(ModelArtifact.from_agent(agent, cfg.env), out)
    metrics_path = Path(args.metrics) if args.metrics else out.with_name(out.name + ".metrics.csv")
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "episode", "steps", "mean_quantization_error", "mean_prediction_residual"])
        for m in metrics:
            row = asdict(m)
            writer.writerow([row["phase"], row["episode"], row["steps"],
                             repr(row["mean_quantization_error"]), repr(row["mean_prediction_residual"])])
    print(f"wrote {out} and {metrics_path}")


def cmd_phase_portrait(args) -> None:
    art, cfg = _load(args)
    _emit(experiments.phase_portrait(art.som, art.model, art.env, episodes=args.episodes, seed=_seed(args, cfg)), args.out)


def cmd_predict_rmse(args) -> None:
    art, cfg = _load(args)
    report = experiments.prediction_rmse(art.som, art.model, art.env, n_sequences=args.sequences,
                                         horizon=args.horizon, seed=_seed(args, cfg))
    for row in report.summary:
        print(f"t={row['t']} rmse={row['rmse']:.4f}")
    _emit(report, args.out)


def cmd_balance(args) -> None:
    art, cfg = _load(args)
    _emit(experiments.balance(art.som, art.model, art.env, episodes=args.episodes, seed=_seed(args, cfg),
                              plan=cfg.plan, jobs=args.jobs), args.out)


def cmd_tilt_sweep(args) -> None:
    art, cfg = _load(args)
    _emit(experiments.tilt_sweep(art.som, art.model, art.env, runs=args.runs, seed=_seed(args, cfg),
                                 plan=cfg.plan, jobs=args.jobs), args.out)


def cmd_tilted_balance(args) -> None:
    art, cfg = _load(args)
    _emit(experiments.tilted_balance_sweep(art.som, art.model, art.env, runs=args.runs, seed=_seed(args, cfg),
                                           plan=cfg.plan, jobs=args.jobs), args.out)


def cmd_imitate(args) -> None:
    art, cfg = _load(args)
    if cfg.goal is None:
        raise ConfigError("imitate needs goal_mean/goal_precision or goal_demo in --config")
    episodes = args.episodes or cfg.episodes or 1
    report, traces = experiments.imitate(art.som, art.model, art.env, cfg.goal, episodes=episodes,
                                         seed=_seed(args, cfg), plan=cfg.plan)
    _emit(report, args.out)
    for i, trace in enumerate(traces):
        write_trace_csv(Path(args.out) / f"imitate_trace_{i:03d}.csv", trace.states, trace.actions,
                        done=trace.done_reason.value != "none")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sapsom", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, model=True):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat YAML config file")
        p.add_argument("--seed", type=int, help="overrides the seed from the config")
        if model:
            p.add_argument("--model", required=True, help="model artifact path")
            p.add_argument("--out", default=".", help="output directory for CSV reports")
        p.set_defaults(func=fn)
        return p

    p = add("train", cmd_train, model=False)
    p.add_argument("--out", help="artifact path (default model.sapsom)")
    p.add_argument("--metrics", help="per-episode metrics CSV (default <out>.metrics.csv)")
    p.add_argument("--pretrain-only", action="store_true")

    add("phase-portrait", cmd_phase_portrait).add_argument("--episodes", type=int, default=5)
    p = add("predict-rmse", cmd_predict_rmse)
    p.add_argument("--sequences", type=int, default=100)
    p.add_argument("--horizon", type=int, default=7)
    p = add("balance", cmd_balance)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    for name, fn in (("tilt-sweep", cmd_tilt_sweep), ("tilted-balance", cmd_tilted_balance)):
        p = add(name, fn)
        p.add_argument("--runs", type=int, default=20)
        p.add_argument("--jobs", type=int, default=1)
    add("imitate", cmd_imitate).add_argument("--episodes", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, ArtifactError, OSError) as exc:
        print(f"sapsom: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
