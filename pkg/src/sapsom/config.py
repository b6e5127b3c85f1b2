"""Flat YAML run configuration.

Every key is top-level.  Keys named after a ``TrainingConfig`` or ``EnvParams``
field set that field; the rest are planning, goal and evaluation options::

    seed: 1
    joint_episodes: 3000
    theta_limit_deg: 12
    tau: 1
    goal_mean: [0, 0, 0, 0]
    goal_precision: [0, 0, 1, 1]
    # or: goal_demo: demo.csv
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .agent import TrainingConfig
from .cartpole import EnvParams, read_trace_states
from .planner import Goal, PlanConfig, goal_from_demo


class ConfigError(ValueError):
    pass


_TRAIN_KEYS = {f.name for f in fields(TrainingConfig)}
_ENV_KEYS = {f.name for f in fields(EnvParams)}
_PLAN_KEYS = {"tau", "replan_every_step"}
_OTHER_KEYS = {"goal_mean", "goal_precision", "goal_demo", "precision_floor", "eval_seed", "episodes", "theta_limit_deg"}


@dataclass
class RunConfig:
    training: TrainingConfig = field(default_factory=TrainingConfig)
    env: EnvParams = field(default_factory=EnvParams)
    plan: PlanConfig = field(default_factory=PlanConfig)
    goal: Goal | None = None
    eval_seed: int = 0
    episodes: int | None = None


def parse_config(raw: dict | None, base_dir: Path | None = None) -> RunConfig:
    raw = dict(raw or {})
    unknown = set(raw) - _TRAIN_KEYS - _ENV_KEYS - _PLAN_KEYS - _OTHER_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "theta_limit_deg" in raw:
        if "theta_limit" in raw:
            raise ConfigError("give theta_limit or theta_limit_deg, not both")
        raw["theta_limit"] = math.radians(raw.pop("theta_limit_deg"))
    try:
        training = TrainingConfig(**{k: v for k, v in raw.items() if k in _TRAIN_KEYS})
        env = EnvParams(**{k: v for k, v in raw.items() if k in _ENV_KEYS})
        plan = PlanConfig(**{k: v for k, v in raw.items() if k in _PLAN_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    goal = None
    if "goal_demo" in raw:
        if "goal_mean" in raw or "goal_precision" in raw:
            raise ConfigError("goal_demo excludes goal_mean/goal_precision")
        demo = Path(raw["goal_demo"])
        if base_dir is not None and not demo.is_absolute():
            demo = base_dir / demo
        goal = goal_from_demo(read_trace_states(demo), raw.get("precision_floor", 0.01))
    elif "goal_mean" in raw or "goal_precision" in raw:
        if not ("goal_mean" in raw and "goal_precision" in raw):
            raise ConfigError("goal_mean and goal_precision must be given together")
        try:
            goal = Goal(np.array(raw["goal_mean"], dtype=float), np.array(raw["goal_precision"], dtype=float))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return RunConfig(training, env, plan, goal, int(raw.get("eval_seed", 0)), raw.get("episodes"))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a flat mapping of keys to values")
    return parse_config(raw, path.parent)
