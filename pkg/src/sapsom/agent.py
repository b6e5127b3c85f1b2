"""Training: SOM pretraining, then joint map and transition learning under random actions."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cartpole import Environment
from .som import (
    SIGMA_FLOOR,
    MapGeometry,
    SomMap,
    activate,
    find_winner,
    neighborhood,
    quantization_error,
    som_update,
)
from .transition import TransitionModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecaySchedule:
    """Exponential interpolation from ``start`` (episode 0) to ``end`` (last episode)."""
    start: float
    end: float
    total_episodes: int

    def __post_init__(self):
        if not (self.start > 0 and self.end > 0):
            raise ValueError("schedule endpoints must be positive")

    def value(self, episode: int) -> float:
        if self.total_episodes <= 1 or episode <= 0:
            return self.start
        if episode >= self.total_episodes - 1:
            return self.end
        return self.start * (self.end / self.start) ** (episode / (self.total_episodes - 1))


@dataclass(frozen=True)
class TrainingConfig:
    rows: int = 16
    cols: int = 16
    pretrain_episodes: int = 1000
    joint_episodes: int = 3000
    pretrain_sigma_start: float = 8.0
    pretrain_sigma_end: float = 0.3
    pretrain_eta_start: float = 0.1
    pretrain_eta_end: float = 0.01
    sigma0: float = 4.0
    eta0: float = 0.05
    gamma: float = 0.05
    sigma_floor: float = SIGMA_FLOOR
    init_scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("eta0", "gamma", "pretrain_eta_start", "pretrain_eta_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.pretrain_episodes < 0 or self.joint_episodes < 0:
            raise ValueError("episode counts must be non-negative")

    @property
    def geometry(self) -> MapGeometry:
        return MapGeometry(self.rows, self.cols)

    def sigma_schedule(self) -> DecaySchedule:
        return DecaySchedule(self.pretrain_sigma_start, self.pretrain_sigma_end, self.pretrain_episodes)

    def eta_schedule(self) -> DecaySchedule:
        return DecaySchedule(self.pretrain_eta_start, self.pretrain_eta_end, self.pretrain_episodes)


@dataclass
class EpisodeMetrics:
    phase: str
    episode: int
    steps: int
    mean_quantization_error: float
    mean_prediction_residual: float


Hook = Callable[..., None]


def pretrain(som: SomMap, env: Environment, config: TrainingConfig, rng: np.random.Generator,
             metrics: list | None = None) -> SomMap:
    """Standard Kohonen training with decaying width and rate, random actions, no prediction."""
    sigma_s, eta_s = config.sigma_schedule(), config.eta_schedule()
    coords = som.geometry.coords()
    for episode in range(config.pretrain_episodes):
        sigma, eta = sigma_s.value(episode), eta_s.value(episode)
        u = env.reset(rng)
        qerrs = []
        while True:
            winner = find_winner(u, som)
            qerrs.append(float(np.linalg.norm(u - som.codebook[winner])))
            som_update(som, u, eta, neighborhood(winner, sigma, som.geometry, coords))
            result = env.step(int(rng.integers(env.action_count)))
            u = result.next_state
            if result.done:
                break
        if metrics is not None:
            metrics.append(EpisodeMetrics("pretrain", episode, len(qerrs), float(np.mean(qerrs)), float("nan")))
    return som


@dataclass
class Agent:
    """Shared state map plus one transition matrix per action."""
    som: SomMap
    model: TransitionModel
    config: TrainingConfig = field(default_factory=TrainingConfig)
    eta0: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        self.eta0 = self.config.eta0
        self.gamma = self.config.gamma

    @classmethod
    def fresh(cls, config: TrainingConfig, dim: int, n_actions: int,
              rng: np.random.Generator) -> "Agent":
        som = SomMap.random(config.geometry, dim, rng, scale=config.init_scale)
        return cls(som, TransitionModel.zeros(n_actions, som.n_units), config)

    @property
    def frozen(self) -> bool:
        return self.eta0 == 0.0 and self.gamma == 0.0

    def freeze(self) -> "Agent":
        self.eta0 = 0.0
        self.gamma = 0.0
        return self

    def unfreeze(self) -> "Agent":
        self.eta0 = self.config.eta0
        self.gamma = self.config.gamma
        return self

    def density(self, u, sigma0: float | None = None) -> np.ndarray:
        """Recognition density for ``u``; width base defaults to a quarter of the map diameter."""
        if sigma0 is None:
            sigma0 = 0.25 * self.som.geometry.diameter
        return activate(u, self.som, sigma0, self.config.sigma_floor).density

    def explore_and_learn(self, env: Environment, rng: np.random.Generator, episodes: int | None = None,
                          metrics: list | None = None, hook: Hook | None = None) -> "Agent":
        """Joint learning under uniformly random actions.

        Per step: SOM update on u_t, act, observe u_{t+1}, then update T_a with
        the densities before and after.  ``hook(event, step=...)`` fires on
        ``"som_update"`` and ``"transition_update"``.
        """
        cfg = self.config
        if episodes is None:
            episodes = cfg.joint_episodes
        for episode in range(episodes):
            u = env.reset(rng)
            qerrs, residuals = [], []
            step = 0
            while True:
                act = activate(u, self.som, cfg.sigma0, cfg.sigma_floor)
                som_update(self.som, u, self.eta0, act.h)
                p_t = act.density
                if hook:
                    hook("som_update", step=step)
                a = int(rng.integers(env.action_count))
                result = env.step(a)
                u = result.next_state
                p_next = activate(u, self.som, cfg.sigma0, cfg.sigma_floor).density
                residuals.append(self.model.learn(a, p_t, p_next, self.gamma))
                if hook:
                    hook("transition_update", step=step, action=a)
                qerrs.append(act.quantization_error)
                step += 1
                if result.done:
                    break
            if metrics is not None:
                metrics.append(EpisodeMetrics("joint", episode, step, float(np.mean(qerrs)), float(np.mean(residuals))))
            if episode % 500 == 0:
                log.debug("joint episode %d: %d steps", episode, step)
        return self


def train(env: Environment, config: TrainingConfig, pretrain_only: bool = False,
          metrics: list | None = None) -> Agent:
    """Full schedule from a seeded fresh agent."""
    rng = np.random.default_rng(config.seed)
    agent = Agent.fresh(config, dim=len(env.observe()), n_actions=env.action_count, rng=rng)
    log.info("pretraining %d episodes", config.pretrain_episodes)
    pretrain(agent.som, env, config, rng, metrics)
    if not pretrain_only:
        log.info("joint training %d episodes", config.joint_episodes)
        agent.explore_and_learn(env, rng, metrics=metrics)
    return agent


def mean_quantization_error(som: SomMap, states) -> float:
    return float(np.mean([quantization_error(u, som) for u in states]))
