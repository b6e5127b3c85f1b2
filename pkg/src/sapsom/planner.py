"""Goals from demonstrations, virtual rollouts and greedy forward search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .cartpole import DoneReason, Environment
from .som import InputError, SomMap, decode, find_winner
from .transition import TransitionModel

MAX_SEQUENCES = 10 ** 6


class PlanConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Goal:
    u_goal: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u_goal, dtype=np.float64)
        pi = np.asarray(self.precision, dtype=np.float64)
        if u.shape != pi.shape:
            raise InputError("goal mean and precision must have the same shape")
        if np.any(pi < 0) or np.any(pi > 1) or not np.any(pi > 0):
            raise InputError(f"precisions must lie in [0, 1] with at least one positive, got {pi}")
        object.__setattr__(self, "u_goal", u)
        object.__setattr__(self, "precision", pi)

    @classmethod
    def balancing(cls) -> "Goal":
        return cls(np.zeros(4), np.array([0.0, 0.0, 1.0, 1.0]))

    @classmethod
    def controlled_tilt(cls, theta_dot: float, theta: float = 0.2) -> "Goal":
        return cls(np.array([0.0, 0.0, theta, theta_dot]), np.array([0.0, 0.0, 1.0, 1.0]))

    @classmethod
    def tilted_balance(cls, theta: float) -> "Goal":
        return cls(np.array([0.0, 0.0, theta, 0.0]), np.array([0.0, 0.0, 1.0, 1.0]))


def goal_from_demo(states, precision_floor: float = 0.01) -> Goal:
    """Mean state and capped inverse variance of a single demonstration.

    Zero-variance components get the cap (1); precisions below the floor are dropped.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if states.shape[0] == 0:
        raise InputError("demonstration needs at least one state")
    mean = states.mean(axis=0)
    var = states.var(axis=0)
    with np.errstate(divide="ignore"):
        precision = np.where(var > 0, 1.0 / np.where(var > 0, var, 1.0), np.inf)
    precision = np.minimum(precision, 1.0)
    precision[precision < precision_floor] = 0.0
    return Goal(mean, precision)


def distance(u, goal: Goal) -> float:
    diff = np.asarray(u, dtype=np.float64) - goal.u_goal
    return float(np.sum(goal.precision * diff * diff))


def rollout(u0, actions, som: SomMap, model: TransitionModel) -> list[np.ndarray]:
    """Open-loop prediction of the states visited under ``actions`` (no environment)."""
    predicted = []
    u = np.asarray(u0, dtype=np.float64)
    for a in actions:
        s = model.predict_mode(a, find_winner(u, som))
        u = decode(s, som)
        predicted.append(u)
    return predicted


def _successor_table(som: SomMap, model: TransitionModel) -> np.ndarray:
    """succ[a, s]: winner for the decoded mode successor of unit s under action a.

    Re-winning the decoded codebook only differs from the mode itself when two
    units share an identical codebook; it keeps table walks equal to ``rollout``.
    """
    n = som.n_units
    canonical = np.array([find_winner(som.codebook[s], som) for s in range(n)])
    succ = np.empty((model.n_actions, n), dtype=np.int64)
    for a in range(model.n_actions):
        for s in range(n):
            succ[a, s] = canonical[model.predict_mode(a, s)]
    return succ


@dataclass(frozen=True)
class PlanConfig:
    tau: int = 1
    replan_every_step: bool = True

    def __post_init__(self):
        if self.tau < 1:
            raise PlanConfigError(f"tau must be >= 1, got {self.tau}")


class Planner:
    """Greedy forward search over all K**tau action sequences.

    Once the start state is mapped to its winner, every rollout is a walk on
    the successor table, so sequences are scored from that table.
    """

    def __init__(self, som: SomMap, model: TransitionModel, config: PlanConfig | None = None):
        self.som = som
        self.model = model
        self.config = config or PlanConfig()
        n_seq = model.n_actions ** self.config.tau
        if n_seq > MAX_SEQUENCES:
            raise PlanConfigError(f"{model.n_actions}^{self.config.tau} sequences exceed the limit of {MAX_SEQUENCES}")
        self._succ = _successor_table(som, model)
        # itertools.product yields sequences in lexicographic order
        self._sequences = np.array(list(itertools.product(range(model.n_actions), repeat=self.config.tau)))

    def scores(self, u0, goal: Goal) -> np.ndarray:
        """Distance of each sequence's final predicted state to the goal."""
        s = np.full(len(self._sequences), find_winner(u0, self.som))
        for step in range(self.config.tau):
            s = self._succ[self._sequences[:, step], s]
        final = self.som.codebook[s]
        diff = final - goal.u_goal
        return np.sum(goal.precision * diff * diff, axis=1)

    def best_sequence(self, u0, goal: Goal) -> tuple[int, ...]:
        # argmin takes the first minimum, which is the lexicographically smallest sequence
        return tuple(int(a) for a in self._sequences[int(np.argmin(self.scores(u0, goal)))])

    def plan(self, u0, goal: Goal) -> int:
        return self.best_sequence(u0, goal)[0]


def plan(u0, goal: Goal, tau: int, som: SomMap, model: TransitionModel) -> int:
    return Planner(som, model, PlanConfig(tau=tau)).plan(u0, goal)


@dataclass
class EpisodeTrace:
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    done_reason: DoneReason = DoneReason.NONE

    @property
    def steps(self) -> int:
        return len(self.actions)

    def state_array(self) -> np.ndarray:
        return np.array(self.states)


def run_task(env: Environment, goal: Goal, planner: Planner, rng: np.random.Generator,
             max_steps: int | None = None, start_state=None) -> EpisodeTrace:
    """Closed-loop control: observe, plan, execute the first planned action, repeat.

    Without replanning, a full tau-step plan is executed before planning again.
    """
    u = env.reset(rng)
    if start_state is not None:
        env.set_state(start_state)
        u = env.observe()
    trace = EpisodeTrace(states=[u], distances=[distance(u, goal)])
    queue: list[int] = []
    while max_steps is None or trace.steps < max_steps:
        if not queue:
            seq = planner.best_sequence(u, goal)
            queue = [seq[0]] if planner.config.replan_every_step else list(seq)
        a = queue.pop(0)
        result = env.step(a)
        u = result.next_state
        trace.actions.append(a)
        trace.states.append(u)
        trace.distances.append(distance(u, goal))
        if result.done:
            trace.done_reason = result.done_reason
            break
    return trace
