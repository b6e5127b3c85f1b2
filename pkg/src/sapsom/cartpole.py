"""Cart-pole physics and the minimal environment contract the agent trains against."""
from __future__ import annotations

import abc
import csv
import enum
import math
from dataclasses import dataclass, fields

import numpy as np

from .som import InputError

LEFT, RIGHT = 0, 1


class DoneReason(str, enum.Enum):
    NONE = "none"
    ANGLE = "angle"
    POSITION = "position"
    STEP_CAP = "step_cap"


@dataclass(frozen=True)
class StepResult:
    next_state: np.ndarray
    done: bool
    done_reason: DoneReason


class Environment(abc.ABC):
    """Discrete-action environment: anything with these four members is trainable."""

    @property
    @abc.abstractmethod
    def action_count(self) -> int: ...

    @abc.abstractmethod
    def reset(self, rng: np.random.Generator) -> np.ndarray: ...

    @abc.abstractmethod
    def step(self, action: int) -> StepResult: ...

    @abc.abstractmethod
    def observe(self) -> np.ndarray: ...


@dataclass(frozen=True)
class EnvParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5
    force_mag: float = 10.0
    dt: float = 0.02
    theta_limit: float = 12 * math.pi / 180  # pole angle at which the episode ends
    x_limit: float = 2.4
    max_steps: int = 200
    reset_range: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "reset_range":
                if value < 0:
                    raise ValueError("reset_range must be non-negative")
            elif not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value}")
        if self.theta_limit >= math.pi / 2:
            raise ValueError("theta_limit must be below pi/2")


def dynamics(state, action: int, params: EnvParams) -> np.ndarray:
    """One explicit-Euler step of the frictionless cart-pole."""
    x, x_dot, theta, theta_dot = (float(v) for v in state)
    force = params.force_mag if action == RIGHT else -params.force_mag
    total_mass = params.cart_mass + params.pole_mass
    ml = params.pole_mass * params.pole_half_length
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    temp = (force + ml * theta_dot ** 2 * sin_t) / total_mass
    theta_acc = (params.gravity * sin_t - cos_t * temp) / (
        params.pole_half_length * (4.0 / 3.0 - params.pole_mass * cos_t ** 2 / total_mass)
    )
    x_acc = temp - ml * theta_acc * cos_t / total_mass

    return np.array([
        x + params.dt * x_dot,
        x_dot + params.dt * x_acc,
        theta + params.dt * theta_dot,
        theta_dot + params.dt * theta_acc,
    ])


class CartPole(Environment):
    def __init__(self, params: EnvParams | None = None):
        self.params = params or EnvParams()
        self._state = np.zeros(4)
        self.steps = 0

    @property
    def action_count(self) -> int:
        return 2

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        r = self.params.reset_range
        self._state = rng.uniform(-r, r, size=4) if r > 0 else np.zeros(4)
        self.steps = 0
        return self._state.copy()

    def observe(self) -> np.ndarray:
        return self._state.copy()

    def set_state(self, state) -> None:
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (4,) or not np.all(np.isfinite(state)):
            raise InputError(f"invalid cart-pole state {state}")
        self._state = state.copy()

    def step(self, action: int) -> StepResult:
        if action not in (LEFT, RIGHT):
            raise InputError(f"action must be 0 or 1, got {action}")
        if not np.all(np.isfinite(self._state)):
            raise InputError(f"non-finite state {self._state}")
        self._state = dynamics(self._state, action, self.params)
        self.steps += 1
        reason = self.done_reason(self._state, self.steps)
        return StepResult(self._state.copy(), reason is not DoneReason.NONE, reason)

    def done_reason(self, state, steps: int) -> DoneReason:
        p = self.params
        if abs(state[2]) > p.theta_limit:
            return DoneReason.ANGLE
        if abs(state[0]) > p.x_limit:
            return DoneReason.POSITION
        if steps >= p.max_steps:
            return DoneReason.STEP_CAP
        return DoneReason.NONE


TRACE_COLUMNS = ("t", "x", "x_dot", "theta", "theta_dot", "action", "done")


def write_trace_csv(path, states, actions, done: bool = False) -> None:
    """Episode trace; row t holds the state observed at t and the action taken from it.

    The last row is the state after the final action: its action cell is empty
    and its done cell carries ``done``.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        last = len(states) - 1
        for t, state in enumerate(states):
            action = actions[t] if t < len(actions) else ""
            writer.writerow([t, *(repr(float(v)) for v in state), action, int(done and t == last)])


def read_trace_states(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputError(f"trace {path} has no rows")
    return np.array([[float(r[k]) for k in ("x", "x_dot", "theta", "theta_dot")] for r in rows])
