"""Evaluation pipelines on a frozen model, each producing an ``ExperimentReport``.

Every stochastic unit of work (an episode, a goal x repetition cell) draws from
its own generator derived from ``(seed, cell index)``, so results do not depend
on execution order or on the number of worker processes.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cartpole import LEFT, RIGHT, CartPole, DoneReason, EnvParams
from .planner import Goal, PlanConfig, Planner, rollout, run_task
from .som import SomMap, decode, find_winner
from .transition import TransitionModel

log = logging.getLogger(__name__)

TILT_GOALS = tuple(0.25 * i for i in range(21))  # 0 .. 5
TILTED_BALANCE_GOALS = tuple(round(-0.2 + 0.025 * i, 3) for i in range(17))  # -0.2 .. 0.2


def cell_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass
class ExperimentReport:
    experiment: str
    seed: int
    records: list[dict]
    summary: list[dict] = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def write(self, out_dir) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "runs": out_dir / f"{self.experiment}_runs.csv",
            "summary": out_dir / f"{self.experiment}_summary.csv",
            "totals": out_dir / f"{self.experiment}_totals.csv",
        }
        _write_rows(paths["runs"], self.records)
        _write_rows(paths["summary"], self.summary)
        _write_rows(paths["totals"], [{"key": k, "value": v} for k, v in
                                      {"experiment": self.experiment, "seed": self.seed, **self.totals}.items()])
        return paths


def _cell(value):
    return repr(value) if isinstance(value, float) else value


def _write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})


def _mean(values) -> float:
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else float("nan")


def _std(values) -> float:
    values = [v for v in values if not math.isnan(v)]
    return float(np.std(values)) if values else float("nan")


# --- worker plumbing -------------------------------------------------------

_worker: dict = {}


def _init_worker(som: SomMap, model: TransitionModel, env_params: EnvParams, plan: PlanConfig) -> None:
    _worker["planner"] = Planner(som, model, plan)
    _worker["env"] = CartPole(env_params)


def _run_cells(fn, cells: list, som, model, env_params, plan, jobs: int = 1) -> list:
    if jobs <= 1 or len(cells) <= 1:
        _init_worker(som, model, env_params, plan)
        return [fn(cell) for cell in cells]
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(som, model, env_params, plan)) as pool:
        return list(pool.map(fn, cells, chunksize=max(1, len(cells) // (4 * jobs))))


def _warn_if_untrained(model: TransitionModel) -> None:
    if not np.any(model.matrices):
        log.warning("transition matrices are all zero; predictions are uninformative")


# --- phase portrait --------------------------------------------------------

def phase_portrait(som: SomMap, model: TransitionModel, env_params: EnvParams,
                   episodes: int = 5, seed: int = 0) -> ExperimentReport:
    """Real vs predicted one-step motion in the (theta, theta_dot) plane under random actions.

    For each visited state the predicted motion is recorded for the executed
    action and, counterfactually, for each action.
    """
    _warn_if_untrained(model)
    env = CartPole(env_params)
    records = []
    for episode in range(episodes):
        rng = cell_rng(seed, episode)
        u = env.reset(rng)
        t = 0
        while True:
            winner = find_winner(u, som)
            pred = {a: decode(model.predict_mode(a, winner), som) for a in range(model.n_actions)}
            a = int(rng.integers(env.action_count))
            result = env.step(a)
            u_next = result.next_state
            records.append({
                "episode": episode, "t": t, "action": a,
                "theta": float(u[2]), "theta_dot": float(u[3]),
                "d_theta": float(u_next[2] - u[2]), "d_theta_dot": float(u_next[3] - u[3]),
                "pred_d_theta": float(pred[a][2] - u[2]), "pred_d_theta_dot": float(pred[a][3] - u[3]),
                "left_pred_d_theta": float(pred[LEFT][2] - u[2]), "left_pred_d_theta_dot": float(pred[LEFT][3] - u[3]),
                "right_pred_d_theta": float(pred[RIGHT][2] - u[2]), "right_pred_d_theta_dot": float(pred[RIGHT][3] - u[3]),
                "angle_error": float(abs(pred[a][2] - u_next[2])),
            })
            u = u_next
            t += 1
            if result.done:
                break
    return ExperimentReport("phase_portrait", seed, records, totals=summarize_phase_portrait(records))


def summarize_phase_portrait(records: list[dict]) -> dict:
    if not records:
        return {"n_states": 0}
    sign = lambda col: np.sign([r[col] for r in records])
    return {
        "n_states": len(records),
        "sign_agreement_theta_dot": float(np.mean(sign("d_theta_dot") == sign("pred_d_theta_dot"))),
        "left_push_positive_rate": float(np.mean([r["left_pred_d_theta_dot"] > 0 for r in records])),
        "right_push_negative_rate": float(np.mean([r["right_pred_d_theta_dot"] < 0 for r in records])),
        "mean_angle_error": float(np.mean([r["angle_error"] for r in records])),
    }


# --- multi-step prediction -------------------------------------------------

def prediction_rmse(som: SomMap, model: TransitionModel, env_params: EnvParams,
                    n_sequences: int = 100, horizon: int = 7, seed: int = 0) -> ExperimentReport:
    """Angle error of open-loop rollouts against the true trajectory, per horizon step.

    The true trajectory is stepped through the physics for the full horizon even
    if a done condition fires on the way.
    """
    _warn_if_untrained(model)
    env = CartPole(env_params)
    records = []
    if horizon > 0:
        for i in range(n_sequences):
            rng = cell_rng(seed, i)
            u0 = env.reset(rng)
            actions = [int(a) for a in rng.integers(env.action_count, size=horizon)]
            true = [env.step(a).next_state for a in actions]
            pred = rollout(u0, actions, som, model)
            for t, (u_true, u_pred) in enumerate(zip(true, pred), start=1):
                records.append({"sequence": i, "t": t, "action": actions[t - 1],
                                "theta": float(u_true[2]), "theta_pred": float(u_pred[2]),
                                "error": float(u_pred[2] - u_true[2])})
    return ExperimentReport("prediction_rmse", seed, records, summary=summarize_rmse(records))


def summarize_rmse(records: list[dict]) -> list[dict]:
    by_t: dict[int, list[float]] = {}
    for r in records:
        by_t.setdefault(int(r["t"]), []).append(float(r["error"]))
    return [{"t": t, "n": len(e), "rmse": float(np.sqrt(np.mean(np.square(e))))} for t, e in sorted(by_t.items())]


# --- balancing -------------------------------------------------------------

def _balance_cell(cell):
    seed, index = cell
    trace = run_task(_worker["env"], Goal.balancing(), _worker["planner"], cell_rng(seed, index))
    return {"episode": index, "steps": trace.steps, "done_reason": trace.done_reason.value}


def balance(som: SomMap, model: TransitionModel, env_params: EnvParams, episodes: int = 100,
            seed: int = 0, plan: PlanConfig | None = None, jobs: int = 1) -> ExperimentReport:
    _warn_if_untrained(model)
    cells = [(seed, i) for i in range(episodes)]
    records = _run_cells(_balance_cell, cells, som, model, env_params, plan or PlanConfig(), jobs)
    return ExperimentReport("balance", seed, records, totals=summarize_balance(records, env_params.max_steps))


def summarize_balance(records: list[dict], max_steps: int) -> dict:
    steps = [int(r["steps"]) for r in records]
    return {
        "episodes": len(steps),
        "at_cap": sum(s >= max_steps for s in steps),
        "mean_steps": float(np.mean(steps)) if steps else float("nan"),
        "std_steps": float(np.std(steps)) if steps else float("nan"),
    }


# --- controlled tilt -------------------------------------------------------

def _tilt_cell(cell):
    seed, index, goal_value, run = cell
    trace = run_task(_worker["env"], Goal.controlled_tilt(goal_value), _worker["planner"], cell_rng(seed, index))
    final = trace.states[-1]
    n_left = trace.actions.count(LEFT)
    n_right = trace.actions.count(RIGHT)
    return {
        "goal_theta_dot": goal_value, "run": run, "steps": trace.steps,
        "done_reason": trace.done_reason.value,
        "final_theta": float(final[2]), "final_theta_dot": float(final[3]),
        "n_left": n_left, "n_right": n_right,
        "action_excess": (n_left - n_right) / (n_left + n_right) if trace.actions else 0.0,
    }


def tilt_sweep(som: SomMap, model: TransitionModel, env_params: EnvParams, goals=TILT_GOALS,
               runs: int = 20, seed: int = 0, plan: PlanConfig | None = None, jobs: int = 1) -> ExperimentReport:
    """Controlled tilt to theta = 0.2 rad at a commanded angular velocity, per goal."""
    _warn_if_untrained(model)
    cells = [(seed, gi * runs + r, float(g), r) for gi, g in enumerate(goals) for r in range(runs)]
    records = _run_cells(_tilt_cell, cells, som, model, env_params, plan or PlanConfig(), jobs)
    summary = summarize_tilt(records)
    totals = {
        "runs": len(records),
        "correct_side_rate": float(np.mean([r["final_theta"] > 0 for r in records])) if records else float("nan"),
    }
    return ExperimentReport("tilt_sweep", seed, records, summary, totals)


def summarize_tilt(records: list[dict]) -> list[dict]:
    groups: dict[float, list[dict]] = {}
    for r in records:
        groups.setdefault(float(r["goal_theta_dot"]), []).append(r)
    out = []
    for g, rows in groups.items():
        final = [float(r["final_theta_dot"]) for r in rows]
        out.append({
            "goal_theta_dot": g, "runs": len(rows),
            "mean_final_theta_dot": _mean(final), "std_final_theta_dot": _std(final),
            "mean_action_excess": _mean([float(r["action_excess"]) for r in rows]),
            "mean_steps": _mean([float(r["steps"]) for r in rows]),
            "correct_side_rate": _mean([float(float(r["final_theta"]) > 0) for r in rows]),
        })
    return out


# --- tilted balancing ------------------------------------------------------

def window_mean_tilt(thetas, start: int = 50, stop: int = 100) -> float:
    """Mean angle over time steps start..stop inclusive, truncated at episode end.

    NaN when the episode ended before ``start``.
    """
    window = np.asarray(thetas)[start:stop + 1]
    return float(window.mean()) if len(window) else float("nan")


def _tilted_cell(cell):
    seed, index, goal_value, run = cell
    trace = run_task(_worker["env"], Goal.tilted_balance(goal_value), _worker["planner"], cell_rng(seed, index))
    thetas = trace.state_array()[:, 2]
    return {"goal_theta": goal_value, "run": run, "steps": trace.steps,
            "done_reason": trace.done_reason.value, "mean_tilt": window_mean_tilt(thetas)}


def tilted_balance_sweep(som: SomMap, model: TransitionModel, env_params: EnvParams,
                         goals=TILTED_BALANCE_GOALS, runs: int = 20, seed: int = 0,
                         plan: PlanConfig | None = None, jobs: int = 1) -> ExperimentReport:
    _warn_if_untrained(model)
    cells = [(seed, gi * runs + r, float(g), r) for gi, g in enumerate(goals) for r in range(runs)]
    records = _run_cells(_tilted_cell, cells, som, model, env_params, plan or PlanConfig(), jobs)
    summary = summarize_tilted(records)
    return ExperimentReport("tilted_balance", seed, records, summary, tilted_totals(summary))


def summarize_tilted(records: list[dict]) -> list[dict]:
    groups: dict[float, list[dict]] = {}
    for r in records:
        groups.setdefault(float(r["goal_theta"]), []).append(r)
    out = []
    for g, rows in groups.items():
        tilts = [float(r["mean_tilt"]) for r in rows]
        out.append({
            "goal_theta": g, "runs": len(rows),
            "runs_with_window": sum(not math.isnan(t) for t in tilts),
            "mean_tilt": _mean(tilts), "std_tilt": _std(tilts),
            "mean_steps": _mean([float(r["steps"]) for r in rows]),
        })
    return out


def tilted_totals(summary: list[dict]) -> dict:
    goals = np.array([row["goal_theta"] for row in summary], dtype=float)
    tilts = np.array([row["mean_tilt"] for row in summary], dtype=float)
    ok = ~np.isnan(tilts)
    corr = float(np.corrcoef(goals[ok], tilts[ok])[0, 1]) if ok.sum() >= 2 else float("nan")
    return {
        "pearson_goal_vs_tilt": corr,
        "mean_steps_all_goals": _mean([float(row["mean_steps"]) for row in summary]),
    }


# --- one-shot imitation of an arbitrary goal -------------------------------

def imitate(som: SomMap, model: TransitionModel, env_params: EnvParams, goal: Goal, episodes: int = 1,
            seed: int = 0, plan: PlanConfig | None = None) -> tuple[ExperimentReport, list]:
    """Run a configured goal; returns the report and the per-episode traces."""
    planner = Planner(som, model, plan or PlanConfig())
    env = CartPole(env_params)
    traces, records = [], []
    for i in range(episodes):
        trace = run_task(env, goal, planner, cell_rng(seed, i))
        traces.append(trace)
        records.append({"episode": i, "steps": trace.steps, "done_reason": trace.done_reason.value,
                        "final_distance": trace.distances[-1]})
    totals = {"episodes": episodes, "mean_steps": _mean([float(r["steps"]) for r in records])}
    return ExperimentReport("imitate", seed, records, totals=totals), traces


def done_reasons(records: list[dict]) -> dict[str, int]:
    out = {reason.value: 0 for reason in DoneReason}
    for r in records:
        out[r["done_reason"]] += 1
    return out
