"""Self-organizing-map world model with action-conditioned transitions for cart-pole control."""
from .agent import Agent, DecaySchedule, TrainingConfig, pretrain, train
from .cartpole import CartPole, DoneReason, EnvParams, Environment, StepResult
from .planner import Goal, PlanConfig, Planner, distance, goal_from_demo, plan, rollout, run_task
from .som import MapGeometry, SomMap
from .transition import TransitionModel

__all__ = [
    "Agent", "CartPole", "DecaySchedule", "DoneReason", "EnvParams", "Environment", "Goal",
    "MapGeometry", "PlanConfig", "Planner", "SomMap", "StepResult", "TrainingConfig",
    "TransitionModel", "distance", "goal_from_demo", "plan", "pretrain", "rollout", "run_task", "train",
]
