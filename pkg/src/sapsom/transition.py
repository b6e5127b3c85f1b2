"""Action-conditioned transition matrices over map units."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .som import InputError


@dataclass
class TransitionModel:
    """One N x N matrix per action; ``T[a][s_next, s]`` scores s -> s_next under a.

    Entries are unconstrained reals trained by least squares, so columns are
    not probability vectors.
    """
    matrices: np.ndarray  # (K, N, N)

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise InputError(f"expected (K, N, N) matrices, got shape {self.matrices.shape}")

    @classmethod
    def zeros(cls, n_actions: int, n_units: int) -> "TransitionModel":
        return cls(np.zeros((n_actions, n_units, n_units)))

    @property
    def n_actions(self) -> int:
        return self.matrices.shape[0]

    @property
    def n_units(self) -> int:
        return self.matrices.shape[1]

    def copy(self) -> "TransitionModel":
        return TransitionModel(self.matrices.copy())

    def _check(self, a: int, *vectors) -> None:
        if not 0 <= a < self.n_actions:
            raise InputError(f"action {a} outside 0..{self.n_actions - 1}")
        for v in vectors:
            if np.shape(v) != (self.n_units,):
                raise InputError(f"expected vector of length {self.n_units}, got shape {np.shape(v)}")

    def predict_density(self, a: int, p_t) -> np.ndarray:
        """Predicted (unnormalised) next-state density ``T_a @ p_t``."""
        self._check(a, p_t)
        return self.matrices[a] @ np.asarray(p_t, dtype=np.float64)

    def learn(self, a: int, p_t, p_next, gamma: float) -> float:
        """One gradient step on ||p_next - T_a p_t||^2, in place.

        Returns the squared residual before the update.
        """
        self._check(a, p_t, p_next)
        if gamma < 0:
            raise InputError(f"gamma must be non-negative, got {gamma}")
        p_t = np.asarray(p_t, dtype=np.float64)
        residual = np.asarray(p_next, dtype=np.float64) - self.matrices[a] @ p_t
        if gamma != 0.0:
            self.matrices[a] += gamma * np.outer(residual, p_t)
        return float(residual @ residual)

    def predict_mode(self, a: int, winner: int) -> int:
        """Most likely successor of ``winner`` under ``a``, never ``winner`` itself.

        Ties go to the lowest index; an all-zero column therefore yields the
        lowest-index unit other than ``winner``.
        """
        if not 0 <= a < self.n_actions:
            raise InputError(f"action {a} outside 0..{self.n_actions - 1}")
        if not 0 <= winner < self.n_units:
            raise InputError(f"unit index {winner} outside map of {self.n_units} units")
        if self.n_units == 1:
            return 0
        column = self.matrices[a][:, winner].copy()
        column[winner] = -np.inf
        return int(np.argmax(column))

    def column_is_unlearned(self, a: int, winner: int) -> bool:
        return not np.any(self.matrices[a][:, winner])


def learn_transition(model: TransitionModel, a: int, p_t, p_next, gamma: float) -> TransitionModel:
    model.learn(a, p_t, p_next, gamma)
    return model


def predict_mode(model: TransitionModel, a: int, winner: int) -> int:
    return model.predict_mode(a, winner)
