"""Self-organizing map over environment states.

The map is a rectangular grid of units, each holding a codebook vector in
input space.  All operations work on flat (row-major) unit indices; grid
coordinates are only needed for neighbourhood distances.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIGMA_FLOOR = 1e-3


class InputError(ValueError):
    """Raised for non-finite inputs or out-of-range unit indices."""


@dataclass(frozen=True)
class MapGeometry:
    rows: int = 16
    cols: int = 16

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InputError(f"map needs at least one row and column, got {self.rows}x{self.cols}")

    @property
    def n_units(self) -> int:
        return self.rows * self.cols

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.rows, self.cols))

    def coords(self) -> np.ndarray:
        """(N, 2) array of grid coordinates in row-major order."""
        r, c = np.divmod(np.arange(self.n_units), self.cols)
        return np.stack([r, c], axis=1).astype(float)

    def unit_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise InputError(f"unit ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def unit_coords(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_units:
            raise InputError(f"unit index {index} outside map of {self.n_units} units")
        return divmod(int(index), self.cols)


@dataclass
class SomMap:
    geometry: MapGeometry
    codebook: np.ndarray  # (N, D)
    _coords: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.codebook = np.asarray(self.codebook, dtype=np.float64)
        if self.codebook.ndim != 2 or self.codebook.shape[0] != self.geometry.n_units:
            raise InputError(
                f"codebook shape {self.codebook.shape} does not match {self.geometry.n_units} units"
            )
        if not np.all(np.isfinite(self.codebook)):
            raise InputError("codebook contains non-finite values")
        self._coords = self.geometry.coords()

    @classmethod
    def random(cls, geometry: MapGeometry, dim: int, rng: np.random.Generator,
               scale: float = 0.05) -> "SomMap":
        """Codebooks drawn uniformly from [-scale, scale]^dim."""
        return cls(geometry, rng.uniform(-scale, scale, size=(geometry.n_units, dim)))

    @property
    def n_units(self) -> int:
        return self.geometry.n_units

    @property
    def dim(self) -> int:
        return self.codebook.shape[1]

    def copy(self) -> "SomMap":
        return SomMap(self.geometry, self.codebook.copy())


def _check_input(u, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (dim,):
        raise InputError(f"expected input of shape ({dim},), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise InputError(f"non-finite input {u}")
    return u


def distances(u, som: SomMap) -> np.ndarray:
    """Euclidean distance from ``u`` to every codebook vector."""
    u = _check_input(u, som.dim)
    return np.sqrt(np.sum((som.codebook - u) ** 2, axis=1))


def find_winner(u, som: SomMap) -> int:
    # np.argmin returns the first minimum, i.e. the lowest row-major index on ties
    return int(np.argmin(distances(u, som)))


def quantization_error(u, som: SomMap) -> float:
    return float(np.min(distances(u, som)))


def adaptive_width(u, som: SomMap, sigma0: float, sigma_floor: float = SIGMA_FLOOR) -> float:
    """Neighbourhood width scaled by how well ``u`` is represented.

    sigma = sigma0 * min_dist / mean_dist, floored at ``sigma_floor``.
    """
    d = distances(u, som)
    return _width_from_distances(d, sigma0, sigma_floor)


def _width_from_distances(d: np.ndarray, sigma0: float, sigma_floor: float) -> float:
    mean = d.mean()
    if mean == 0.0:
        return sigma_floor
    return max(sigma_floor, sigma0 * d.min() / mean)


def neighborhood(winner: int, sigma: float, geometry: MapGeometry,
                 coords: np.ndarray | None = None) -> np.ndarray:
    """Gaussian activation over the grid centred on ``winner``."""
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    if coords is None:
        coords = geometry.coords()
    sq = np.sum((coords - coords[winner]) ** 2, axis=1)
    return np.exp(-sq / (2.0 * sigma * sigma))


def som_update(som: SomMap, u, eta: float, h: np.ndarray) -> SomMap:
    """Move every codebook a fraction ``eta * h(s)`` of the way towards ``u`` (in place)."""
    if eta == 0.0:
        return som
    u = _check_input(u, som.dim)
    som.codebook += (eta * h)[:, None] * (u - som.codebook)
    return som


def recognition_density(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    total = h.sum()
    if not total > 0:
        raise RuntimeError("activation pattern has no positive entry")
    return h / total


def decode(s: int, som: SomMap) -> np.ndarray:
    if not 0 <= s < som.n_units:
        raise InputError(f"unit index {s} outside map of {som.n_units} units")
    return som.codebook[s].copy()


@dataclass
class Activation:
    """Everything derived from presenting one input to the map."""
    winner: int
    sigma: float
    h: np.ndarray
    quantization_error: float

    @property
    def density(self) -> np.ndarray:
        return recognition_density(self.h)


def activate(u, som: SomMap, sigma0: float, sigma_floor: float = SIGMA_FLOOR) -> Activation:
    """Winner, adaptive width and neighbourhood in one pass over the distances."""
    d = distances(u, som)
    winner = int(np.argmin(d))
    sigma = _width_from_distances(d, sigma0, sigma_floor)
    h = neighborhood(winner, sigma, som.geometry, som._coords)
    return Activation(winner, sigma, h, float(d[winner]))
