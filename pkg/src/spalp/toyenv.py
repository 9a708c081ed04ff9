"""Hypercube toy environment.

The unit box ``[0, 1]^d`` is cut into ``c`` cubes per dimension. Sampling an
unlocked cube raises the reward it pays out next time; only the origin cube
starts unlocked, and a cube opens up once an orthogonal neighbor is mastered
(reward above the mastery threshold). There is no randomness anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Sequence, Tuple

import numpy as np

MAX_REWARD = 100.0

Index = Tuple[int, ...]


class RewardShape(str, Enum):
    LINEAR = "linear"
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class ToyEnvConfig:
    dims: int = 2
    cubes_per_dim: int = 10
    reward_shape: RewardShape = RewardShape.LINEAR
    transfer_learning: bool = False
    linear_step: float = 1.0
    sigmoid_steepness: float = 0.15
    sigmoid_midpoint: float = 50.0
    mastery_threshold: float = 75.0

    def __post_init__(self):
        object.__setattr__(self, "reward_shape", RewardShape(self.reward_shape))
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.cubes_per_dim < 1:
            raise ValueError("cubes_per_dim must be >= 1")
        if not self.linear_step > 0:
            raise ValueError("linear_step must be positive")
        if not self.sigmoid_steepness > 0:
            raise ValueError("sigmoid_steepness must be positive")
        if not 0 < self.mastery_threshold < MAX_REWARD:
            raise ValueError("mastery_threshold must lie in (0, 100)")

    @property
    def raw_range(self) -> Tuple[float, float]:
        return 0.0, MAX_REWARD


@dataclass
class CubeState:
    sample_count: int = 0
    unlocked: bool = False
    # head start in samples granted by transfer learning
    progress_offset: float = 0.0


class CubeGrid:
    """Mutable cube lattice; one instance per run."""

    def __init__(self, config: ToyEnvConfig = ToyEnvConfig()):
        self.config = config
        shape = (config.cubes_per_dim,) * config.dims
        self.cubes = {idx: CubeState() for idx in np.ndindex(*shape)}
        self.cubes[self.origin].unlocked = True
        self._n_mastered = 0

    @property
    def origin(self) -> Index:
        return (0,) * self.config.dims

    @property
    def n_cubes(self) -> int:
        return self.config.cubes_per_dim ** self.config.dims

    def curve(self, progress: float) -> float:
        """Reward after ``progress`` (possibly fractional) samples."""
        cfg = self.config
        if cfg.reward_shape is RewardShape.LINEAR:
            value = cfg.linear_step * progress
        else:
            value = MAX_REWARD / (1.0 + math.exp(-cfg.sigmoid_steepness * (progress - cfg.sigmoid_midpoint)))
        return min(MAX_REWARD, value)

    def inverse_curve(self, reward: float) -> float:
        """Progress at which the curve pays ``reward``."""
        cfg = self.config
        if cfg.reward_shape is RewardShape.LINEAR:
            return reward / cfg.linear_step
        reward = min(max(reward, 1e-12), MAX_REWARD * (1.0 - 1e-12))
        return cfg.sigmoid_midpoint - math.log(MAX_REWARD / reward - 1.0) / cfg.sigmoid_steepness

    def reward_of(self, idx: Index) -> float:
        cube = self.cubes[idx]
        if cube.sample_count == 0:
            return 0.0
        return self.curve(cube.sample_count + cube.progress_offset)

    def neighbors(self, idx: Index) -> Iterator[Index]:
        c = self.config.cubes_per_dim
        for axis in range(len(idx)):
            for step in (-1, 1):
                j = idx[axis] + step
                if 0 <= j < c:
                    yield idx[:axis] + (j,) + idx[axis + 1:]

    def locate(self, params: Sequence[float]) -> Index:
        """Cube index of a point in the unit box; 1.0 maps to the last cube."""
        c = self.config.cubes_per_dim
        if len(params) != self.config.dims:
            raise ValueError(f"expected {self.config.dims} coordinates, got {len(params)}")
        out = []
        for p in params:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"coordinate {p} outside the unit box")
            out.append(min(int(math.floor(p * c)), c - 1))
        return tuple(out)

    def sample(self, params: Sequence[float]) -> float:
        """Play one episode at ``params`` and return its raw reward in [0, 100]."""
        idx = self.locate(params)
        cube = self.cubes[idx]
        if not cube.unlocked:
            return 0.0
        threshold = self.config.mastery_threshold
        was_mastered = self.reward_of(idx) > threshold
        if cube.sample_count == 0 and self.config.transfer_learning:
            seen = [self.reward_of(n) for n in self.neighbors(idx)
                    if self.cubes[n].unlocked and self.cubes[n].sample_count > 0]
            if seen:
                target = sum(seen) / len(seen)
                cube.progress_offset = max(0.0, self.inverse_curve(target) - 1.0)
        cube.sample_count += 1
        reward = self.reward_of(idx)
        if reward > threshold:
            if not was_mastered:
                self._n_mastered += 1
            for n in self.neighbors(idx):
                self.cubes[n].unlocked = True
        return reward

    def mastered_fraction(self) -> float:
        return self._n_mastered / self.n_cubes

    def is_mastered(self, idx: Index) -> bool:
        return self.reward_of(idx) > self.config.mastery_threshold

    def snapshot(self) -> List[dict]:
        """Per-cube state rows, in lexicographic cube order."""
        return [
            {
                "cube": "-".join(map(str, idx)),
                "sample_count": cube.sample_count,
                "reward": self.reward_of(idx),
                "unlocked": cube.unlocked,
            }
            for idx, cube in self.cubes.items()
        ]
