"""Curriculum teachers: uniform random, ALP-GMM and its self-paced variant SPALP.

All three share one loop. ``propose_task`` hands out the next task and
``observe`` records the episode reward. Every ``N`` episodes after bootstrap,
the ALP-driven teachers refresh their regularization state, compute the
absolute learning progress of the last ``N`` tasks against the reward history
and refit their sampling mixture on ``[normalized params ; ALP]``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from . import gmm
from .regularizer import OFF, RegularizationState, solve_alpha, squash

TEACHER_KINDS = ("random", "alpgmm", "spalp")


def normalize_reward(raw: float, raw_min: float, raw_max: float) -> float:
    """Map a raw reward onto ``[-1, 0]``, clamping values outside the range."""
    if not raw_min < raw_max:
        raise ValueError(f"need raw_min < raw_max, got [{raw_min}, {raw_max}]")
    scaled = (raw - raw_min) / (raw_max - raw_min)
    return min(1.0, max(0.0, scaled)) - 1.0


@dataclass(frozen=True)
class TeacherConfig:
    fit_rate: int = 250
    p_random: float = 0.2
    bootstrap_episodes: Optional[int] = None
    r_b: float = -0.1
    history_size: int = 5000
    k_min: int = 2
    k_max: int = 10
    em_max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.bootstrap_episodes is None:
            object.__setattr__(self, "bootstrap_episodes", self.fit_rate)
        if self.fit_rate < 1:
            raise ValueError("fit_rate must be positive")
        if not 0.0 <= self.p_random <= 1.0:
            raise ValueError("p_random must lie in [0, 1]")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError("need 1 <= k_min <= k_max")
        if self.bootstrap_episodes < self.k_max:
            raise ValueError("bootstrap_episodes must be at least k_max")
        if not -1.0 < self.r_b < 0.0:
            raise ValueError("r_b must lie in (-1, 0)")
        if self.history_size < 1:
            raise ValueError("history_size must be positive")


@dataclass(frozen=True)
class RewardRecord:
    params: Tuple[float, ...]
    reward: float
    episode: int


@dataclass(frozen=True)
class TraceEntry:
    episode: int
    alpha: Optional[float]
    mean_reward: float
    k_selected: int

    @property
    def alpha_token(self) -> str:
        return "off" if self.alpha is None else f"{self.alpha:.6f}"


class RewardHistory:
    """Fixed-capacity FIFO of rewards with nearest-neighbor lookup.

    Positions are stored normalized to the unit box so that distances do not
    depend on the units of each parameter.
    """

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.dim = dim
        self._pos = np.zeros((capacity, dim))
        self._reward = np.zeros(capacity)
        self._episode = np.full(capacity, -1, dtype=np.int64)
        self._records: Deque[RewardRecord] = deque(maxlen=capacity)
        self._next = 0
        self._last_episode = -1

    def __len__(self):
        return len(self._records)

    @property
    def records(self) -> List[RewardRecord]:
        return list(self._records)

    def append(self, record: RewardRecord, position: Sequence[float]):
        slot = self._next % self.capacity
        self._pos[slot] = position
        self._reward[slot] = record.reward
        self._episode[slot] = record.episode
        self._records.append(record)
        self._next += 1
        self._last_episode = max(self._last_episode, record.episode)

    def _live(self):
        n = len(self._records)
        if n < self.capacity:
            return self._pos[:n], self._reward[:n], self._episode[:n]
        return self._pos, self._reward, self._episode

    def nearest(self, position, before_episode: int) -> Optional[int]:
        """Slot of the closest record logged strictly before ``before_episode``.

        Distance ties go to the most recent record. Returns ``None`` when no
        such record exists.
        """
        pos, _, episodes = self._live()
        if not len(pos):
            return None
        position = np.asarray(position, dtype=float)
        # accumulate coordinate by coordinate: fixed summation order
        d2 = (pos[:, 0] - position[0]) ** 2
        for j in range(1, self.dim):
            d2 += (pos[:, j] - position[j]) ** 2
        if self._last_episode >= before_episode:
            d2[episodes >= before_episode] = np.inf
        best = d2.min()
        if best == np.inf:
            return None
        ties = np.flatnonzero(d2 == best)
        if len(ties) == 1:
            return int(ties[0])
        return int(ties[np.argmax(episodes[ties])])

    def reward_at(self, slot: int) -> float:
        return float(self._reward[slot])

    def episode_at(self, slot: int) -> int:
        return int(self._episode[slot])


def compute_alp(
    record: RewardRecord, position, history: RewardHistory, state: RegularizationState = OFF
) -> float:
    """Absolute learning progress of ``record`` against its nearest earlier neighbor.

    With active regularization both rewards are squashed before differencing.
    """
    slot = history.nearest(position, record.episode)
    if slot is None:
        raise RuntimeError("no earlier record in the reward history to compare against")
    r_new, r_nn = record.reward, history.reward_at(slot)
    if state.active:
        r_new, r_nn = squash(r_new, state.alpha), squash(r_nn, state.alpha)
    return abs(r_new - r_nn)


class Teacher:
    """Uniform random teacher; base class for the ALP-driven ones."""

    kind = "random"

    def __init__(self, bounds: Sequence[Tuple[float, float]], raw_range: Tuple[float, float],
                 config: TeacherConfig = TeacherConfig()):
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ValueError("every parameter needs min < max")
        self.lo, self.hi = self.bounds[:, 0], self.bounds[:, 1]
        self.dim = len(self.bounds)
        self.raw_range = raw_range
        normalize_reward(raw_range[0], *raw_range)
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.buffer: Deque[RewardRecord] = deque(maxlen=config.fit_rate)
        # reward of each buffered record's nearest earlier neighbor
        self._neighbor_rewards: Deque[float] = deque(maxlen=config.fit_rate)
        self.history = RewardHistory(config.history_size, self.dim)
        self.episode = 0
        self.state = OFF
        self.mixture: Optional[gmm.GaussianMixture] = None
        self.trace: List[TraceEntry] = []
        self.last_source = None
        self.last_alps: Optional[np.ndarray] = None

    def normalize_params(self, params) -> np.ndarray:
        return (np.asarray(params, dtype=float) - self.lo) / (self.hi - self.lo)

    def _uniform(self) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * self.rng.random(self.dim)

    def propose_task(self) -> np.ndarray:
        self.last_source = "random"
        return self._uniform()

    def observe(self, params, raw_reward: float):
        params = np.asarray(params, dtype=float)
        if params.shape != (self.dim,) or np.any(params < self.lo) or np.any(params > self.hi):
            raise ValueError(f"task {params} outside the parameter bounds")
        record = RewardRecord(tuple(params.tolist()), normalize_reward(raw_reward, *self.raw_range), self.episode)
        position = self.normalize_params(params)
        slot = self.history.nearest(position, record.episode)
        # the very first record has nothing to compare against: zero progress
        self._neighbor_rewards.append(record.reward if slot is None else self.history.reward_at(slot))
        self.buffer.append(record)
        self.history.append(record, position)
        self.episode += 1
        boot = self.config.bootstrap_episodes
        if self.episode >= boot and (self.episode - boot) % self.config.fit_rate == 0:
            self.step_cycle()

    def buffer_mean_reward(self) -> float:
        if not self.buffer:
            return float("nan")
        return float(np.mean([r.reward for r in self.buffer]))

    def update_regularization_state(self) -> RegularizationState:
        self.state = OFF
        return self.state

    def step_cycle(self):
        pass


class ALPGMMTeacher(Teacher):
    kind = "alpgmm"

    def propose_task(self) -> np.ndarray:
        cfg = self.config
        if self.mixture is None or self.episode < cfg.bootstrap_episodes:
            self.last_source = "bootstrap"
            return self._uniform()
        if self.rng.random() < cfg.p_random:
            self.last_source = "random"
            return self._uniform()
        self.last_source = "gmm"
        mix = self.mixture
        alp_means = np.maximum(mix.means[:, -1], 0.0)
        total = alp_means.sum()
        probs = alp_means / total if total > 0 else np.full(mix.k, 1.0 / mix.k)
        idx = int(self.rng.choice(mix.k, p=probs))
        point = gmm.sample_component(mix, idx, self.rng)[: self.dim]
        return np.clip(self.lo + (self.hi - self.lo) * point, self.lo, self.hi)

    def cycle_alps(self) -> np.ndarray:
        """ALPs of the buffered records under the current regularization state."""
        rewards = np.array([r.reward for r in self.buffer])
        nn = np.array(self._neighbor_rewards)
        if self.state.active:
            rewards, nn = squash(rewards, self.state.alpha), squash(nn, self.state.alpha)
        return np.abs(rewards - nn)

    def step_cycle(self):
        cfg = self.config
        self.update_regularization_state()
        alps = self.cycle_alps()
        self.last_alps = alps
        positions = self.normalize_params([r.params for r in self.buffer])
        data = np.column_stack([positions, alps])
        fit_seed = int(np.random.SeedSequence([cfg.seed, self.episode]).generate_state(1)[0])
        self.mixture = gmm.select_and_fit(data, cfg.k_min, cfg.k_max, seed=fit_seed, max_iter=cfg.em_max_iter)
        self.trace.append(TraceEntry(self.episode, self.state.alpha, self.buffer_mean_reward(), self.mixture.k))


class SPALPTeacher(ALPGMMTeacher):
    kind = "spalp"

    def update_regularization_state(self) -> RegularizationState:
        rewards = [r.reward for r in self.buffer]
        self.state = solve_alpha(rewards, self.config.r_b)
        return self.state


def make_teacher(kind: str, bounds, raw_range, config: TeacherConfig = TeacherConfig()) -> Teacher:
    classes = {"random": Teacher, "alpgmm": ALPGMMTeacher, "spalp": SPALPTeacher}
    try:
        cls = classes[kind]
    except KeyError:
        raise ValueError(f"unknown teacher kind {kind!r}; expected one of {TEACHER_KINDS}") from None
    return cls(bounds, raw_range, config)
