"""Self-paced reward squashing and the reward-bound solver for its temperature.

Rewards handled here are normalized into ``[-1, 0]``. The squashing function

    f_alpha(x) = -alpha * (1 - exp(x / alpha))

compresses low rewards much more than rewards near zero, and tends to the
identity as ``alpha`` grows. ``solve_alpha`` picks ``alpha`` so that the mean
squashed reward of a batch hits a target bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

ArrayLike = Union[float, Sequence[float], np.ndarray]

# exp(x / alpha) is treated as exactly 0 below this exponent
EXP_UNDERFLOW = -700.0

ALPHA_LO = 1e-6
ALPHA_HI = 1.0
RESIDUAL_TOL = 1e-8
MAX_BISECTION_ITER = 200


def clamp_reward(value: float) -> float:
    """Clamp a normalized reward into ``[-1, 0]``."""
    return min(0.0, max(-1.0, float(value)))


@dataclass(frozen=True)
class RegularizationState:
    """Either off (``alpha is None``) or active with a positive ``alpha``."""

    alpha: Optional[float] = None

    def __post_init__(self):
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"active regularization needs alpha > 0, got {self.alpha}")

    @property
    def active(self) -> bool:
        return self.alpha is not None

    @classmethod
    def off(cls) -> "RegularizationState":
        return cls(None)

    @classmethod
    def with_alpha(cls, alpha: float) -> "RegularizationState":
        return cls(float(alpha))

    def apply(self, rewards: ArrayLike):
        """Squash ``rewards`` if active, otherwise return them unchanged."""
        if self.alpha is None:
            return rewards
        return squash(rewards, self.alpha)

    def __str__(self):
        return "off" if self.alpha is None else f"{self.alpha:.6f}"


OFF = RegularizationState.off()


def _check_alpha(alpha: float):
    if not alpha > 0 or math.isnan(alpha):
        raise ValueError(f"alpha must be positive, got {alpha}")


def squash(x: ArrayLike, alpha: float):
    """Apply ``f_alpha`` element-wise. Scalars in, scalar out."""
    _check_alpha(alpha)
    if np.ndim(x) == 0:
        z = float(x) / alpha
        if z < EXP_UNDERFLOW:
            return -alpha
        # f(x) >= x exactly; the max only undoes rounding (subnormal x)
        return max(alpha * math.expm1(z), float(x))
    x = np.asarray(x, dtype=float)
    z = x / alpha
    # expm1 keeps precision for large alpha, where z is tiny
    y = np.where(z < EXP_UNDERFLOW, -alpha, alpha * np.expm1(np.maximum(z, EXP_UNDERFLOW)))
    return np.maximum(y, x)


def mean_squashed(rewards: ArrayLike, alpha: float) -> float:
    rewards = np.asarray(rewards, dtype=float).ravel()
    if rewards.size == 0:
        raise ValueError("mean_squashed needs at least one reward")
    return float(np.mean(squash(rewards, alpha)))


def solve_alpha(rewards: ArrayLike, r_b: float) -> RegularizationState:
    """Find the squashing temperature that pulls the mean reward up to ``r_b``.

    Returns ``OFF`` when the plain mean already meets the bound (ties
    included). Otherwise bisects on the strictly decreasing residual
    ``mean(f_alpha(r)) - r_b`` until it is within ``1e-8`` of zero.
    """
    rewards = np.asarray(rewards, dtype=float).ravel()
    if rewards.size == 0:
        raise ValueError("solve_alpha needs at least one reward")
    if not -1.0 < r_b < 0.0:
        raise ValueError(f"reward bound must lie in (-1, 0), got {r_b}")
    if float(np.mean(rewards)) >= r_b:
        return OFF

    def residual(alpha):
        return float(np.mean(squash(rewards, alpha))) - r_b

    lo, hi = ALPHA_LO, ALPHA_HI
    while residual(lo) <= 0.0:
        # only reachable for bounds within ~1e-6 of zero
        lo /= 2.0
    g_hi = residual(hi)
    while g_hi > 0.0:
        lo, hi = hi, hi * 2.0
        g_hi = residual(hi)
    if abs(g_hi) <= RESIDUAL_TOL:
        return RegularizationState.with_alpha(hi)

    mid = hi
    for _ in range(MAX_BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        g = residual(mid)
        if abs(g) <= RESIDUAL_TOL:
            break
        if g > 0.0:
            lo = mid
        else:
            hi = mid
    return RegularizationState.with_alpha(mid)
