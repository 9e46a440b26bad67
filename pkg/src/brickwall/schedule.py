"""Linear beta schedules and DDIM timestep ladders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidScheduleParams(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal levels; ``alpha_bar[0] == 1`` and ``len == T + 1``."""

    T: int
    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        ab.setflags(write=False)
        object.__setattr__(self, "alpha_bar", ab)
        if ab.shape != (self.T + 1,):
            raise InvalidScheduleParams(
                f"alpha_bar must have T+1={self.T + 1} entries, got {ab.shape}")
        if ab[0] != 1.0:
            raise InvalidScheduleParams("alpha_bar[0] must be exactly 1")
        if np.any(ab <= 0) or np.any(np.diff(ab) >= 0):
            raise InvalidScheduleParams("alpha_bar must be strictly decreasing in (0, 1]")


@dataclass(frozen=True)
class StepLadder:
    timesteps: tuple

    @property
    def S(self):
        return len(self.timesteps) - 1

    def pairs(self):
        """Yield ``(k, t, t_prev)`` for every sampler step."""
        for k in range(self.S):
            yield k, self.timesteps[k], self.timesteps[k + 1]


def build_linear_schedule(T=1000, beta_start=1e-4, beta_end=2e-2):
    if T < 1:
        raise InvalidScheduleParams(f"T must be >= 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise InvalidScheduleParams(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    if alpha_bar[-1] <= 0 or np.any(np.diff(alpha_bar) >= 0):
        raise InvalidScheduleParams(
            f"alpha_bar underflows double precision for T={T}, beta_end={beta_end}")
    return NoiseSchedule(T=int(T), alpha_bar=alpha_bar)


def ddim_ladder(T, S):
    """``S + 1`` timesteps from ``T`` down to 0, ``round(T * (S - k) / S)`` half-up."""
    if not 1 <= S <= T:
        raise InvalidScheduleParams(f"need 1 <= S <= T, got S={S}, T={T}")
    # integer arithmetic keeps the half-up rounding exact
    steps = tuple((2 * T * (S - k) + S) // (2 * S) for k in range(S + 1))
    return StepLadder(steps)
