"""Noise predictors that stand in for a short-clip video diffusion model.

The analytic oracle assumes clean latents are zero-mean Gaussian with an
AR(1) covariance ``rho**|i-j|`` across frames and independent channels. For
``z_t = sqrt(a) z_0 + sqrt(1-a) eps`` the MMSE noise estimate is linear in
``z_t``, and because AR(1) covariances of sub-windows are sub-matrices, an
oracle restricted to ``n <= window`` frames is exactly a model that never sees
beyond its window.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Hashable, Protocol

import numpy as np

from .numerics import solve_spd


class InvalidGpParams(ValueError):
    pass


class InvalidTimestep(ValueError):
    pass


class SegmentTooLong(ValueError):
    pass


@dataclass(frozen=True)
class Condition:
    """Opaque conditioning token (a text prompt in a real model)."""

    token: Hashable = None


class Denoiser(Protocol):
    window: int

    def predict(self, z: np.ndarray, t: int, cond: Condition | None = None) -> np.ndarray:
        ...


@dataclass(frozen=True)
class GpOracleParams:
    rho: float = 0.9
    window: int = 16
    d: int = 4

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise InvalidGpParams(f"rho must lie in [0, 1), got {self.rho}")
        if self.window < 1 or self.d < 1:
            raise InvalidGpParams("window and d must be >= 1")


def gp_covariance(n, rho):
    if n < 1:
        raise InvalidGpParams(f"n must be >= 1, got {n}")
    if not 0 <= rho < 1:
        raise InvalidGpParams(f"rho must lie in [0, 1), got {rho}")
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return np.power(float(rho), lag)


def _check_segment(z, window):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] > window:
        raise SegmentTooLong(f"segment of {z.shape[0]} frames exceeds window {window}")
    return z


def _alpha_bar_at(schedule, t):
    if not 1 <= t <= schedule.T:
        raise InvalidTimestep(f"timestep must lie in [1, {schedule.T}], got {t}")
    a = float(schedule.alpha_bar[t])
    if a >= 1.0:
        raise InvalidTimestep(f"alpha_bar[{t}] = 1, noise prediction undefined")
    return a


def noise_operator(n, a, rho):
    """Matrix ``E`` such that the oracle's noise estimate is ``E @ z``.

    Built from the posterior mean ``m = sqrt(a) S (a S + (1-a) I)^-1 z`` and
    ``eps = (z - sqrt(a) m) / sqrt(1-a)``.
    """
    sigma = gp_covariance(n, rho)
    gain = np.sqrt(a) * sigma @ solve_spd(a * sigma + (1.0 - a) * np.eye(n), np.eye(n))
    op = (np.eye(n) - np.sqrt(a) * gain) / np.sqrt(1.0 - a)
    return op


def analytic_predict_noise(z, t, schedule, params):
    z = _check_segment(z, params.window)
    a = _alpha_bar_at(schedule, t)
    return noise_operator(z.shape[0], a, params.rho) @ z


class GpOracleDenoiser:
    """The analytic oracle with a per-``(n, t)`` operator cache.

    Safe to call from many threads; the cache is filled under a lock.
    """

    def __init__(self, params, schedule):
        self.params = params
        self.schedule = schedule
        self._cache = {}
        self._lock = threading.Lock()

    @property
    def window(self):
        return self.params.window

    def operator(self, n, t):
        key = (n, t)
        op = self._cache.get(key)
        if op is None:
            with self._lock:
                op = self._cache.get(key)
                if op is None:
                    a = _alpha_bar_at(self.schedule, t)
                    op = noise_operator(n, a, self.params.rho)
                    op.setflags(write=False)
                    self._cache[key] = op
        return op

    def predict(self, z, t, cond=None):
        z = np.asarray(z, dtype=np.float64)
        seg = _check_segment(z, self.window)
        out = self.operator(seg.shape[0], t) @ seg
        return out.reshape(z.shape)


class ZeroDenoiser:
    def __init__(self, window):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window

    def predict(self, z, t, cond=None):
        z = np.asarray(z, dtype=np.float64)
        _check_segment(z, self.window)
        return np.zeros_like(z)


def zero_denoiser(window):
    return ZeroDenoiser(window)
