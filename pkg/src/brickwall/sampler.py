"""DDIM stepping and the tiled denoising loop.

Latents ("frame sequences") are float64 arrays of shape ``(L, d)``: frames
along axis 0, channels along axis 1. Four strategies share one loop:

``untiled``
    the whole latent in one window (needs a denoiser whose window covers it)
``concat``
    fixed ``f``-frame bricks, identical at every step
``brick``
    bricks shifted by ``stride`` frames per step
``sliding_window``
    overlapping windows merged by a per-frame mean
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from .brick import BrickConfig, build_plan, crop_middle, extension_rule, padded_length
from .numerics import SeededRng

UNTILED = "untiled"
CONCAT = "concat"
BRICK = "brick"
SLIDING_WINDOW = "sliding_window"
KINDS = (UNTILED, CONCAT, BRICK, SLIDING_WINDOW)

# stream keys under a run's root rng
_INIT_KEY = 0
_STEP_KEY = 1


class ShapeMismatch(ValueError):
    pass


class InvalidTimestepPair(ValueError):
    pass


class WindowExceeded(ValueError):
    pass


class InvalidOverlap(ValueError):
    pass


class InvalidStrategy(ValueError):
    pass


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = BRICK
    f: int = 16
    stride: int = 1
    overlap: int | None = None
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidStrategy(f"unknown strategy {self.kind!r}; expected one of {KINDS}")
        if self.f < 1:
            raise InvalidStrategy(f"f must be >= 1, got {self.f}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidStrategy(f"eta must lie in [0, 1], got {self.eta}")
        if self.kind == BRICK and not 0 <= self.stride < self.f:
            raise InvalidStrategy(f"stride must satisfy 0 <= stride < f={self.f}, got {self.stride}")
        if self.kind == SLIDING_WINDOW and not 1 <= self.window_overlap < self.f:
            raise InvalidOverlap(f"overlap must satisfy 1 <= overlap < f={self.f}, got {self.window_overlap}")

    @property
    def window_overlap(self):
        return self.f // 2 if self.overlap is None else self.overlap


@dataclass(frozen=True)
class WindowSet:
    """Overlapping windows of one sliding-window step."""

    windows: tuple
    length: int


def as_frames(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
        raise ShapeMismatch(f"expected an (L, d) frame sequence, got shape {z.shape}")
    return z


def ddim_step(z, eps_hat, t, t_prev, schedule, eta=0.0, rng=None):
    z = as_frames(z)
    eps_hat = as_frames(eps_hat)
    if eps_hat.shape != z.shape:
        raise ShapeMismatch(f"latent {z.shape} and noise estimate {eps_hat.shape} differ")
    if not schedule.T >= t > t_prev >= 0:
        raise InvalidTimestepPair(f"need T >= t > t_prev >= 0, got t={t}, t_prev={t_prev}")
    a_t = float(schedule.alpha_bar[t])
    a_prev = float(schedule.alpha_bar[t_prev])
    sigma = eta * np.sqrt((1.0 - a_prev) / (1.0 - a_t)) * np.sqrt(1.0 - a_t / a_prev)
    x0 = (z - np.sqrt(1.0 - a_t) * eps_hat) / np.sqrt(a_t)
    # rounding can push 1 - a_prev - sigma**2 a hair below zero at eta = 1
    out = np.sqrt(a_prev) * x0 + np.sqrt(max(1.0 - a_prev - sigma**2, 0.0)) * eps_hat
    if sigma > 0:
        if rng is None:
            raise ValueError("eta > 0 needs an rng")
        out = out + sigma * rng.normal(z.shape)
    return out


def _denoise_window(z, denoiser, t, t_prev, schedule, eta, rng, cond):
    eps_hat = denoiser.predict(z, t, cond)
    return ddim_step(z, eps_hat, t, t_prev, schedule, eta, rng)


def _map(executor, fn, items):
    if executor is None:
        return [fn(item) for item in items]
    return list(executor.map(fn, items))


def brick_step(z, plan, denoiser, t, t_prev, schedule, eta=0.0, rng=None, *,
               cond=None, f=None, executor=None, order=None):
    """One sampler step over the bricks of ``plan``.

    Segment ``j`` draws its noise from ``rng.split(j)``, so the result does
    not depend on ``order`` or on how segments are spread over ``executor``.
    """
    z = as_frames(z)
    L = z.shape[0]
    f = denoiser.window if f is None else f
    if plan.length != L:
        raise ShapeMismatch(f"plan covers {plan.length} frames, latent has {L}")
    for start, end in plan.segments:
        if end - start > denoiser.window:
            raise WindowExceeded(
                f"segment [{start}, {end}) exceeds denoiser window {denoiser.window}")
    if L >= f and f > denoiser.window:
        raise WindowExceeded(f"extension length f={f} exceeds denoiser window {denoiser.window}")

    def run(j):
        start, end = plan.segments[j]
        seg_rng = rng.split(j) if rng is not None else None
        if end - start < f and L >= f:
            rule = extension_rule((start, end), L, f)
            (a, b), (c, e) = rule.extended_range, rule.keep_range
            out = _denoise_window(z[a:b], denoiser, t, t_prev, schedule, eta, seg_rng, cond)
            return j, out[c - a:e - a]
        return j, _denoise_window(z[start:end], denoiser, t, t_prev, schedule, eta, seg_rng, cond)

    order = range(len(plan.segments)) if order is None else order
    z_prev = np.empty_like(z)
    for j, out in _map(executor, run, order):
        start, end = plan.segments[j]
        z_prev[start:end] = out
    return z_prev


def sliding_windows(L, f, overlap):
    if not 1 <= overlap < f:
        raise InvalidOverlap(f"overlap must satisfy 1 <= overlap < f={f}, got {overlap}")
    if L < f:
        raise WindowExceeded(f"latent of {L} frames is shorter than the window f={f}")
    hop = f - overlap
    starts = list(range(0, L - f + 1, hop))
    if starts[-1] + f < L:
        starts.append(L - f)
    return WindowSet(tuple((s, s + f) for s in starts), L)


def sliding_window_step(z, f, overlap, denoiser, t, t_prev, schedule, eta=0.0, rng=None, *,
                        cond=None, executor=None):
    z = as_frames(z)
    layout = sliding_windows(z.shape[0], f, overlap)
    if f > denoiser.window:
        raise WindowExceeded(f"window f={f} exceeds denoiser window {denoiser.window}")

    def run(j):
        start, end = layout.windows[j]
        win_rng = rng.split(j) if rng is not None else None
        return _denoise_window(z[start:end], denoiser, t, t_prev, schedule, eta, win_rng, cond)

    results = _map(executor, run, range(len(layout.windows)))
    total = np.zeros_like(z)
    count = np.zeros(z.shape[0])
    # accumulate in window order so the sum is independent of scheduling
    for (start, end), out in zip(layout.windows, results):
        total[start:end] += out
        count[start:end] += 1
    return total / count[:, None]


def step_layout(strategy, L, k):
    """The bricks or windows used at step ``k`` on a latent of ``L`` frames."""
    if strategy.kind == UNTILED:
        return build_plan(BrickConfig(f=L, stride=0, L=L), k)
    if strategy.kind == SLIDING_WINDOW:
        return sliding_windows(L, strategy.f, strategy.window_overlap)
    stride = strategy.stride if strategy.kind == BRICK else 0
    return build_plan(BrickConfig(f=strategy.f, stride=stride, L=L), k)


def check_denoiser(strategy, denoiser, L):
    need = L if strategy.kind == UNTILED else strategy.f
    if denoiser.window < need:
        raise WindowExceeded(
            f"{strategy.kind} on {L} frames needs a denoiser window >= {need}, got {denoiser.window}")


def denoise_latent(z, strategy, schedule, ladder, denoiser, rng=None, *,
                   cond=None, workers=1, stop_after=None, callback=None):
    """Run the step loop on an already padded latent ``z``.

    ``stop_after`` limits the number of steps; ``callback(k, z)`` sees the
    latent after every step.
    """
    z = as_frames(z)
    L = z.shape[0]
    check_denoiser(strategy, denoiser, L)
    if strategy.eta > 0 and rng is None:
        raise ValueError("eta > 0 needs an rng")
    n_steps = ladder.S if stop_after is None else min(stop_after, ladder.S)
    pool = ThreadPoolExecutor(workers) if workers > 1 else nullcontext()
    with pool as executor:
        for k, t, t_prev in ladder.pairs():
            if k >= n_steps:
                break
            step_rng = rng.split(_STEP_KEY, k) if rng is not None else None
            layout = step_layout(strategy, L, k)
            if isinstance(layout, WindowSet):
                z = sliding_window_step(z, strategy.f, strategy.window_overlap, denoiser,
                                        t, t_prev, schedule, strategy.eta, step_rng,
                                        cond=cond, executor=executor)
            else:
                f = L if strategy.kind == UNTILED else strategy.f
                z = brick_step(z, layout, denoiser, t, t_prev, schedule, strategy.eta,
                               step_rng, cond=cond, f=f, executor=executor)
            if callback is not None:
                callback(k, z)
    return z


def initial_noise(rng, L, d):
    return rng.split(_INIT_KEY).normal((L, d))


def sample(strategy, schedule, ladder, denoiser, F, d, seed, *,
           cond=None, workers=1, pad=None, callback=None):
    """Generate ``F`` frames from pure noise.

    The initial latent has ``F + 2*pad`` frames (``pad`` defaults to the
    strategy's ``f``, untiled included) and the middle ``F`` are returned.
    """
    pad = strategy.f if pad is None else pad
    L = padded_length(F, pad)
    rng = SeededRng(seed)
    z = initial_noise(rng, L, d)
    z = denoise_latent(z, strategy, schedule, ladder, denoiser, rng,
                       cond=cond, workers=workers, callback=callback)
    return crop_middle(z, F, pad)
