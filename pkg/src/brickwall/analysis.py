"""Exact covariance propagation, Monte Carlo estimates and consistency metrics.

With ``eta = 0`` and a linear noise predictor every sampler step is a linear
map ``z_prev = A_k z`` applied to each channel. Composing the ``A_k`` gives
the output covariance of the whole pipeline in closed form, with the initial
latent distributed as ``N(0, I)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .brick import crop_middle, extension_rule, padded_length
from .numerics import SeededRng
from .sampler import (UNTILED, WindowSet, check_denoiser, denoise_latent,
                      initial_noise, step_layout)

LINEARITY_TOL = 1e-10
_MC_KEY = 2


class NonlinearDenoiser(ValueError):
    pass


class SizeMismatch(ValueError):
    pass


def ddim_coefficients(t, t_prev, schedule):
    """``(c_z, c_eps)`` of the deterministic update ``z_prev = c_z z + c_eps eps``."""
    a_t = float(schedule.alpha_bar[t])
    a_prev = float(schedule.alpha_bar[t_prev])
    c_z = np.sqrt(a_prev / a_t)
    c_eps = np.sqrt(1.0 - a_prev) - np.sqrt(a_prev * (1.0 - a_t) / a_t)
    return c_z, c_eps


def check_linearity(denoiser, n, t, cond=None, seed=12345):
    rng = np.random.default_rng(seed)
    z1, z2 = rng.standard_normal((2, n, 2))
    alpha, beta = rng.standard_normal(2)
    lhs = denoiser.predict(alpha * z1 + beta * z2, t, cond)
    rhs = alpha * denoiser.predict(z1, t, cond) + beta * denoiser.predict(z2, t, cond)
    scale = max(np.linalg.norm(rhs), np.linalg.norm(z1) + np.linalg.norm(z2))
    if np.linalg.norm(lhs - rhs) > LINEARITY_TOL * scale:
        raise NonlinearDenoiser(f"denoiser failed the linearity probe at n={n}, t={t}")


class _WindowOperators:
    """Per-``(n, t, t_prev)`` matrices of one deterministic window update."""

    def __init__(self, denoiser, schedule, cond=None):
        self.denoiser = denoiser
        self.schedule = schedule
        self.cond = cond
        self._cache = {}

    def __call__(self, n, t, t_prev):
        key = (n, t, t_prev)
        if key not in self._cache:
            check_linearity(self.denoiser, n, t, self.cond)
            eps_op = np.column_stack([
                self.denoiser.predict(col[:, None], t, self.cond)[:, 0]
                for col in np.eye(n)
            ])
            c_z, c_eps = ddim_coefficients(t, t_prev, self.schedule)
            self._cache[key] = c_z * np.eye(n) + c_eps * eps_op
        return self._cache[key]


def step_operator(layout, denoiser, t, t_prev, schedule, f=None, *, cond=None, _ops=None):
    """Matrix ``A`` with ``A @ z`` equal to one deterministic tiled step on ``z``.

    ``layout`` is a :class:`~brickwall.brick.SegmentPlan` or a
    :class:`~brickwall.sampler.WindowSet`; ``f`` is the brick extension length
    (the denoiser window by default).
    """
    ops = _ops or _WindowOperators(denoiser, schedule, cond)
    if isinstance(layout, WindowSet):
        L = layout.length
        acc = np.zeros((L, L))
        count = np.zeros(L)
        for a, b in layout.windows:
            acc[a:b, a:b] += ops(b - a, t, t_prev)
            count[a:b] += 1
        return acc / count[:, None]

    L = layout.length
    f = denoiser.window if f is None else f
    A = np.zeros((L, L))
    for start, end in layout.segments:
        if end - start < f and L >= f:
            a, b = extension_rule((start, end), L, f).extended_range
        else:
            a, b = start, end
        W = ops(b - a, t, t_prev)
        A[start:end, a:b] = W[start - a:end - a]
    return A


def composed_operator(strategy, schedule, ladder, denoiser, L, *, cond=None):
    """``A_{S-1} ... A_1 A_0`` on the padded latent of ``L`` frames."""
    if strategy.eta != 0:
        raise NonlinearDenoiser("exact propagation needs deterministic sampling (eta = 0)")
    check_denoiser(strategy, denoiser, L)
    ops = _WindowOperators(denoiser, schedule, cond)
    f = L if strategy.kind == UNTILED else strategy.f
    M = np.eye(L)
    for k, t, t_prev in ladder.pairs():
        layout = step_layout(strategy, L, k)
        M = step_operator(layout, denoiser, t, t_prev, schedule, f, cond=cond, _ops=ops) @ M
    return M


def propagate_covariance(strategy, schedule, ladder, denoiser, F, d=1, *, pad=None, crop=True,
                         cond=None):
    """Exact per-channel output covariance ``M M^T``, cropped to the middle ``F`` frames.

    Channels are i.i.d. so ``d`` does not change the result.
    """
    pad = strategy.f if pad is None else pad
    L = padded_length(F, pad)
    M = composed_operator(strategy, schedule, ladder, denoiser, L, cond=cond)
    cov = M @ M.T
    cov = 0.5 * (cov + cov.T)
    if not crop:
        return cov
    return crop_middle(crop_middle(cov, F, pad).T, F, pad).T.copy()


def estimate_covariance_mc(strategy, schedule, ladder, denoiser, F, d, N, seed, *,
                           workers=1, chunk=250, pad=None, stop_after=None, cond=None):
    """Empirical second moment over ``N`` runs, channels pooled as replicas.

    Runs are simulated in fixed chunks of ``chunk`` runs (stacked along the
    channel axis, each chunk with its own key under ``seed``), so the estimate
    is identical for any ``workers``. With ``stop_after`` the uncropped
    padded latent after that many steps is used instead of the final output.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    pad = strategy.f if pad is None else pad
    L = padded_length(F, pad)
    check_denoiser(strategy, denoiser, L)
    root = SeededRng(seed)
    sizes = [min(chunk, N - s) for s in range(0, N, chunk)]

    def run(c):
        rng = root.split(_MC_KEY, c)
        z = initial_noise(rng, L, d * sizes[c])
        z = denoise_latent(z, strategy, schedule, ladder, denoiser, rng,
                           cond=cond, stop_after=stop_after)
        if stop_after is None:
            z = crop_middle(z, F, pad)
        return z @ z.T

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    total = np.zeros_like(parts[0])
    for p in parts:
        total += p
    return total / (N * d)


@dataclass
class MetricsReport:
    cov_error_total: float
    cov_error_boundary: float
    marginal_var_error: float
    boundary_jump: np.ndarray
    dynamic_degree: float

    @property
    def mean_boundary_jump(self):
        return float(np.mean(self.boundary_jump)) if len(self.boundary_jump) else 0.0

    def as_dict(self):
        out = asdict(self)
        out["boundary_jump"] = [float(x) for x in self.boundary_jump]
        out["mean_boundary_jump"] = self.mean_boundary_jump
        return out


def boundary_band_mask(n, f):
    """Entries ``(i, j)`` in different ``f``-blocks with ``|i - j| < f``."""
    idx = np.arange(n)
    block = idx // f
    lag = np.abs(np.subtract.outer(idx, idx))
    return (block[:, None] != block[None, :]) & (lag < f)


def pair_jump(cov, i, j):
    """``E[(z_i - z_j)^2]`` under a zero-mean covariance."""
    return cov[i, i] + cov[j, j] - 2.0 * cov[i, j]


def metrics(cov, target, f):
    """Consistency metrics of ``cov`` against ``target``.

    Block boundaries sit at the multiples of ``f`` strictly inside the
    sequence; with padding ``f`` these are the fixed concatenation junctions.
    """
    cov = np.asarray(cov, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if cov.shape != target.shape or cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise SizeMismatch(f"covariance {cov.shape} and target {target.shape} differ")
    n = cov.shape[0]
    diff = cov - target
    band = boundary_band_mask(n, f)
    jumps = np.array([pair_jump(cov, b - 1, b) for b in range(f, n, f)])
    if n > 1:
        dyn = float(np.mean([pair_jump(cov, i, i + 1) for i in range(n - 1)]))
    else:
        dyn = 0.0
    return MetricsReport(
        cov_error_total=float(np.linalg.norm(diff)),
        cov_error_boundary=float(np.linalg.norm(diff[band])),
        marginal_var_error=float(np.max(np.abs(np.diag(diff)))),
        boundary_jump=jumps,
        dynamic_degree=dyn,
    )
