"""Segment geometry for brick-to-wall denoising.

At sampler step ``k`` the latent of ``L`` frames is cut into bricks whose
boundaries sit at ``offset + i*f`` with ``offset = (stride * k) mod f``. Short
bricks at either end are denoised on a full ``f``-frame window and only their
own frames are written back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidBrickConfig(ValueError):
    pass


class LatentTooShort(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class BrickConfig:
    f: int
    stride: int
    L: int

    def __post_init__(self):
        if self.f < 1:
            raise InvalidBrickConfig(f"segment length f must be >= 1, got {self.f}")
        if not 0 <= self.stride < self.f:
            raise InvalidBrickConfig(
                f"stride must satisfy 0 <= stride < f={self.f}, got {self.stride}")
        if self.L < 1:
            raise InvalidBrickConfig(f"latent length L must be >= 1, got {self.L}")


@dataclass(frozen=True)
class SegmentPlan:
    step_index: int
    offset: int
    segments: tuple  # of (start, end) half-open ranges

    @property
    def length(self):
        return self.segments[-1][1]


@dataclass(frozen=True)
class ExtensionRule:
    extended_range: tuple
    keep_range: tuple


def offset_for_step(stride, f, k):
    if not 0 <= stride < f:
        raise InvalidBrickConfig(f"stride must satisfy 0 <= stride < f={f}, got {stride}")
    if k < 0:
        raise InvalidBrickConfig(f"step index must be >= 0, got {k}")
    return (stride * k) % f


def build_plan(config, k):
    f, L = config.f, config.L
    offset = offset_for_step(config.stride, f, k)
    if L <= f:
        return SegmentPlan(k, offset, ((0, L),))
    bounds = [0]
    if offset > 0:
        bounds.append(offset)
    bounds.extend(range(offset + f, L, f))
    bounds.append(L)
    segments = tuple(zip(bounds[:-1], bounds[1:]))
    return SegmentPlan(k, offset, segments)


def extension_rule(segment, L, f):
    """Full-length window around a short first or last segment.

    The first segment extends forward to ``[0, f)``, the last one backward to
    ``[L - f, L)``.
    """
    start, end = segment
    if L < f:
        raise LatentTooShort(f"latent of {L} frames is shorter than the window f={f}")
    if end - start >= f:
        raise ValueError(f"segment {segment} is not shorter than f={f}")
    if start == 0:
        return ExtensionRule((0, f), (start, end))
    if end == L:
        return ExtensionRule((L - f, L), (start, end))
    raise ValueError(f"short segment {segment} is neither first nor last in [0, {L})")


def padded_length(F, f):
    return F + 2 * f


def crop_middle(seq, F, f):
    seq = np.asarray(seq)
    if seq.shape[0] != F + 2 * f:
        raise LengthMismatch(f"expected {F + 2 * f} frames, got {seq.shape[0]}")
    return seq[f:f + F]
