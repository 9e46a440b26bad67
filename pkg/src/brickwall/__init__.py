"""Brick-to-wall tiled denoising for long sequences, with an analytic GP oracle.

A latent far longer than the denoiser's window is cut into ``f``-frame bricks
that are denoised independently. Shifting the cut by a fixed stride at every
sampler step lets neighbouring bricks exchange information; a stride of zero
is plain concatenation.
"""

from .analysis import (MetricsReport, NonlinearDenoiser, composed_operator,
                       estimate_covariance_mc, metrics, propagate_covariance,
                       step_operator)
from .brick import (BrickConfig, ExtensionRule, SegmentPlan, build_plan, crop_middle,
                    extension_rule, offset_for_step, padded_length)
from .denoiser import (Condition, GpOracleDenoiser, GpOracleParams, analytic_predict_noise,
                       gp_covariance, zero_denoiser)
from .numerics import NotPositiveDefinite, SeededRng, cholesky_factor, sample_standard_normal, solve_spd
from .sampler import (BRICK, CONCAT, SLIDING_WINDOW, UNTILED, StrategyConfig, brick_step,
                      ddim_step, sample, sliding_window_step, sliding_windows)
from .schedule import NoiseSchedule, StepLadder, build_linear_schedule, ddim_ladder

__version__ = "0.1.0"
