"""
Comparing tiling strategies with exact covariances
==================================================

With deterministic DDIM and a linear denoiser every step is a matrix, so the
covariance of generated frames is known exactly. The ideal answer is the
AR(1) prior itself; each strategy's deviation from it tells how consistent
its long sequences are, especially across the 16-frame junctions.
"""

# %%
import numpy as np

from brickwall import (BRICK, CONCAT, SLIDING_WINDOW, UNTILED, GpOracleDenoiser, GpOracleParams,
                       StrategyConfig, build_linear_schedule, ddim_ladder, gp_covariance,
                       metrics, propagate_covariance)

F, f, rho = 48, 16, 0.9
schedule = build_linear_schedule()
ladder = ddim_ladder(1000, 50)
target = gp_covariance(F, rho)

results = {}
for kind in (UNTILED, CONCAT, SLIDING_WINDOW, BRICK):
    window = F + 2 * f if kind == UNTILED else f
    den = GpOracleDenoiser(GpOracleParams(rho, window, 1), schedule)
    cov = propagate_covariance(StrategyConfig(kind, f, stride=1), schedule, ladder, den, F)
    results[kind] = cov
    rep = metrics(cov, target, f)
    print(f"{kind:15s} junction error {rep.cov_error_boundary:6.3f}  "
          f"junction jump {rep.mean_boundary_jump:5.3f} (ideal {2 * (1 - rho):.3f})")

# %%
# Correlation between the last frame of one clip and the first of the next:
# zero for concatenation, close to rho for brick-to-wall.
for kind, cov in results.items():
    print(f"{kind:15s} corr(15, 16) = {cov[15, 16] / np.sqrt(cov[15, 15] * cov[16, 16]):.3f}")

# %%
try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, axes = plt.subplots(1, 5, figsize=(16, 3.4))
    for ax, (name, mat) in zip(axes, [("target", target), *results.items()]):
        ax.imshow(mat, vmin=0, vmax=1, cmap="viridis")
        ax.set_title(name)
        ax.set_xticks([]), ax.set_yticks([])
    fig.tight_layout()
    fig.savefig("strategy_covariances.png", dpi=100)
    print("wrote strategy_covariances.png")
