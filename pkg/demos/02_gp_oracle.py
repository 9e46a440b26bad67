"""
An exact "short video model": the AR(1) Gaussian-process oracle
===============================================================

If clean latents are Gaussian with covariance ``rho**|i-j|`` across frames,
the best possible noise predictor is a fixed matrix per timestep. It plays the
role of a pretrained 16-frame model: it only ever sees its window.
"""

# %%
import numpy as np

from brickwall import GpOracleDenoiser, GpOracleParams, build_linear_schedule, gp_covariance

schedule = build_linear_schedule()
oracle = GpOracleDenoiser(GpOracleParams(rho=0.9, window=16, d=1), schedule)
print(np.round(gp_covariance(5, 0.9), 3))

# %%
# Noise the data with the forward process and check how well the oracle
# recovers the noise compared to simply guessing eps = z_t * sqrt(1 - a).
rng = np.random.default_rng(0)
low = np.linalg.cholesky(gp_covariance(16, 0.9))
for t in (50, 200, 500):
    a = schedule.alpha_bar[t]
    z0 = low @ rng.standard_normal((16, 20000))
    eps = rng.standard_normal((16, 20000))
    zt = np.sqrt(a) * z0 + np.sqrt(1 - a) * eps
    mse_oracle = np.mean((eps - oracle.predict(zt, t)) ** 2)
    mse_naive = np.mean((eps - np.sqrt(1 - a) * zt) ** 2)
    print(f"t={t:4d}  oracle mse {mse_oracle:.4f}  white-noise guess {mse_naive:.4f}")
