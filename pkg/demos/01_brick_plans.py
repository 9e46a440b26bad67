"""
Brick plans: how the latent is sliced at each step
==================================================

A 16-frame denoiser cannot see a 48-frame latent at once. Brick-to-wall
sampling slices the (padded) latent into 16-frame bricks and shifts the cut by
``stride`` frames every step, so no junction stays in the same place.
"""

# %%
from brickwall import BrickConfig, build_plan, extension_rule, padded_length

F, f = 48, 16
L = padded_length(F, f)
print(f"target frames F={F}, window f={f}, padded latent L={L}")

# %%
# With stride 1 the offset walks through 0, 1, 2, ... and wraps at f.
cfg = BrickConfig(f=f, stride=1, L=L)
for k in (0, 1, 2, 15, 16, 17):
    plan = build_plan(cfg, k)
    print(k, plan.offset, plan.segments)

# %%
# Short bricks at the ends are denoised on a full window; only their own
# frames are kept. The first extends forward, the last one backward.
plan = build_plan(cfg, 3)
for seg in (plan.segments[0], plan.segments[-1]):
    rule = extension_rule(seg, L, f)
    print(f"segment {seg}: denoise {rule.extended_range}, keep {rule.keep_range}")

# %%
# Stride 0 never moves the cut: this is plain concatenation of clips.
still = BrickConfig(f=f, stride=0, L=L)
print({build_plan(still, k).segments for k in range(50)})
