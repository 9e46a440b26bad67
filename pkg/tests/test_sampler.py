import numpy as np
import pytest

from brickwall.brick import BrickConfig, build_plan
from brickwall.denoiser import GpOracleDenoiser, GpOracleParams, zero_denoiser
from brickwall.numerics import SeededRng
from brickwall.sampler import (BRICK, CONCAT, KINDS, SLIDING_WINDOW, UNTILED, InvalidOverlap,
                               InvalidStrategy, InvalidTimestepPair, ShapeMismatch,
                               StrategyConfig, WindowExceeded, brick_step, ddim_step,
                               sample, sliding_window_step, sliding_windows)
from brickwall.schedule import ddim_ladder


def test_ddim_zero_noise_is_scaling(schedule):
    z = np.random.default_rng(0).standard_normal((5, 2))
    out = ddim_step(z, np.zeros_like(z), 600, 400, schedule)
    ratio = np.sqrt(schedule.alpha_bar[400] / schedule.alpha_bar[600])
    np.testing.assert_allclose(out, ratio * z, rtol=1e-13)


def test_ddim_final_step_returns_clean_estimate(schedule):
    rng = np.random.default_rng(1)
    z, eps = rng.standard_normal((2, 5, 2))
    a = schedule.alpha_bar[20]
    out = ddim_step(z, eps, 20, 0, schedule, eta=0.0)
    np.testing.assert_allclose(out, (z - np.sqrt(1 - a) * eps) / np.sqrt(a), rtol=1e-13)


def test_ddim_final_step_stochastic_adds_nothing(schedule):
    # sigma vanishes when alpha_bar_prev = 1
    z = np.ones((3, 1))
    rng = SeededRng(0)
    out = ddim_step(z, np.zeros_like(z), 20, 0, schedule, eta=1.0, rng=rng)
    np.testing.assert_allclose(out, z / np.sqrt(schedule.alpha_bar[20]))
    assert rng.position == 0


def test_ddim_shape_preserved(schedule):
    out = ddim_step(np.ones((5, 2)), np.zeros((5, 2)), 10, 5, schedule, eta=0.5, rng=SeededRng(1))
    assert out.shape == (5, 2)


def test_ddim_deterministic_consumes_no_randomness(schedule):
    rng = SeededRng(3)
    ddim_step(np.ones((4, 2)), np.ones((4, 2)), 10, 5, schedule, eta=0.0, rng=rng)
    assert rng.position == 0


def test_ddim_stochastic_matches_formula(schedule):
    z = np.random.default_rng(2).standard_normal((6, 3))
    eps = np.random.default_rng(3).standard_normal((6, 3))
    t, tp, eta = 700, 500, 0.7
    out = ddim_step(z, eps, t, tp, schedule, eta=eta, rng=SeededRng(9))
    xi = SeededRng(9).normal((6, 3))
    a, ap = schedule.alpha_bar[t], schedule.alpha_bar[tp]
    sigma = eta * np.sqrt((1 - ap) / (1 - a) * (1 - a / ap))
    x0 = (z - np.sqrt(1 - a) * eps) / np.sqrt(a)
    ref = np.sqrt(ap) * x0 + np.sqrt(1 - ap - sigma**2) * eps + sigma * xi
    np.testing.assert_allclose(out, ref, rtol=1e-12)


def test_ddim_errors(schedule):
    with pytest.raises(ShapeMismatch):
        ddim_step(np.ones((5, 2)), np.ones((4, 2)), 10, 5, schedule)
    with pytest.raises(InvalidTimestepPair):
        ddim_step(np.ones((5, 2)), np.ones((5, 2)), 5, 5, schedule)
    with pytest.raises(InvalidTimestepPair):
        ddim_step(np.ones((5, 2)), np.ones((5, 2)), 1001, 5, schedule)


def test_strategy_validation():
    with pytest.raises(InvalidStrategy):
        StrategyConfig(kind="fifo")
    with pytest.raises(InvalidStrategy):
        StrategyConfig(kind=BRICK, f=16, stride=16)
    with pytest.raises(InvalidOverlap):
        StrategyConfig(kind=SLIDING_WINDOW, f=16, overlap=0)
    with pytest.raises(InvalidOverlap):
        StrategyConfig(kind=SLIDING_WINDOW, f=16, overlap=16)
    assert StrategyConfig(kind=SLIDING_WINDOW, f=16).window_overlap == 8
    # untiled ignores stride entirely
    StrategyConfig(kind=UNTILED, f=4, stride=10)


def test_brick_single_segment_equals_untiled(schedule, oracle16):
    z = np.random.default_rng(4).standard_normal((16, 3))
    plan = build_plan(BrickConfig(f=16, stride=3, L=16), 5)
    out = brick_step(z, plan, oracle16, 800, 780, schedule)
    ref = ddim_step(z, oracle16.predict(z, 800), 800, 780, schedule)
    assert out.tobytes() == ref.tobytes()


def test_brick_zero_denoiser_scales_every_frame(schedule):
    z = np.random.default_rng(5).standard_normal((35, 2))
    plan = build_plan(BrickConfig(f=16, stride=1, L=35), 3)
    assert plan.segments == ((0, 3), (3, 19), (19, 35))
    out = brick_step(z, plan, zero_denoiser(16), 900, 880, schedule)
    ratio = np.sqrt(schedule.alpha_bar[880] / schedule.alpha_bar[900])
    np.testing.assert_allclose(out, ratio * z, rtol=1e-13)


def test_brick_short_segments_use_extended_window(schedule, oracle16):
    z = np.random.default_rng(6).standard_normal((34, 1))
    plan = build_plan(BrickConfig(f=16, stride=1, L=34), 3)
    out = brick_step(z, plan, oracle16, 500, 480, schedule)
    first = ddim_step(z[0:16], oracle16.predict(z[0:16], 500), 500, 480, schedule)
    last = ddim_step(z[18:34], oracle16.predict(z[18:34], 500), 500, 480, schedule)
    np.testing.assert_array_equal(out[0:3], first[0:3])
    np.testing.assert_array_equal(out[19:34], last[1:16])


def test_brick_order_and_workers_invariant(schedule, oracle16):
    from concurrent.futures import ThreadPoolExecutor

    z = np.random.default_rng(7).standard_normal((80, 4))
    plan = build_plan(BrickConfig(f=16, stride=1, L=80), 5)
    args = (z, plan, oracle16, 700, 680, schedule, 1.0)
    ref = brick_step(*args, SeededRng(1).split(1, 5))
    rev = brick_step(*args, SeededRng(1).split(1, 5), order=list(range(len(plan.segments)))[::-1])
    assert ref.tobytes() == rev.tobytes()
    for w in (2, 4, 8):
        with ThreadPoolExecutor(w) as pool:
            par = brick_step(*args, SeededRng(1).split(1, 5), executor=pool)
        assert ref.tobytes() == par.tobytes()


def test_brick_window_exceeded(schedule):
    plan = build_plan(BrickConfig(f=16, stride=1, L=40), 2)
    with pytest.raises(WindowExceeded):
        brick_step(np.ones((40, 1)), plan, zero_denoiser(8), 10, 5, schedule)


def test_sliding_windows_layout():
    assert sliding_windows(40, 16, 8).windows == ((0, 16), (8, 24), (16, 32), (24, 40))
    # final window clamped to end at L
    assert sliding_windows(30, 16, 8).windows == ((0, 16), (8, 24), (14, 30))
    with pytest.raises(InvalidOverlap):
        sliding_windows(40, 16, 0)


def test_sliding_single_window_equals_untiled(schedule, oracle16):
    z = np.random.default_rng(8).standard_normal((16, 2))
    out = sliding_window_step(z, 16, 8, oracle16, 300, 280, schedule)
    ref = ddim_step(z, oracle16.predict(z, 300), 300, 280, schedule)
    np.testing.assert_allclose(out, ref, rtol=0, atol=0)


def test_sliding_averaging_halves_injected_variance(schedule):
    # windows [0,16) and [8,24); z = 0 so the output is pure sigma * xi
    d = 40000
    t, tp = 600, 580
    out = sliding_window_step(np.zeros((24, d)), 16, 8, zero_denoiser(16), t, tp, schedule,
                              eta=1.0, rng=SeededRng(0))
    a, ap = schedule.alpha_bar[t], schedule.alpha_bar[tp]
    sigma2 = (1 - ap) / (1 - a) * (1 - a / ap)
    var = (out**2).mean(axis=1) / sigma2
    se = np.sqrt(2.0 / d)
    np.testing.assert_allclose(var[8:16], 0.5, atol=3 * se)
    np.testing.assert_allclose(var[:8], 1.0, atol=6 * se)
    np.testing.assert_allclose(var[16:], 1.0, atol=6 * se)


def tiled(kind, f=16, stride=1, eta=0.0):
    return StrategyConfig(kind=kind, f=f, stride=stride, eta=eta)


@pytest.mark.parametrize("eta", [0.0, 1.0])
def test_stride_zero_is_concat(schedule, ladder50, oracle16, eta):
    for seed in range(3):
        a = sample(tiled(BRICK, stride=0, eta=eta), schedule, ladder50, oracle16, 48, 4, seed)
        b = sample(tiled(CONCAT, eta=eta), schedule, ladder50, oracle16, 48, 4, seed)
        assert a.tobytes() == b.tobytes()


def test_single_brick_equals_untiled(schedule, ladder50):
    den = GpOracleDenoiser(GpOracleParams(0.9, 24, 2), schedule)
    a = sample(tiled(BRICK, f=24, stride=5), schedule, ladder50, den, 20, 2, 3, pad=0)
    b = sample(tiled(UNTILED, f=24), schedule, ladder50, den, 20, 2, 3, pad=0)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("kind", KINDS)
def test_zero_denoiser_closed_form(schedule, ladder50, kind):
    from brickwall.sampler import initial_noise

    den = zero_denoiser(80)
    out = sample(tiled(kind), schedule, ladder50, den, 48, 3, 11)
    z0 = initial_noise(SeededRng(11), 80, 3)[16:64]
    scale = np.sqrt(schedule.alpha_bar[0] / schedule.alpha_bar[1000])
    np.testing.assert_allclose(out, scale * z0, rtol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("eta", [0.0, 0.5])
def test_sample_shape_finite_deterministic(schedule, oracle80, kind, eta):
    ladder = ddim_ladder(1000, 10)
    st = tiled(kind, eta=eta)
    a = sample(st, schedule, ladder, oracle80, 30, 2, 5)
    b = sample(st, schedule, ladder, oracle80, 30, 2, 5, workers=4)
    assert a.shape == (30, 2)
    assert np.isfinite(a).all()
    assert a.tobytes() == b.tobytes()


def test_untiled_needs_wide_window(schedule, ladder50, oracle16):
    with pytest.raises(WindowExceeded):
        sample(tiled(UNTILED), schedule, ladder50, oracle16, 48, 1, 0)


def test_sample_regression(schedule, ladder50, oracle16):
    # locked after checking against the exact composed operator (max diff 2.6e-15)
    out = sample(tiled(BRICK), schedule, ladder50, oracle16, 48, 4, seed=2024)
    np.testing.assert_allclose(out[0], [0.946009865344979, -0.6295656971860868,
                                        1.3552593595246347, -0.13197909565974353], rtol=1e-9)
    np.testing.assert_allclose(out[-1], [0.7394256483672953, 0.01755155388814287,
                                         -1.0817341112557728, -0.863620003723831], rtol=1e-9)
    assert out.sum() == pytest.approx(-23.356542416730967, rel=1e-9)
