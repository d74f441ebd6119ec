import math

import numpy as np
import pytest
from scipy import integrate, stats

from barriercc.errors import ParameterDomainError
from barriercc.rng import SeedSpec, make_stream
from barriercc.simulation import (
    PathSkeleton,
    bridge_cross_prob,
    continuous_breach,
    continuous_max_indicator,
    continuous_min_indicator,
    sample_bridge_hitting_time,
    sample_bridge_maximum,
    sample_increment,
    simulate_grid_path,
    simulate_grid_paths,
    simulate_jump_skeleton,
    simulate_jump_skeletons,
)

from .oracles import drifted_bm_max_tail


def _stream(seed=0, stream_id=0):
    return make_stream(SeedSpec(seed, stream_id))


def test_grid_path_shape(model):
    path = simulate_grid_path(model, 1.0, 8, _stream())
    assert path.x.shape == (9,)
    assert path.x[0] == 0.0
    np.testing.assert_allclose(path.times, np.linspace(0.0, 1.0, 9))
    assert path.maximum == path.x.max()
    assert path.terminal == path.x[-1]


def test_grid_extremes_include_the_start(model):
    batch = simulate_grid_paths(model, 1.0, 1, 1000, _stream(), keep_path=True)
    np.testing.assert_array_equal(batch.maximum, np.maximum(0.0, batch.terminal))
    np.testing.assert_array_equal(batch.minimum, np.minimum(0.0, batch.terminal))
    assert batch.extreme("down") is batch.minimum
    assert simulate_grid_paths(model, 1.0, 4, 10, _stream()).x is None


def test_increment_moments(model):
    dt = 0.25
    x = sample_increment(model, dt, _stream(1), 10**6)
    mean = model.gamma * dt + model.lam * dt * model.jumps.mean()
    assert abs(x.mean() - mean) < 4 * x.std() / 1000
    growth = np.exp(x)
    assert abs(growth.mean() - math.exp(model.r * dt)) < 4 * growth.std() / 1000


def test_diffusion_increments_are_gaussian(diffusion):
    x = sample_increment(diffusion, 0.5, _stream(2), 10**5)
    sd = diffusion.sigma * math.sqrt(0.5)
    assert stats.kstest(x, "norm", args=(diffusion.gamma * 0.5, sd)).pvalue > 0.001


def test_domain_errors(model):
    with pytest.raises(ParameterDomainError):
        sample_increment(model, 0.0, _stream())
    with pytest.raises(ParameterDomainError):
        simulate_grid_paths(model, 1.0, 0, 10, _stream())
    with pytest.raises(ParameterDomainError):
        bridge_cross_prob(0.0, 0.0, 0.0, 0.3, 0.1)


def test_skeleton_structure(model):
    batch = simulate_jump_skeletons(model, 1.0, 2000, _stream(3))
    for i in range(20):
        path = batch.path(i)
        assert path.times[0] == 0.0 and path.times[-1] == 1.0
        assert np.all(np.diff(path.times) > 0.0)
        assert path.n_jumps == batch.counts[i]
        assert path.pre[-1] == path.post[-1] == batch.terminal[i]
        np.testing.assert_allclose(path.jumps, path.post[1:-1] - path.pre[1:-1])
    events = batch.counts + 2
    assert abs(events.mean() - (model.lam + 2)) < 4 * events.std() / math.sqrt(events.size)


def test_skeleton_without_jumps(diffusion):
    path = simulate_jump_skeleton(diffusion, 2.0, _stream(4))
    np.testing.assert_array_equal(path.times, [0.0, 2.0])
    assert path.n_jumps == 0


def test_skeleton_and_grid_share_the_terminal_law(model):
    skeleton = simulate_jump_skeletons(model, 1.0, 20000, _stream(5)).terminal
    grid = simulate_grid_paths(model, 1.0, 4, 20000, _stream(6)).terminal
    assert stats.ks_2samp(skeleton, grid).pvalue > 0.001


def test_bridge_cross_prob():
    assert bridge_cross_prob(0.0, 0.0, 1.0, 1.0, 1.0) == pytest.approx(math.exp(-2.0))
    assert bridge_cross_prob(0.0, 1.5, 1.0, 1.0, 1.0) == 1.0
    assert bridge_cross_prob(0.0, 0.0, 1.0, 1.0, 0.0) == 1.0
    h = np.linspace(0.1, 2.0, 50)
    assert np.all(np.diff(bridge_cross_prob(0.0, 0.0, 1.0, 0.3, h)) < 0.0)


def test_bridge_maximum_law():
    stream = _stream(7)
    m = sample_bridge_maximum(np.zeros(10**5), np.full(10**5, 0.1), 1.0, 0.5, stream)
    assert np.all(m >= 0.1)
    for h in (0.2, 0.5, 0.8):
        freq = float(np.mean(m >= h))
        expected = bridge_cross_prob(0.0, 0.1, 1.0, 0.5, h)
        assert abs(freq - expected) < 4 * math.sqrt(expected * (1 - expected) / m.size) + 1e-4


@pytest.mark.parametrize("end", [0.0, -0.4, 0.3])
def test_bridge_hitting_time_mean(end):
    a, h, dt, sigma = 0.0, 0.3, 1.0, 0.5
    c, e = h - a, h - end

    def density(s):
        passage = c / (sigma * math.sqrt(2 * math.pi * s**3)) * math.exp(-(c**2) / (2 * sigma**2 * s))
        rest = stats.norm.pdf(end - h, scale=sigma * math.sqrt(dt - s))
        return passage * rest / stats.norm.pdf(end - a, scale=sigma * math.sqrt(dt))

    mass = integrate.quad(density, 0.0, dt)[0]
    assert mass == pytest.approx(math.exp(-2 * c * e / (sigma**2 * dt)), rel=1e-6)
    expected = integrate.quad(lambda s: s * density(s), 0.0, dt)[0] / mass

    tau = sample_bridge_hitting_time(np.full(10**5, a), np.full(10**5, end), dt, sigma, h, _stream(8))
    assert np.all((tau > 0.0) & (tau < dt))
    assert abs(tau.mean() - expected) < 4 * tau.std() / math.sqrt(tau.size)


def test_hitting_time_of_a_started_bridge():
    assert sample_bridge_hitting_time(0.5, 0.0, 1.0, 0.3, 0.4, _stream()) == 0.0


def _skeleton(times, pre, post):
    times = np.asarray(times, float)
    return PathSkeleton(maturity=float(times[-1]), times=times, pre=np.asarray(pre, float), post=np.asarray(post, float))


def test_jump_over_the_barrier_breaches():
    path = _skeleton([0.0, 0.5, 1.0], [0.0, 0.0, -0.1], [0.0, 0.3, -0.1])
    assert continuous_max_indicator(path, 0.2, 1e-6, _stream())
    assert not continuous_max_indicator(path, 0.5, 1e-6, _stream())
    down = _skeleton([0.0, 0.5, 1.0], [0.0, 0.0, 0.1], [0.0, -0.3, 0.1])
    assert continuous_min_indicator(down, -0.2, 1e-6, _stream())
    assert not continuous_min_indicator(down, -0.5, 1e-6, _stream())


def test_continuous_max_matches_reflection(diffusion):
    n, h = 2 * 10**5, 0.2
    stream = _stream(9)
    batch = simulate_jump_skeletons(diffusion, 1.0, n, stream)
    freq = continuous_breach(batch, h, diffusion.sigma, stream).breached.mean()
    expected = drifted_bm_max_tail(h, diffusion.gamma, diffusion.sigma, 1.0)
    assert abs(freq - expected) < 4 * math.sqrt(expected * (1 - expected) / n)


def test_continuous_min_matches_reflection(diffusion):
    n, h = 2 * 10**5, -0.25
    stream = _stream(10)
    batch = simulate_jump_skeletons(diffusion, 1.0, n, stream)
    freq = continuous_breach(batch, h, diffusion.sigma, stream, direction="down").breached.mean()
    expected = drifted_bm_max_tail(-h, -diffusion.gamma, diffusion.sigma, 1.0)
    assert abs(freq - expected) < 4 * math.sqrt(expected * (1 - expected) / n)


def test_batch_and_single_path_breach_agree(model):
    batch = simulate_jump_skeletons(model, 1.0, 200, _stream(11))
    whole = continuous_breach(batch, 0.15, model.sigma, _stream(12)).breached
    # one uniform per segment in path order, so a replay path by path sees the same numbers
    replay = _stream(12)
    single = [continuous_max_indicator(batch.path(i), 0.15, model.sigma, replay) for i in range(batch.size)]
    np.testing.assert_array_equal(whole, single)


def test_hit_times_lie_in_the_horizon(model):
    stream = _stream(13)
    batch = simulate_jump_skeletons(model, 1.0, 5000, stream)
    breach = continuous_breach(batch, 0.1, model.sigma, stream, with_hit_time=True)
    assert np.all(np.isinf(breach.hit_time[~breach.breached]))
    hit = breach.hit_time[breach.breached]
    assert np.all((hit >= 0.0) & (hit <= 1.0))
