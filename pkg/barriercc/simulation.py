"""
Exact simulation of the jump-diffusion on monitoring grids and on jump-time skeletons,
and Brownian-bridge functionals between skeleton events.

Every sampler takes an explicit `numpy.random.Generator` and draws its numbers in a fixed
order, so that specs sharing a seed see common random numbers.
"""
import math
from typing import Literal, Optional

import numpy as np
from msgspec import Struct

from .errors import ParameterDomainError
from .model import JumpDiffusionParams, KouJumpParams
from .rng import sample_kou_jump, sample_poisson


class GridPath(Struct, frozen=True):
    """
    One path observed at the dates `kT/n`.
    """

    n: int
    maturity: float
    times: np.ndarray
    x: np.ndarray

    @property
    def maximum(self) -> float:
        return float(self.x.max())

    @property
    def minimum(self) -> float:
        return float(self.x.min())

    @property
    def terminal(self) -> float:
        return float(self.x[-1])


class GridPathBatch(Struct, frozen=True):
    """
    A block of grid paths. `x` has shape `(size, n + 1)` and is only kept on request.
    """

    n: int
    maturity: float
    terminal: np.ndarray
    maximum: np.ndarray
    minimum: np.ndarray
    x: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.terminal.shape[0])

    def extreme(self, direction: Literal["up", "down"]) -> np.ndarray:
        return self.maximum if direction == "up" else self.minimum


class PathSkeleton(Struct, frozen=True):
    """
    Event times `0 = t_0 < T_1 < ... < T_l < T` of one path with left limits (`pre`) and
    values (`post`) of X at each event. At `0` and `T` both coincide.
    """

    maturity: float
    times: np.ndarray
    pre: np.ndarray
    post: np.ndarray

    @property
    def n_jumps(self) -> int:
        return int(self.times.shape[0]) - 2

    @property
    def jumps(self) -> np.ndarray:
        return self.post[1:-1] - self.pre[1:-1]

    @property
    def terminal(self) -> float:
        return float(self.post[-1])


class SkeletonBatch(Struct, frozen=True):
    """
    A block of skeletons stored as flat segment arrays.

    Path `i` owns the segments `offsets[i]:offsets[i + 1]`; segment `s` runs from
    `start[s]` to `start[s] + dt[s]`, starts at `x0[s]`, reaches the left limit `pre[s]`
    and ends (after the jump, if `is_jump[s]`) at `post[s]`.
    """

    maturity: float
    counts: np.ndarray
    offsets: np.ndarray
    start: np.ndarray
    dt: np.ndarray
    x0: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    is_jump: np.ndarray
    terminal: np.ndarray

    @property
    def size(self) -> int:
        return int(self.counts.shape[0])

    def path(self, i: int) -> PathSkeleton:
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        times = np.concatenate([[0.0], self.start[lo:hi] + self.dt[lo:hi]])
        times[-1] = self.maturity
        return PathSkeleton(
            maturity=self.maturity,
            times=times,
            pre=np.concatenate([[0.0], self.pre[lo:hi]]),
            post=np.concatenate([[0.0], self.post[lo:hi]]),
        )


class ContinuousBreach(Struct, frozen=True):
    breached: np.ndarray
    hit_time: Optional[np.ndarray] = None


def _check_positive(name: str, value) -> None:
    if np.any(np.asarray(value) <= 0.0):
        raise ParameterDomainError(f"{name} must be > 0")


def compound_jump_sums(counts: np.ndarray, jumps: KouJumpParams, stream: np.random.Generator) -> np.ndarray:
    """
    Sum of `counts[...]` independent jumps for every cell of `counts`.
    """
    counts = np.asarray(counts)
    flat = counts.ravel()
    total = int(flat.sum())
    if total == 0:
        return np.zeros(counts.shape)
    sizes = sample_kou_jump(jumps, stream, total)
    cells = np.repeat(np.arange(flat.size), flat)
    return np.bincount(cells, weights=sizes, minlength=flat.size).reshape(counts.shape)


def sample_increment(model: JumpDiffusionParams, dt: float, stream: np.random.Generator, size=None):
    """
    Exact draw of `X_{t+dt} - X_t`: drift, Gaussian diffusion and a compound Poisson sum.
    """
    _check_positive("dt", dt)
    z = stream.standard_normal(size)
    rv = model.gamma * dt + model.sigma * math.sqrt(dt) * z
    if model.lam > 0.0:
        counts = sample_poisson(model.lam * dt, stream, size)
        rv = rv + compound_jump_sums(counts, model.jumps, stream)
    return rv if np.ndim(rv) else float(rv)


def simulate_grid_paths(
    model: JumpDiffusionParams,
    maturity: float,
    n: int,
    size: int,
    stream: np.random.Generator,
    *,
    keep_path: bool = False,
) -> GridPathBatch:
    if n < 1:
        raise ParameterDomainError(f"number of monitoring intervals must be >= 1, got {n}")
    _check_positive("maturity", maturity)
    increments = sample_increment(model, maturity / n, stream, (size, n))
    x = np.zeros((size, n + 1))
    np.cumsum(increments, axis=1, out=x[:, 1:])
    return GridPathBatch(
        n=n,
        maturity=maturity,
        terminal=x[:, -1].copy(),
        maximum=x.max(axis=1),
        minimum=x.min(axis=1),
        x=x if keep_path else None,
    )


def simulate_grid_path(model: JumpDiffusionParams, maturity: float, n: int, stream: np.random.Generator) -> GridPath:
    batch = simulate_grid_paths(model, maturity, n, 1, stream, keep_path=True)
    return GridPath(n=n, maturity=maturity, times=np.linspace(0.0, maturity, n + 1), x=batch.x[0])


def simulate_jump_skeletons(
    model: JumpDiffusionParams, maturity: float, size: int, stream: np.random.Generator
) -> SkeletonBatch:
    """
    Draw `N_T`, the ordered jump times, the Gaussian increments between events and the
    jump sizes, for `size` paths at once.
    """
    _check_positive("maturity", maturity)
    counts = np.asarray(sample_poisson(model.lam * maturity, stream, size), dtype=np.int64)
    n_jumps = int(counts.sum())
    seg_counts = counts + 1
    offsets = np.zeros(size + 1, dtype=np.int64)
    np.cumsum(seg_counts, out=offsets[1:])
    n_seg = int(offsets[-1])
    first, last = offsets[:-1], offsets[1:] - 1

    is_jump = np.ones(n_seg, dtype=bool)
    is_jump[last] = False
    times = stream.uniform(0.0, maturity, n_jumps)
    owner = np.repeat(np.arange(size), counts)
    end = np.full(n_seg, maturity)
    end[is_jump] = times[np.lexsort((times, owner))]
    start = np.empty(n_seg)
    start[1:] = end[:-1]
    start[first] = 0.0
    dt = end - start

    diffusion = model.gamma * dt + model.sigma * np.sqrt(dt) * stream.standard_normal(n_seg)
    y = np.zeros(n_seg)
    if n_jumps:
        y[is_jump] = sample_kou_jump(model.jumps, stream, n_jumps)
    increments = diffusion + y

    # cumulative sums restarted at every path
    post = np.cumsum(increments)
    post -= np.repeat(post[first] - increments[first], seg_counts)
    pre = post - y
    x0 = np.empty(n_seg)
    x0[1:] = post[:-1]
    x0[first] = 0.0
    return SkeletonBatch(
        maturity=maturity,
        counts=counts,
        offsets=offsets,
        start=start,
        dt=dt,
        x0=x0,
        pre=pre,
        post=post,
        is_jump=is_jump,
        terminal=post[last].copy(),
    )


def simulate_jump_skeleton(model: JumpDiffusionParams, maturity: float, stream: np.random.Generator) -> PathSkeleton:
    return simulate_jump_skeletons(model, maturity, 1, stream).path(0)


def bridge_cross_prob(x_start, x_end, dt, sigma: float, h):
    """
    Probability that a Brownian bridge from `x_start` to `x_end` over `dt` with volatility
    `sigma` reaches `h`: `exp(-2(h - x_start)(h - x_end) / (sigma^2 dt))` below both
    endpoints, 1 otherwise. The drift does not enter once both endpoints are known.
    """
    _check_positive("dt", dt)
    _check_positive("sigma", sigma)
    x_start, x_end, h = np.asarray(x_start, float), np.asarray(x_end, float), np.asarray(h, float)
    reached = np.maximum(x_start, x_end) >= h
    with np.errstate(over="ignore", invalid="ignore"):
        prob = np.exp(-2.0 * (h - x_start) * (h - x_end) / (sigma * sigma * np.asarray(dt, float)))
    rv = np.where(reached, 1.0, prob)
    return rv if rv.ndim else float(rv)


def sample_bridge_maximum(x_start, x_end, dt, sigma: float, stream: np.random.Generator):
    """
    Inverse-CDF draw of the maximum of a Brownian bridge given its endpoints.
    """
    _check_positive("dt", dt)
    x_start, x_end = np.asarray(x_start, float), np.asarray(x_end, float)
    e = stream.standard_exponential(np.broadcast(x_start, x_end).shape)
    rv = 0.5 * (x_start + x_end + np.sqrt(np.square(x_start - x_end) + 2.0 * sigma * sigma * dt * e))
    return rv if rv.ndim else float(rv)


def sample_bridge_hitting_time(x_start, x_end, dt, sigma: float, h, stream: np.random.Generator):
    """
    First time a Brownian bridge from `x_start` to `x_end` over `dt` reaches `h`, given that it does.

    With `c = h - x_start` and `e = h - x_end`, the ratio `u = tau / (dt - tau)` is
    inverse Gaussian with mean `c / |e|` and shape `c^2 / (sigma^2 dt)`; `e = 0` is the Levy limit.
    """
    _check_positive("dt", dt)
    x_start, x_end, h, dt = np.broadcast_arrays(*(np.asarray(v, float) for v in (x_start, x_end, h, dt)))
    c = h - x_start
    e = np.abs(h - x_end)
    started = c <= 0.0
    c = np.where(started, 1.0, c)
    shape = c * c / (sigma * sigma * dt)
    levy = e == 0.0
    mean = c / np.where(levy, 1.0, e)
    u = stream.wald(mean, shape)
    if np.any(levy):
        z = stream.standard_normal(u.shape)
        u = np.where(levy, shape / np.maximum(z * z, 1e-300), u)
    tau = np.where(started, 0.0, dt * u / (1.0 + u))
    return tau if tau.ndim else float(tau)


def continuous_breach(
    batch: SkeletonBatch,
    h: float,
    sigma: float,
    stream: np.random.Generator,
    *,
    direction: Literal["up", "down"] = "up",
    with_hit_time: bool = False,
) -> ContinuousBreach:
    """
    Continuous-monitoring breach indicator for every path of a skeleton block.

    A path breaches when a jump lands beyond the barrier or when, on some segment, an
    independent uniform falls below the bridge crossing probability. One uniform is drawn
    per segment whatever the barrier, so blocks sharing a seed stay comparable.
    """
    sign = 1.0 if direction == "up" else -1.0
    level = sign * h
    a, b, c = sign * batch.x0, sign * batch.pre, sign * batch.post
    u = stream.random(a.shape[0])
    diffusion_hit = u < bridge_cross_prob(a, b, batch.dt, sigma, level)
    jump_hit = batch.is_jump & (c >= level)
    hit = diffusion_hit | jump_hit
    first = batch.offsets[:-1]
    breached = np.logical_or.reduceat(hit, first)
    if not with_hit_time:
        return ContinuousBreach(breached=breached)

    index = np.minimum.reduceat(np.where(hit, np.arange(hit.shape[0]), hit.shape[0]), first)
    seg = index[breached]
    hit_time = np.full(batch.size, np.inf)
    times = batch.start[seg] + batch.dt[seg]
    by_bridge = diffusion_hit[seg]
    if np.any(by_bridge):
        s = seg[by_bridge]
        times[by_bridge] = batch.start[s] + sample_bridge_hitting_time(a[s], b[s], batch.dt[s], sigma, level, stream)
    hit_time[breached] = times
    return ContinuousBreach(breached=breached, hit_time=hit_time)


def _skeleton_breach(skeleton: PathSkeleton, level: float, sign: float, sigma: float, stream) -> bool:
    pre, post = sign * skeleton.pre, sign * skeleton.post
    if np.any(post[1:-1] >= level) or np.any(pre >= level) or post[0] >= level:
        # the stream still advances by one uniform per segment
        stream.random(skeleton.times.shape[0] - 1)
        return True
    dt = np.diff(skeleton.times)
    u = stream.random(dt.shape[0])
    return bool(np.any(u < bridge_cross_prob(post[:-1], pre[1:], dt, sigma, level)))


def continuous_max_indicator(skeleton: PathSkeleton, h: float, sigma: float, stream: np.random.Generator) -> bool:
    """
    `1{sup_{t<=T} X_t >= h}` for one skeleton.
    """
    return _skeleton_breach(skeleton, h, 1.0, sigma, stream)


def continuous_min_indicator(skeleton: PathSkeleton, h: float, sigma: float, stream: np.random.Generator) -> bool:
    """
    `1{inf_{t<=T} X_t <= h}`, the maximum indicator of `-X` at `-h`.
    """
    return _skeleton_breach(skeleton, -h, -1.0, sigma, stream)
