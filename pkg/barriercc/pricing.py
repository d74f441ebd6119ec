"""
Monte Carlo pricers for discretely and continuously monitored barrier options.

Every pricer runs its paths through a `BlockStream`, so an estimate depends on
`(inputs, n_paths, seed, block_size)` only. Pricers that share a seed and a sampler see the
same paths, which makes in/out parity and barrier comparisons exact on common random numbers.
"""
import logging
import math
import time
from typing import Callable, Optional

import numpy as np
from msgspec import Struct

from .errors import ParameterDomainError
from .model import (
    DEFAULT_REBATE_TIMING,
    BarrierOptionSpec,
    Continuous,
    Discrete,
    JumpDiffusionParams,
    MonitoringScheme,
    RebateTiming,
    breach_indicator,
    discounted_settlement,
    settle,
    vanilla_payoff,
)
from .simulation import (
    bridge_cross_prob,
    continuous_breach,
    sample_bridge_maximum,
    sample_increment,
    simulate_grid_paths,
    simulate_jump_skeletons,
)
from .stream import DEFAULT_BLOCK_SIZE, BlockStats, BlockStream

logger = logging.getLogger(__name__)


class MCEstimate(Struct, frozen=True):
    """
    A Monte Carlo estimate. `wall_time` is informational and never part of data outputs.
    """

    mean: float
    stderr: float
    n_paths: int
    master_seed: int
    wall_time: float = 0.0

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.mean - k * self.stderr, self.mean + k * self.stderr


class GapSample(Struct, frozen=True):
    """
    Scaled gaps `sqrt(n) (M_T - M_T^n)` paired with the terminal values `X_T` of the same paths.
    """

    n: int
    gap: np.ndarray
    terminal: np.ndarray


class MeasureChangeComponents(Struct, frozen=True):
    """
    The pieces of `UOC = S0 e^{-delta T} Pbar[M_T < h, X_T > k] - K e^{-rT} P[M_T < h, X_T > k]`.

    Args:
        p: Estimate of `P[M_T < h, X_T > k]`.
        p_bar: Estimate of `Pbar[...]`, the same indicator weighted by `exp(X_T - (r - delta) T)`.
        weight: Sample mean of the density `exp(X_T - (r - delta) T)`, close to 1.
        price: The assembled price, with the standard error of the per-path combination.
    """

    p: MCEstimate
    p_bar: MCEstimate
    weight: MCEstimate
    price: MCEstimate


BlockFunc = Callable[[np.random.Generator, int], BlockStats]


def _check_budget(n_paths: int) -> None:
    if n_paths < 1:
        raise ParameterDomainError(f"path budget must be >= 1, got {n_paths}")


def _estimate(
    func: BlockFunc,
    n_paths: int,
    seed: int,
    *,
    desc: str,
    target_stderr: Optional[float] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MCEstimate:
    _check_budget(n_paths)
    started = time.perf_counter()
    stats = BlockStream(n_paths, seed, block_size=block_size, desc=desc).reduce(func, target_stderr)
    elapsed = time.perf_counter() - started
    stderr = stats.stderr if stats.count > 1 else 0.0
    logger.info("%s: %.6f +- %.6f over %d path(s) in %.2fs", desc, stats.mean, stderr, stats.count, elapsed)
    return MCEstimate(mean=stats.mean, stderr=stderr, n_paths=stats.count, master_seed=seed, wall_time=elapsed)


def _estimate_many(func, n_paths: int, seed: int, *, desc: str, block_size: int) -> list[MCEstimate]:
    # several statistics accumulated over the same blocks
    _check_budget(n_paths)
    started = time.perf_counter()
    totals: Optional[list[BlockStats]] = None
    for stats in BlockStream(n_paths, seed, block_size=block_size, desc=desc).run(func):
        totals = list(stats) if totals is None else [a.merge(b) for a, b in zip(totals, stats)]
    elapsed = time.perf_counter() - started
    return [
        MCEstimate(
            mean=s.mean,
            stderr=s.stderr if s.count > 1 else 0.0,
            n_paths=s.count,
            master_seed=seed,
            wall_time=elapsed,
        )
        for s in totals
    ]


def _first_grid_breach_time(spec: BarrierOptionSpec, x: np.ndarray, maturity: float) -> np.ndarray:
    crossed = breach_indicator(spec, x)
    first = np.argmax(crossed, axis=1)
    return first * (maturity / (x.shape[1] - 1))


def price_discrete(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n: int,
    n_paths: int,
    seed: int,
    *,
    rebate_timing: RebateTiming = DEFAULT_REBATE_TIMING,
    target_stderr: Optional[float] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MCEstimate:
    """
    Price with the barrier monitored at the `n + 1` dates `kT/n`.

    Args:
        model: Jump-diffusion.
        spec: Contract.
        n: Number of monitoring intervals.
        n_paths: Path budget.
        seed: Master seed.
        rebate_timing: With `hit` (the default), a knocked-out option receives its rebate at the first
            monitoring date beyond the barrier.
        target_stderr: Stop early once the standard error is below this value.
        block_size: Paths per block.
    """
    at_hit = rebate_timing == "hit" and spec.knock == "out" and spec.rebate > 0.0

    def block(stream: np.random.Generator, size: int) -> BlockStats:
        batch = simulate_grid_paths(model, spec.maturity, n, size, stream, keep_path=at_hit)
        breached = breach_indicator(spec, batch.extreme(spec.direction))
        hit_time = _first_grid_breach_time(spec, batch.x, spec.maturity) if at_hit else None
        values = discounted_settlement(spec, batch.terminal, breached, model.r, rebate_timing, hit_time)
        return BlockStats.from_values(values)

    return _estimate(
        block, n_paths, seed, desc=f"discrete n={n}", target_stderr=target_stderr, block_size=block_size
    )


def price_continuous(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n_paths: int,
    seed: int,
    *,
    rebate_timing: RebateTiming = DEFAULT_REBATE_TIMING,
    target_stderr: Optional[float] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MCEstimate:
    """
    Price under continuous monitoring: jump skeletons with Brownian-bridge crossing between events.
    With `rebate_timing="hit"` the breach time is drawn exactly from the bridge first-passage law.
    """
    at_hit = rebate_timing == "hit" and spec.knock == "out" and spec.rebate > 0.0

    def block(stream: np.random.Generator, size: int) -> BlockStats:
        batch = simulate_jump_skeletons(model, spec.maturity, size, stream)
        breach = continuous_breach(
            batch, spec.h, model.sigma, stream, direction=spec.direction, with_hit_time=at_hit
        )
        values = discounted_settlement(spec, batch.terminal, breach.breached, model.r, rebate_timing, breach.hit_time)
        return BlockStats.from_values(values)

    return _estimate(block, n_paths, seed, desc="continuous", target_stderr=target_stderr, block_size=block_size)


def price_vanilla(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n_paths: int,
    seed: int,
    *,
    n: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MCEstimate:
    """
    European price of the underlying vanilla, read off the same grid paths `price_discrete`
    draws with `n` intervals and the same seed.
    """

    def block(stream: np.random.Generator, size: int) -> BlockStats:
        batch = simulate_grid_paths(model, spec.maturity, n, size, stream)
        values = math.exp(-model.r * spec.maturity) * vanilla_payoff(spec.kind, spec.strike, spec.spot, batch.terminal)
        return BlockStats.from_values(values)

    return _estimate(block, n_paths, seed, desc="vanilla", block_size=block_size)


def martingale_check(
    model: JumpDiffusionParams,
    maturity: float,
    n_paths: int,
    seed: int,
    *,
    drift_offset: float = 0.0,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MCEstimate:
    """
    Estimate of `E exp(X_T - (r - delta) T)`, which is 1 for the martingale drift.
    `drift_offset` is added to the drift.
    """

    def block(stream: np.random.Generator, size: int) -> BlockStats:
        x = sample_increment(model, maturity, stream, size) + drift_offset * maturity
        return BlockStats.from_values(np.exp(x - (model.r - model.delta) * maturity))

    return _estimate(block, n_paths, seed, desc="martingale", block_size=block_size)


def _alive_and_terminal(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    monitoring: MonitoringScheme,
    stream: np.random.Generator,
    size: int,
):
    if isinstance(monitoring, Discrete):
        batch = simulate_grid_paths(model, spec.maturity, monitoring.n, size, stream)
        return ~breach_indicator(spec, batch.extreme(spec.direction)), batch.terminal
    batch = simulate_jump_skeletons(model, spec.maturity, size, stream)
    breach = continuous_breach(batch, spec.h, model.sigma, stream, direction=spec.direction)
    return ~breach.breached, batch.terminal


def uoc_measure_change_components(
    model: JumpDiffusionParams,
    strike: float,
    barrier: float,
    maturity: float,
    n_paths: int,
    seed: int,
    monitoring: MonitoringScheme,
    *,
    spot: float = 100.0,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MeasureChangeComponents:
    spec = BarrierOptionSpec(
        kind="call", direction="up", knock="out", strike=strike, barrier=barrier, maturity=maturity, spot=spot
    )
    carry = (model.r - model.delta) * maturity
    stock_leg = spot * math.exp(-model.delta * maturity)
    strike_leg = strike * math.exp(-model.r * maturity)

    def block(stream: np.random.Generator, size: int):
        alive, terminal = _alive_and_terminal(model, spec, monitoring, stream, size)
        indicator = (alive & (terminal > spec.k)).astype(float)
        weight = np.exp(terminal - carry)
        return (
            BlockStats.from_values(indicator),
            BlockStats.from_values(weight * indicator),
            BlockStats.from_values(weight),
            BlockStats.from_values(stock_leg * weight * indicator - strike_leg * indicator),
        )

    p, p_bar, weight, price = _estimate_many(block, n_paths, seed, desc="measure change", block_size=block_size)
    return MeasureChangeComponents(p=p, p_bar=p_bar, weight=weight, price=price)


def price_uoc_measure_change(
    model: JumpDiffusionParams,
    strike: float,
    barrier: float,
    maturity: float,
    n_paths: int,
    seed: int,
    monitoring: MonitoringScheme = Continuous(),
    *,
    spot: float = 100.0,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MCEstimate:
    """
    Up-and-out call without rebate priced through the change of measure `dPbar/dP = exp(X_T - (r - delta) T)`.
    """
    return uoc_measure_change_components(
        model, strike, barrier, maturity, n_paths, seed, monitoring, spot=spot, block_size=block_size
    ).price


def _require_diffusion(model: JumpDiffusionParams) -> None:
    if model.lam != 0.0:
        raise ParameterDomainError("grid bridge functionals need a model without jumps (lambda = 0)")


def gap_distribution_sample(
    model: JumpDiffusionParams,
    maturity: float,
    n: int,
    n_paths: int,
    seed: int,
    *,
    block_size: int = 2**12,
) -> GapSample:
    """
    Sample of `sqrt(n) (M_T - M_T^n)`, the continuous maximum drawn cell by cell from the
    Brownian-bridge maximum law given the grid values.
    """
    _require_diffusion(model)
    _check_budget(n_paths)
    dt = maturity / n

    def block(stream: np.random.Generator, size: int):
        batch = simulate_grid_paths(model, maturity, n, size, stream, keep_path=True)
        cell_max = sample_bridge_maximum(batch.x[:, :-1], batch.x[:, 1:], dt, model.sigma, stream)
        gap = math.sqrt(n) * (np.maximum(cell_max.max(axis=1), batch.maximum) - batch.maximum)
        return gap, batch.terminal

    parts = list(BlockStream(n_paths, seed, block_size=block_size, desc=f"gap n={n}").run(block))
    return GapSample(
        n=n,
        gap=np.concatenate([g for g, _ in parts]),
        terminal=np.concatenate([t for _, t in parts]),
    )


def price_monitoring_gap(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n: int,
    n_paths: int,
    seed: int,
    *,
    block_size: int = 2**12,
) -> MCEstimate:
    """
    `V^n(H) - V(H)` estimated pathwise on common grid paths: the continuous breach adds the
    Brownian-bridge crossings inside each monitoring cell.
    """
    _require_diffusion(model)
    dt = spec.maturity / n
    sign = 1.0 if spec.direction == "up" else -1.0
    discount = math.exp(-model.r * spec.maturity)

    def block(stream: np.random.Generator, size: int) -> BlockStats:
        batch = simulate_grid_paths(model, spec.maturity, n, size, stream, keep_path=True)
        x = sign * batch.x
        discrete = breach_indicator(spec, batch.extreme(spec.direction))
        crossing = bridge_cross_prob(x[:, :-1], x[:, 1:], dt, model.sigma, sign * spec.h)
        continuous = (stream.random(crossing.shape) < crossing).any(axis=1) | discrete
        values = discount * (settle(spec, batch.terminal, discrete) - settle(spec, batch.terminal, continuous))
        return BlockStats.from_values(values)

    return _estimate(block, n_paths, seed, desc=f"monitoring gap n={n}", block_size=block_size)
