"""
Continuity correction between discretely and continuously monitored barrier options.

A discrete barrier option with `n` monitoring intervals is priced like a continuous one whose
barrier is moved away from the spot by the factor `exp(sigma beta1 sqrt(T/n))`, and conversely.
"""
import logging
import math
from typing import Literal, Union

import numpy as np
from msgspec import Struct
from typing_extensions import TypeAlias

from .bessel import BesselBetaEstimate
from .errors import ParameterDomainError
from .model import (
    DEFAULT_REBATE_TIMING,
    BarrierOptionSpec,
    Direction,
    JumpDiffusionParams,
    RebateTiming,
    is_breached_at_inception,
)
from .pricing import MCEstimate, price_continuous, price_discrete, price_monitoring_gap
from .simulation import continuous_breach, simulate_grid_paths, simulate_jump_skeletons
from .stream import DEFAULT_BLOCK_SIZE, BlockStats, BlockStream

logger = logging.getLogger(__name__)

ShiftMode: TypeAlias = Literal["discrete_from_continuous", "continuous_from_discrete"]
ProbabilitySide: TypeAlias = Literal["raise_continuous", "lower_discrete"]
Beta1: TypeAlias = Union[float, BesselBetaEstimate]


def _beta1_value(beta1: Beta1) -> float:
    value = beta1.value if isinstance(beta1, BesselBetaEstimate) else float(beta1)
    if not value > 0.0:
        raise ParameterDomainError(f"beta1 must be > 0, got {value}")
    return value


def shift_size(sigma: float, maturity: float, n: int, beta1: Beta1) -> float:
    """
    `sigma beta1 sqrt(T/n)`, the log-barrier shift.
    """
    if not sigma > 0.0 or not maturity > 0.0:
        raise ParameterDomainError("sigma and maturity must be > 0")
    if n < 1:
        raise ParameterDomainError(f"number of monitoring intervals must be >= 1, got {n}")
    return sigma * _beta1_value(beta1) * math.sqrt(maturity / n)


def shifted_barrier(
    barrier: float,
    direction: Direction,
    sigma: float,
    maturity: float,
    n: int,
    beta1: Beta1,
    mode: ShiftMode = "discrete_from_continuous",
) -> float:
    """
    Barrier of the option whose price approximates the requested one.

    For `discrete_from_continuous` the continuous barrier moves away from the spot
    (up for up options, down for down options); `continuous_from_discrete` moves it the other way.
    """
    if not barrier > 0.0:
        raise ParameterDomainError(f"barrier must be > 0, got {barrier}")
    sign = 1.0 if direction == "up" else -1.0
    if mode == "continuous_from_discrete":
        sign = -sign
    return barrier * math.exp(sign * shift_size(sigma, maturity, n, beta1))


class CorrectionRequest(Struct, frozen=True):
    spec: BarrierOptionSpec
    n: int
    beta1: BesselBetaEstimate
    mode: ShiftMode = "discrete_from_continuous"

    def __post_init__(self):
        if self.n < 1:
            raise ParameterDomainError(f"number of monitoring intervals must be >= 1, got {self.n}")


class CorrectionResult(Struct, frozen=True):
    estimate: MCEstimate
    shifted_barrier: float
    beta1_used: float
    mode: ShiftMode


def apply_correction(
    request: CorrectionRequest,
    model: JumpDiffusionParams,
    n_paths: int,
    seed: int,
    *,
    rebate_timing: RebateTiming = DEFAULT_REBATE_TIMING,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> CorrectionResult:
    """
    Price the shifted contract: a continuous price for `discrete_from_continuous`, a discrete
    price with `request.n` intervals for `continuous_from_discrete`.

    A contract already breached at inception is priced unshifted.
    """
    spec, beta1 = request.spec, request.beta1.value
    if is_breached_at_inception(spec):
        logger.info("barrier %.4f already breached at inception, correction bypassed", spec.barrier)
        barrier = spec.barrier
    else:
        barrier = shifted_barrier(spec.barrier, spec.direction, model.sigma, spec.maturity, request.n, beta1, request.mode)
    shifted = spec.with_barrier(barrier)
    if request.mode == "discrete_from_continuous":
        estimate = price_continuous(model, shifted, n_paths, seed, rebate_timing=rebate_timing, block_size=block_size)
    else:
        estimate = price_discrete(
            model, shifted, request.n, n_paths, seed, rebate_timing=rebate_timing, block_size=block_size
        )
    return CorrectionResult(estimate=estimate, shifted_barrier=barrier, beta1_used=beta1, mode=request.mode)


def _request(spec: BarrierOptionSpec, n: int, beta1: Beta1, mode: ShiftMode) -> CorrectionRequest:
    if not isinstance(beta1, BesselBetaEstimate):
        beta1 = BesselBetaEstimate.pinned(_beta1_value(beta1))
    return CorrectionRequest(spec=spec, n=n, beta1=beta1, mode=mode)


def corrected_discrete_price(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n: int,
    n_paths: int,
    seed: int,
    beta1: Beta1,
    **kwargs,
) -> MCEstimate:
    """
    Approximation of the `n`-date discrete price by the continuous price at the shifted barrier.
    """
    return apply_correction(_request(spec, n, beta1, "discrete_from_continuous"), model, n_paths, seed, **kwargs).estimate


def corrected_continuous_price(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n: int,
    n_paths: int,
    seed: int,
    beta1: Beta1,
    **kwargs,
) -> MCEstimate:
    """
    Approximation of the continuous price by the `n`-date discrete price at the shifted barrier.
    """
    return apply_correction(_request(spec, n, beta1, "continuous_from_discrete"), model, n_paths, seed, **kwargs).estimate


class ProbabilityComparison(Struct, frozen=True):
    """
    Both sides of a probability-level correction, `lhs` under continuous monitoring and
    `rhs` under discrete monitoring, estimated on independent paths.
    """

    side: ProbabilitySide
    lhs: MCEstimate
    rhs: MCEstimate
    shift: float

    @property
    def difference(self) -> float:
        return self.lhs.mean - self.rhs.mean

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.lhs.stderr, self.rhs.stderr)


def corrected_probability(
    model: JumpDiffusionParams,
    x: float,
    y: float,
    maturity: float,
    n: int,
    n_paths: int,
    seed: int,
    beta1: Beta1,
    side: ProbabilitySide = "raise_continuous",
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> ProbabilityComparison:
    """
    Estimate both sides of

    - `raise_continuous`: `P(M_T < x + s, X_T > y)` against `P(M_T^n < x, X_T > y)`;
    - `lower_discrete`: `P(M_T < x, X_T > y)` against `P(M_T^n < x - s, X_T > y)`;

    with `s = sigma beta1 sqrt(T/n)`.
    """
    if not x > 0.0:
        raise ParameterDomainError(f"log-barrier x must be > 0, got {x}")
    shift = shift_size(model.sigma, maturity, n, beta1)
    continuous_level, discrete_level = (x + shift, x) if side == "raise_continuous" else (x, x - shift)

    def continuous_block(stream: np.random.Generator, size: int) -> BlockStats:
        batch = simulate_jump_skeletons(model, maturity, size, stream)
        breach = continuous_breach(batch, continuous_level, model.sigma, stream)
        return BlockStats.from_values(~breach.breached & (batch.terminal > y))

    def discrete_block(stream: np.random.Generator, size: int) -> BlockStats:
        batch = simulate_grid_paths(model, maturity, n, size, stream)
        return BlockStats.from_values((batch.maximum < discrete_level) & (batch.terminal > y))

    estimates = []
    for desc, func in (("continuous side", continuous_block), ("discrete side", discrete_block)):
        stats = BlockStream(n_paths, seed, block_size=block_size, desc=desc).reduce(func)
        estimates.append(MCEstimate(mean=stats.mean, stderr=stats.stderr, n_paths=stats.count, master_seed=seed))
    return ProbabilityComparison(side=side, lhs=estimates[0], rhs=estimates[1], shift=shift)


class ScalingFit(Struct, frozen=True):
    """
    Least-squares fit `gap(n) = slope / sqrt(n)` through the origin.

    Args:
        slope: Fitted constant.
        r_squared: Uncentered coefficient of determination.
        points: `(n, gap estimate)` pairs.
    """

    slope: float
    r_squared: float
    points: list[tuple[int, MCEstimate]]


def fit_through_origin(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope = float(x @ y / (x @ x))
    residual = y - slope * x
    return slope, float(1.0 - residual @ residual / (y @ y))


def monitoring_gap_scaling(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    ns: list[int],
    n_paths: int,
    seed: int,
) -> ScalingFit:
    """
    Regress the discrete-minus-continuous price gap on `1/sqrt(n)`.
    """
    if len(ns) < 2:
        raise ParameterDomainError("the scaling fit needs at least two values of n")
    points = [(n, price_monitoring_gap(model, spec, n, n_paths, seed)) for n in ns]
    slope, r_squared = fit_through_origin(
        np.array([1.0 / math.sqrt(n) for n, _ in points]),
        np.array([est.mean for _, est in points]),
    )
    logger.info("monitoring gap ~ %.5f / sqrt(n), R^2 = %.4f", slope, r_squared)
    return ScalingFit(slope=slope, r_squared=r_squared, points=points)
