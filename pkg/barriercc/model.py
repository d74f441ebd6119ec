"""
Jump-diffusion model, barrier contract terms and the barrier payoffs.

The log-price is `X_t = gamma*t + sigma*B_t + sum_{i<=N_t} Y_i` with `N` a Poisson
process of intensity `lam` and `Y_i` asymmetric double-exponential, and `S_t = S0*exp(X_t)`.
"""
import math
from typing import Literal, Optional, Union

import numpy as np
from msgspec import Struct, field, structs
from typing_extensions import TypeAlias

from .errors import ParameterDomainError

OptionKind: TypeAlias = Literal["call", "put"]
Direction: TypeAlias = Literal["up", "down"]
Knock: TypeAlias = Literal["in", "out"]
RebateTiming: TypeAlias = Literal["maturity", "hit"]

# knocked-out holders are paid at the breach unless told otherwise
DEFAULT_REBATE_TIMING: RebateTiming = "hit"

ArrayLike: TypeAlias = Union[float, np.ndarray]


class KouJumpParams(Struct, frozen=True):
    """
    Asymmetric double-exponential jump law with density
    `p*eta1*exp(-eta1*y)` on `y >= 0` and `q*eta2*exp(eta2*y)` on `y < 0`.

    Args:
        p: Probability of an upward jump.
        eta1: Decay rate of upward jumps, must exceed 1 so that `E exp(Y)` is finite.
        eta2: Decay rate of downward jumps.
    """

    p: float = 0.6
    eta1: float = 50.0
    eta2: float = 25.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ParameterDomainError(f"jump probability p must lie in [0, 1], got {self.p}")
        if not self.eta1 > 1.0:
            raise ParameterDomainError(f"eta1 must be > 1 for exp(Y) to be integrable, got {self.eta1}")
        if not self.eta2 > 0.0:
            raise ParameterDomainError(f"eta2 must be > 0, got {self.eta2}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    def mean(self) -> float:
        return kou_jump_mean(self)

    def cdf(self, y: ArrayLike) -> ArrayLike:
        return kou_jump_cdf(self, y)


def _rate_term(weight: float, eta: float, shift: float) -> float:
    # weight * eta / (eta + shift), with an infinite rate meaning jumps degenerate at 0
    if weight == 0.0:
        return 0.0
    if math.isinf(eta):
        return weight
    return weight * eta / (eta + shift)


def kou_exp_moment(jumps: KouJumpParams) -> float:
    """
    `E exp(Y_1) = p*eta1/(eta1 - 1) + q*eta2/(eta2 + 1)`.

    Raises:
        ParameterDomainError: if `eta1 <= 1`.
    """
    if not jumps.eta1 > 1.0:
        raise ParameterDomainError(f"eta1 must be > 1, got {jumps.eta1}")
    return _rate_term(jumps.p, jumps.eta1, -1.0) + _rate_term(jumps.q, jumps.eta2, 1.0)


def kou_jump_mean(jumps: KouJumpParams) -> float:
    up = 0.0 if math.isinf(jumps.eta1) else jumps.p / jumps.eta1
    down = 0.0 if math.isinf(jumps.eta2) else jumps.q / jumps.eta2
    return up - down


def kou_jump_cdf(jumps: KouJumpParams, y: ArrayLike) -> ArrayLike:
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore"):
        below = jumps.q * np.exp(jumps.eta2 * np.minimum(y, 0.0))
        above = 1.0 - jumps.p * np.exp(-jumps.eta1 * np.maximum(y, 0.0))
    rv = np.where(y < 0.0, below, above)
    return rv if rv.ndim else float(rv)


def martingale_drift(r: float, delta: float, sigma: float, lam: float, jumps: KouJumpParams) -> float:
    """
    The drift `gamma = r - delta - sigma^2/2 - lam*E(exp(Y_1) - 1)` that makes
    `exp(-(r - delta)t) S_t` a martingale.
    """
    if not sigma > 0.0:
        raise ParameterDomainError(f"sigma must be > 0, got {sigma}")
    if lam < 0.0:
        raise ParameterDomainError(f"jump intensity must be >= 0, got {lam}")
    compensator = lam * (kou_exp_moment(jumps) - 1.0) if lam > 0.0 else 0.0
    return r - delta - 0.5 * sigma * sigma - compensator


class JumpDiffusionParams(Struct, frozen=True):
    """
    Risk-neutral jump-diffusion. The drift is always derived from the other fields.

    Args:
        r: Risk-free rate.
        delta: Dividend rate.
        sigma: Diffusion volatility.
        lam: Jump intensity (serialized as `lambda`).
        jumps: Jump size law.
    """

    r: float = 0.05
    delta: float = 0.0
    sigma: float = 0.3
    lam: float = field(default=7.0, name="lambda")
    jumps: KouJumpParams = field(default_factory=KouJumpParams)

    def __post_init__(self):
        # validates sigma, lam and the jump law in one place
        martingale_drift(self.r, self.delta, self.sigma, self.lam, self.jumps)

    @property
    def gamma(self) -> float:
        return martingale_drift(self.r, self.delta, self.sigma, self.lam, self.jumps)

    def without_jumps(self) -> "JumpDiffusionParams":
        return structs.replace(self, lam=0.0)


class BarrierOptionSpec(Struct, frozen=True):
    """
    Contract terms of a barrier option.

    Args:
        kind: `call` or `put`.
        direction: `up` or `down`.
        knock: `in` or `out`.
        strike: Strike K.
        barrier: Barrier H.
        rebate: Amount paid when an out option is knocked out or an in option is never knocked in.
        maturity: Maturity T in years.
        spot: Initial price S0.
    """

    kind: OptionKind = "put"
    direction: Direction = "up"
    knock: Knock = "out"
    strike: float = 100.0
    barrier: float = 110.0
    rebate: float = 0.0
    maturity: float = 1.0
    spot: float = 100.0

    def __post_init__(self):
        for name in ("strike", "barrier", "maturity", "spot"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ParameterDomainError(f"{name} must be finite and > 0, got {value}")
        if not self.rebate >= 0.0:
            raise ParameterDomainError(f"rebate must be >= 0, got {self.rebate}")

    @property
    def k(self) -> float:
        return math.log(self.strike / self.spot)

    @property
    def h(self) -> float:
        return math.log(self.barrier / self.spot)

    def with_barrier(self, barrier: float) -> "BarrierOptionSpec":
        return structs.replace(self, barrier=barrier)

    def with_knock(self, knock: Knock) -> "BarrierOptionSpec":
        return structs.replace(self, knock=knock)


class Continuous(Struct, frozen=True, tag="continuous"):
    pass


class Discrete(Struct, frozen=True, tag="discrete"):
    """
    Monitoring at the `n + 1` dates `kT/n`, `k = 0..n`.
    """

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterDomainError(f"number of monitoring intervals must be >= 1, got {self.n}")


MonitoringScheme: TypeAlias = Union[Continuous, Discrete]


def vanilla_payoff(kind: OptionKind, strike: float, spot: float, terminal_log: ArrayLike) -> ArrayLike:
    terminal = spot * np.exp(terminal_log)
    if kind == "call":
        return np.maximum(terminal - strike, 0.0)
    return np.maximum(strike - terminal, 0.0)


def breach_indicator(spec: BarrierOptionSpec, extreme_log: ArrayLike) -> ArrayLike:
    """
    `True` where the barrier was hit: `M >= h` for up options and `m <= h` for down options.
    """
    extreme_log = np.asarray(extreme_log, dtype=float)
    if spec.direction == "up":
        return extreme_log >= spec.h
    return extreme_log <= spec.h


def is_breached_at_inception(spec: BarrierOptionSpec) -> bool:
    if spec.direction == "up":
        return spec.barrier <= spec.spot
    return spec.barrier >= spec.spot


def settle(spec: BarrierOptionSpec, terminal_log: ArrayLike, breached: ArrayLike) -> ArrayLike:
    """
    Payoff at maturity given the breach indicator, with the rebate paid at maturity.

    Out options pay the vanilla payoff on paths that never breached, in options on the others.
    """
    breached = np.asarray(breached, dtype=bool)
    alive = ~breached if spec.knock == "out" else breached
    vanilla = vanilla_payoff(spec.kind, spec.strike, spec.spot, terminal_log)
    rv = np.where(alive, vanilla, spec.rebate)
    return rv if rv.ndim else float(rv)


def payoff(spec: BarrierOptionSpec, terminal_log: ArrayLike, extreme_log: ArrayLike) -> ArrayLike:
    """
    Payoff at maturity with the rebate paid at maturity.

    Out options pay on `{S0 e^M < H}` (up) or `{S0 e^m > H}` (down), in options on the complement.

    Args:
        spec: Contract.
        terminal_log: `X_T`.
        extreme_log: Running maximum of X for up options, running minimum for down options.
    """
    return settle(spec, terminal_log, breach_indicator(spec, extreme_log))


def discounted_settlement(
    spec: BarrierOptionSpec,
    terminal_log: ArrayLike,
    breached: ArrayLike,
    r: float,
    rebate_timing: RebateTiming = "maturity",
    hit_time: Optional[ArrayLike] = None,
) -> ArrayLike:
    """
    Present value of the payoff given the breach indicator.

    With `rebate_timing="hit"` the rebate of a knocked-out option is paid at the breach
    time `hit_time`; in options always receive their rebate at maturity.
    """
    discount = math.exp(-r * spec.maturity)
    if rebate_timing == "maturity" or spec.knock == "in" or spec.rebate == 0.0:
        return discount * np.asarray(settle(spec, terminal_log, breached))
    if hit_time is None:
        raise ParameterDomainError("paying the rebate at the hit requires the breach times")
    breached = np.asarray(breached, dtype=bool)
    vanilla = vanilla_payoff(spec.kind, spec.strike, spec.spot, terminal_log)
    hit_time = np.where(breached, hit_time, spec.maturity)
    return np.where(breached, spec.rebate * np.exp(-r * hit_time), discount * vanilla)


def discounted_payoff(
    spec: BarrierOptionSpec,
    terminal_log: ArrayLike,
    extreme_log: ArrayLike,
    r: float,
    rebate_timing: RebateTiming = "maturity",
    hit_time: Optional[ArrayLike] = None,
) -> ArrayLike:
    return discounted_settlement(spec, terminal_log, breach_indicator(spec, extreme_log), r, rebate_timing, hit_time)
