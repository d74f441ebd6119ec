"""
Deterministic random streams and samplers for the model's primitive laws.

A stream is a `numpy.random.Generator` over a `Philox` counter-based bit generator whose
key is derived from `(master_seed, stream_id)` only, so the numbers a block of paths
sees never depend on how blocks are scheduled.
"""
import math
from typing import Optional

import numpy as np
from msgspec import Struct

from .errors import ParameterDomainError
from .model import KouJumpParams

UINT64_MAX = 2**64 - 1


class SeedSpec(Struct, frozen=True):
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= value <= UINT64_MAX:
                raise ParameterDomainError(f"{name} must be an unsigned 64-bit integer, got {value}")


def make_stream(seed: SeedSpec) -> np.random.Generator:
    sequence = np.random.SeedSequence(seed.master_seed, spawn_key=(seed.stream_id,))
    return np.random.Generator(np.random.Philox(sequence))


def block_sizes(n_paths: int, block_size: int) -> list[int]:
    """
    Split `n_paths` into consecutive blocks, the last one possibly shorter.
    """
    if n_paths < 1:
        raise ParameterDomainError(f"path budget must be >= 1, got {n_paths}")
    if block_size < 1:
        raise ParameterDomainError(f"block size must be >= 1, got {block_size}")
    full, rest = divmod(n_paths, block_size)
    return [block_size] * full + ([rest] if rest else [])


def block_seeds(master_seed: int, n_paths: int, block_size: int) -> list[SeedSpec]:
    """
    Seeds of the blocks of a path budget: block `b` draws from `SeedSpec(master_seed, b)`.
    """
    return [SeedSpec(master_seed, stream_id) for stream_id in range(len(block_sizes(n_paths, block_size)))]


def standard_normal(stream: np.random.Generator, size=None):
    return stream.standard_normal(size)


def sample_poisson(rate: float, stream: np.random.Generator, size=None):
    if rate < 0.0:
        raise ParameterDomainError(f"Poisson rate must be >= 0, got {rate}")
    if rate == 0.0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    return stream.poisson(rate, size)


def sample_kou_jump(jumps: KouJumpParams, stream: np.random.Generator, size=None):
    """
    Inverse-CDF draw from the double-exponential law.
    """
    u = stream.random(size)
    p, q = jumps.p, jumps.q
    with np.errstate(divide="ignore", invalid="ignore"):
        # u < q: downward jump, CDF q*exp(eta2*y) on y < 0
        down = np.log(u / q) / jumps.eta2 if q > 0.0 else np.zeros_like(u)
        up = -np.log((1.0 - u) / p) / jumps.eta1 if p > 0.0 else np.zeros_like(u)
    rv = np.where(u < q, down, up)
    return rv if np.ndim(rv) else float(rv)


def conditional_jump_times(l: int, t: float, stream: np.random.Generator, size: Optional[int] = None):  # noqa: E741
    """
    Jump times of a Poisson process given `N_t = l`: sorted uniforms on `(0, t)`.

    Returns an array of shape `(l,)` or `(size, l)` when `size` is given.
    """
    if l < 0:
        raise ParameterDomainError(f"number of jumps must be >= 0, got {l}")
    if not t > 0.0:
        raise ParameterDomainError(f"horizon must be > 0, got {t}")
    shape = (l,) if size is None else (size, l)
    return np.sort(stream.uniform(0.0, t, shape), axis=-1)


class JumpTimeGapStatistics(Struct, frozen=True):
    """
    Monte Carlo estimates (with standard errors) of the conditional jump-time quantities,
    indexed by gap `i = 1..l` (gap `l + 1` is the final one, `t - T_l`).
    """

    l: int  # noqa: E741
    t: float
    n_samples: int
    inv_sqrt_mean: list[float]
    inv_sqrt_stderr: list[float]
    alpha: list[float]
    short_gap_prob: list[list[float]]
    short_gap_stderr: list[list[float]]

    @property
    def bound(self) -> float:
        return 2.0 * self.l / math.sqrt(self.t)


def jump_time_gap_statistics(
    l: int, t: float, n_samples: int, seed: int, alpha: tuple[float, ...] = (0.01, 0.1)  # noqa: E741
) -> JumpTimeGapStatistics:
    if l < 1:
        raise ParameterDomainError(f"need at least one jump, got {l}")
    stream = make_stream(SeedSpec(seed, stream_id=l))
    times = conditional_jump_times(l, t, stream, size=n_samples)
    edges = np.concatenate([np.zeros((n_samples, 1)), times, np.full((n_samples, 1), t)], axis=1)
    gaps = np.diff(edges, axis=1)
    inv = 1.0 / np.sqrt(gaps)
    root_n = math.sqrt(n_samples)
    short = [(gaps <= a * t) for a in alpha]
    return JumpTimeGapStatistics(
        l=l,
        t=t,
        n_samples=n_samples,
        inv_sqrt_mean=inv.mean(axis=0).tolist(),
        inv_sqrt_stderr=(inv.std(axis=0, ddof=1) / root_n).tolist(),
        alpha=list(alpha),
        short_gap_prob=[s.mean(axis=0).tolist() for s in short],
        short_gap_stderr=[(s.std(axis=0, ddof=1) / root_n).tolist() for s in short],
    )
