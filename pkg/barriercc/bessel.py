"""
Three-dimensional Bessel process: transition kernels, bridge minima, two-sided paths and
the Monte Carlo estimate of `beta1 = E R`, `R = min_{j in Z} Rcheck(U + j)`.
"""
import logging
import math
import os
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from msgspec import DecodeError, Struct, ValidationError, json
from typing_extensions import TypeAlias

from .errors import ParameterDomainError
from .stream import DEFAULT_BLOCK_SIZE, BlockStats, BlockStream

logger = logging.getLogger(__name__)

BetaMethod: TypeAlias = Literal["lattice", "grid", "pinned"]
Beta1Source: TypeAlias = Literal["cached", "recompute", "pinned"]

CACHE_ENV = "BARRIERCC_CACHE_DIR"
CACHE_FILE = "beta1.json"

DEFAULT_J = 20
DEFAULT_GRID_STEP = 2.0**-6
DEFAULT_SAMPLES = 10**6

_C1 = math.sqrt(2.0 / (math.pi * math.e))
_C2 = math.sqrt(2.0 / math.pi)


def _scalar(rv):
    return rv if np.ndim(rv) else float(rv)


def _check_time(t) -> None:
    if np.any(np.asarray(t) <= 0.0):
        raise ParameterDomainError("time argument must be > 0")


def _gaussian(t, z):
    return np.exp(-np.square(z) / (2.0 * t)) / np.sqrt(2.0 * math.pi * t)


def _escape_factor(t, x, y):
    # (1 - exp(-2xy/t)) / x, continuous at x = 0 where it equals 2y/t
    x, y = np.asarray(x, float), np.asarray(y, float)
    safe = np.where(x > 0.0, x, 1.0)
    return np.where(x > 0.0, -np.expm1(-2.0 * safe * y / t) / safe, 2.0 * y / t)


def killed_bm_density(t, x, y):
    """
    `q_t(x, y) = g_t(x - y) - g_t(x + y)`, Brownian motion killed at 0.
    """
    _check_time(t)
    x, y = np.asarray(x, float), np.asarray(y, float)
    return _scalar(_gaussian(t, x - y) - _gaussian(t, x + y))


def bessel_transition_density(t, x, y):
    """
    Transition density `q~_t(x, y) = y q_t(x, y) / x` of the three-dimensional Bessel
    process, extended continuously to `x = 0` where it is `sqrt(2/pi) y^2 t^{-3/2} exp(-y^2/(2t))`.
    """
    _check_time(t)
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(x < 0.0) or np.any(y < 0.0):
        raise ParameterDomainError("Bessel process states must be >= 0")
    return _scalar(y * _gaussian(t, x - y) * _escape_factor(t, x, y))


def reduced_bessel_density(t, r, m):
    """
    `q-_t(r, m) = q~_t(r, m) / m = q_t(r, m) / r`; equals `sqrt(2/pi) m t^{-3/2} exp(-m^2/(2t))` at `r = 0`.
    """
    _check_time(t)
    r, m = np.asarray(r, float), np.asarray(m, float)
    if np.any(r < 0.0) or np.any(m < 0.0):
        raise ParameterDomainError("Bessel process states must be >= 0")
    return _scalar(_gaussian(t, r - m) * _escape_factor(t, r, m))


def reduced_density_bound(s, r, gamma: float):
    """
    Upper bound `(1/s) exp(gamma_+ r) (C1 + C2 gamma_+ sqrt(s))` of `q-_s(r, m) exp(gamma m - gamma^2 s / 2)`, any `m > 0`.
    """
    _check_time(s)
    g = max(gamma, 0.0)
    s, r = np.asarray(s, float), np.asarray(r, float)
    return _scalar(np.exp(g * r) * (_C1 + _C2 * g * np.sqrt(s)) / s)


def _u(s, m):
    s, m = np.asarray(s, float), np.asarray(m, float)
    ok = (s > 0.0) & (m > 0.0)
    s_, m_ = np.where(ok, s, 1.0), np.where(ok, m, 0.0)
    return np.where(ok, m_ * np.exp(-np.square(m_) / (2.0 * s_)) / (math.sqrt(math.pi) * s_**1.5), 0.0)


def max_argmax_density(s, m):
    """
    `u(s, m) = m s^{-3/2} exp(-m^2/(2s)) / sqrt(pi)`, the building block of the joint law
    of the argmax and the maximum of a Brownian bridge.
    """
    if np.any(np.asarray(s) <= 0.0) or np.any(np.asarray(m) <= 0.0):
        raise ParameterDomainError("max_argmax_density needs s > 0 and m > 0")
    return _scalar(_u(s, m))


def bridge_max_argmax_density(s, m, x: float = 0.0, y: float = 0.0):
    """
    Joint density at `(s, m)` of the argmax and the maximum of a standard Brownian bridge
    from `x` to `y` on `[0, 1]`: `u(s, m - x) u(1 - s, m - y) / n(y - x)`.
    """
    normal = math.exp(-0.5 * (y - x) ** 2) / math.sqrt(2.0 * math.pi)
    return _scalar(_u(s, np.asarray(m) - x) * _u(1.0 - np.asarray(s), np.asarray(m) - y) / normal)


def _check_bridge(t1: float, t2: float, y, m) -> None:
    if not 0.0 < t1 < t2:
        raise ParameterDomainError(f"need 0 < t1 < t2, got t1={t1}, t2={t2}")
    if np.any(np.asarray(y) <= 0.0) or np.any(np.asarray(m) <= 0.0):
        raise ParameterDomainError("Bessel bridge endpoints must be > 0")


def bessel_bridge_min_cdf(t1: float, t2: float, y, m, b):
    """
    `P(min_{[t1, t2]} R <= b | R(t1) = y, R(t2) = m)`
    `= (exp(2(b - y)(m - b)/T) - exp(-2ym/T)) / (1 - exp(-2ym/T))`, `T = t2 - t1`,
    clamped to 1 once `b >= min(y, m)`.
    """
    _check_bridge(t1, t2, y, m)
    span = t2 - t1
    y, m, b = np.broadcast_arrays(*(np.asarray(v, float) for v in (y, m, b)))
    top = np.minimum(y, m)
    bb = np.clip(b, 0.0, top)
    a = 2.0 * bb * (m - bb + y) / span
    c = 2.0 * y * m / span
    # (e^a - 1)/(e^c - 1) written to stay finite for large c
    rv = np.exp(a - c) * np.expm1(-a) / np.expm1(-c)
    rv = np.where(b >= top, 1.0, np.where(b <= 0.0, 0.0, rv))
    return _scalar(rv)


def bridge_min_cdf_bound(y, m, b):
    """
    `min(1, b (m + y) / (y m))`, which dominates `bessel_bridge_min_cdf` for every span.
    """
    y, m, b = (np.asarray(v, float) for v in (y, m, b))
    return _scalar(np.minimum(1.0, b * (m + y) / (y * m)))


def bessel_bridge_min_quantile(t1: float, t2: float, y, m, u):
    """
    Inverse of `bessel_bridge_min_cdf` in `b`: the smaller root of
    `b^2 - (y + m) b + y m + (T/2) log(u + (1 - u) exp(-2ym/T)) = 0`.
    """
    _check_bridge(t1, t2, y, m)
    span = t2 - t1
    y, m, u = np.broadcast_arrays(*(np.asarray(v, float) for v in (y, m, u)))
    c = 2.0 * y * m / span
    with np.errstate(divide="ignore"):
        log_v = np.logaddexp(np.log(u), np.log1p(-u) - c)
    numerator = 2.0 * (y * m + 0.5 * span * log_v)
    denominator = (y + m) + np.sqrt(np.square(y - m) - 2.0 * span * log_v)
    return _scalar(np.clip(numerator / denominator, 0.0, np.minimum(y, m)))


def sample_bessel_bridge_min(t1: float, t2: float, y, m, stream: np.random.Generator, size=None):
    """
    Draw of the minimum of a three-dimensional Bessel bridge by inversion of its CDF.
    """
    shape = np.broadcast(np.asarray(y), np.asarray(m)).shape if size is None else size
    return bessel_bridge_min_quantile(t1, t2, y, m, stream.random(shape))


def bessel_bridge_grid_min(
    t1: float, t2: float, y: float, m: float, n_steps: int, stream: np.random.Generator, size: int
) -> np.ndarray:
    """
    Minima over a grid of `n_steps` cells of Bessel bridges from `y` to `m`, built as norms of
    3-D Brownian bridges. Only the radius of the endpoint is fixed, so its direction is drawn
    from the conditional law `cos(theta) ~ exp(kappa c)`, `kappa = y m / T`.
    """
    _check_bridge(t1, t2, y, m)
    span = t2 - t1
    kappa = y * m / span
    u = stream.random(size)
    cos = np.clip(1.0 + np.log(u + (1.0 - u) * math.exp(-2.0 * kappa)) / kappa, -1.0, 1.0)
    phi = stream.uniform(0.0, 2.0 * math.pi, size)
    sin = np.sqrt(1.0 - cos * cos)
    end = m * np.stack([cos, sin * np.cos(phi), sin * np.sin(phi)], axis=1)
    start = np.array([y, 0.0, 0.0])

    walk = _brownian_3d(n_steps, span / n_steps, stream, size)
    frac = (np.arange(n_steps + 1) / n_steps)[None, :, None]
    path = start + frac * (end - start)[:, None, :] + walk - frac * walk[:, -1:, :]
    return np.linalg.norm(path, axis=-1).min(axis=1)


class TwoSidedBesselPath(Struct, frozen=True):
    """
    `Rcheck` on the grid `times`, with `Rcheck(t) = R1(t)` for `t >= 0` and `R2(-t)` for `t < 0`.
    """

    grid_step: float
    times: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> float:
        return float(self.values[int(round((t - self.times[0]) / self.grid_step))])


def _brownian_3d(n_steps: int, grid_step: float, stream: np.random.Generator, size: Optional[int] = None):
    shape = (n_steps, 3) if size is None else (size, n_steps, 3)
    steps = math.sqrt(grid_step) * stream.standard_normal(shape)
    walk = np.zeros(shape[:-2] + (n_steps + 1, 3))
    np.cumsum(steps, axis=-2, out=walk[..., 1:, :])
    return walk


def _side_steps(horizon: float, grid_step: float) -> int:
    return int(math.ceil(horizon / grid_step - 1e-9))


def simulate_two_sided_bessel(
    J: int, grid_step: float, stream: np.random.Generator, horizon: Optional[float] = None  # noqa: N803
) -> TwoSidedBesselPath:
    """
    Two independent Bessel paths from 0, each the norm of a 3-D Brownian motion sampled
    exactly on the grid, glued back to back on `[-horizon, horizon]` (default `J + 1`).
    """
    if J < 0:
        raise ParameterDomainError(f"truncation J must be >= 0, got {J}")
    _check_time(grid_step)
    steps = _side_steps(horizon if horizon is not None else J + 1, grid_step)
    right = np.linalg.norm(_brownian_3d(steps, grid_step, stream), axis=-1)
    left = np.linalg.norm(_brownian_3d(steps, grid_step, stream), axis=-1)
    times = grid_step * np.arange(-steps, steps + 1)
    return TwoSidedBesselPath(grid_step=grid_step, times=times, values=np.concatenate([left[::-1], right[1:]]))


class BesselBetaEstimate(Struct, frozen=True):
    """
    Estimate of `beta1` with its provenance.

    Args:
        value: Monte Carlo estimate of `beta1`. When `extrapolated`, it is the mean of
            `2 R^{4J} - R^J`, which removes the `c / sqrt(J)` truncation bias of the window.
        stderr: Its standard error (0 for a pinned value).
        n_samples: Number of samples.
        J: Truncation window `|j| <= J`.
        grid_step: Grid resolution of the two-sided path, only read by the `grid` method.
        seed: Master seed.
        method: `lattice` (exact draws at `U + j`), `grid` (grid paths plus bridge interpolation) or `pinned`.
        edge_undercut: Share of samples whose continuous minimum over the first cell beyond the
            widest window is below the windowed minimum.
        extrapolated: Whether `value` is extrapolated in `1 / sqrt(J)`.
        window_mean: Plain mean of `R^J`.
    """

    value: float
    stderr: float
    n_samples: int
    J: int
    grid_step: float
    seed: int
    method: BetaMethod = "lattice"
    edge_undercut: float = 0.0
    extrapolated: bool = False
    window_mean: Optional[float] = None

    def __post_init__(self):
        if not self.value > 0.0:
            raise ParameterDomainError(f"beta1 must be > 0, got {self.value}")
        if not self.stderr >= 0.0 or math.isinf(self.stderr):
            raise ParameterDomainError(f"beta1 stderr must be finite and >= 0, got {self.stderr}")

    @classmethod
    def pinned(cls, value: float) -> "BesselBetaEstimate":
        return cls(value=value, stderr=0.0, n_samples=0, J=0, grid_step=0.0, seed=0, method="pinned")

    def matches(
        self,
        J: int,  # noqa: N803
        grid_step: float,
        n_samples: int,
        seed: int,
        method: BetaMethod,
        extrapolate: bool,
    ) -> bool:
        """
        Whether this record was produced by the given estimator settings.
        """
        return (
            self.method == method
            and self.J == J
            and self.n_samples == n_samples
            and self.seed == seed
            and self.extrapolated == _extrapolates(J, extrapolate)
            and (method != "grid" or self.grid_step == grid_step)
        )


def _extrapolates(J: int, extrapolate: bool) -> bool:  # noqa: N803
    return extrapolate and J > 0


def _lattice_norms(J: int, stream: np.random.Generator, size: int):  # noqa: N803
    """
    Norms of the right walk at `U + k`, `k = 0..J+1`, and of the left walk at `k + 1 - U`, `k = 0..J`.

    Columns are drawn in the order of `k`, so a wider window reuses the numbers of a narrower one.
    """
    u = stream.random(size)
    right = np.zeros((size, 3))
    left = np.zeros((size, 3))
    right_norms = np.empty((size, J + 2))
    left_norms = np.empty((size, J + 1))
    for k in range(J + 2):
        right += np.sqrt(u if k == 0 else 1.0)[..., None] * stream.standard_normal((size, 3))
        left += np.sqrt(1.0 - u if k == 0 else 1.0)[..., None] * stream.standard_normal((size, 3))
        right_norms[:, k] = np.linalg.norm(right, axis=1)
        if k <= J:
            left_norms[:, k] = np.linalg.norm(left, axis=1)
    return right_norms, left_norms


def _grid_norms(J: int, grid_step: float, stream: np.random.Generator, size: int):  # noqa: N803
    """
    Same quantities read off grid paths: the 3-D walk at `tau` is drawn from the Gaussian
    bridge between the two grid nodes around it.
    """
    u = stream.random(size)
    steps = _side_steps(J + 2, grid_step)
    rows = np.arange(size)[:, None]

    def at(walk: np.ndarray, tau: np.ndarray) -> np.ndarray:
        k = np.minimum((tau / grid_step).astype(np.int64), steps - 1)
        w = (tau - k * grid_step) / grid_step
        lo, hi = walk[rows, k], walk[rows, k + 1]
        sd = np.sqrt(grid_step * w * (1.0 - w))
        point = lo + w[..., None] * (hi - lo) + sd[..., None] * stream.standard_normal(lo.shape)
        return np.linalg.norm(point, axis=-1)

    right_walk = _brownian_3d(steps, grid_step, stream, size)
    left_walk = _brownian_3d(steps, grid_step, stream, size)
    right_norms = at(right_walk, u[:, None] + np.arange(J + 2)[None, :])
    left_norms = at(left_walk, (1.0 - u)[:, None] + np.arange(J + 1)[None, :])
    return right_norms, left_norms


def _window_min(right: np.ndarray, left: np.ndarray, J: int) -> np.ndarray:  # noqa: N803
    r = right[:, : J + 1].min(axis=1)
    if J > 0:
        r = np.minimum(r, left[:, :J].min(axis=1))
    return r


def _r_block(
    J: int,  # noqa: N803
    wide: int,
    grid_step: float,
    method: BetaMethod,
    stream: np.random.Generator,
    size: int,
):
    """
    `R^J` and `R^wide` on the same samples (`wide >= J`), with the edge undercut flags of the wide window.
    """
    if method == "grid":
        right, left = _grid_norms(wide, grid_step, stream, size)
    else:
        right, left = _lattice_norms(wide, stream, size)
    r, r_wide = _window_min(right, left, J), _window_min(right, left, wide)
    edge = sample_bessel_bridge_min(1.0, 2.0, right[:, wide], right[:, wide + 1], stream)
    if wide > 0:
        edge = np.minimum(edge, sample_bessel_bridge_min(1.0, 2.0, left[:, wide - 1], left[:, wide], stream))
    return r, r_wide, edge < r_wide


def _check_beta_args(J: int, grid_step: float, n_samples: int) -> None:  # noqa: N803
    if J < 0:
        raise ParameterDomainError(f"truncation J must be >= 0, got {J}")
    if not grid_step > 0.0:
        raise ParameterDomainError(f"grid step must be > 0, got {grid_step}")
    if n_samples < 1:
        raise ParameterDomainError(f"need at least one sample, got {n_samples}")


def sample_r(
    J: int,  # noqa: N803
    n_samples: int,
    seed: int,
    *,
    grid_step: float = DEFAULT_GRID_STEP,
    method: BetaMethod = "lattice",
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> np.ndarray:
    """
    Raw draws of `R^J = min_{|j| <= J} Rcheck(U + j)`. `grid_step` is only read by the `grid` method.
    """
    _check_beta_args(J, grid_step, n_samples)
    stream = BlockStream(n_samples, seed, block_size=block_size, desc="R samples")
    return np.concatenate([r for r, _, _ in stream.run(lambda s, n: _r_block(J, J, grid_step, method, s, n))])


def estimate_beta1(
    J: int = DEFAULT_J,  # noqa: N803
    grid_step: float = DEFAULT_GRID_STEP,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    *,
    method: BetaMethod = "lattice",
    extrapolate: bool = True,
    block_size: Optional[int] = None,
) -> BesselBetaEstimate:
    """
    Monte Carlo estimate of `beta1 = E R`.

    The `lattice` method draws the 3-D Brownian motions exactly at the times `U + j` and does
    not use `grid_step`; the `grid` method simulates whole grid paths first and is meant as a
    cross-check.

    The windowed mean `E R^J` exceeds `beta1` by about `c / sqrt(J)`. With `extrapolate` (and
    `J > 0`) the windows `J` and `4J` are read off the same samples and `2 R^{4J} - R^J` is
    averaged instead, which leaves an `O(1/J)` bias.

    Raises:
        ParameterDomainError: for `J < 0`, a non-positive grid step, fewer than two samples
            or the `pinned` method.
    """
    _check_beta_args(J, grid_step, n_samples)
    if n_samples < 2:
        raise ParameterDomainError(f"a standard error needs at least two samples, got {n_samples}")
    if method == "pinned":
        raise ParameterDomainError("a pinned beta1 is not estimated")
    if block_size is None:
        block_size = DEFAULT_BLOCK_SIZE if method == "lattice" else 2**8
    extrapolated = _extrapolates(J, extrapolate)
    wide = 4 * J if extrapolated else J
    stream = BlockStream(n_samples, seed, block_size=block_size, desc="beta1")
    stats, window = BlockStats(), BlockStats()
    undercut = 0
    for r, r_wide, edge in stream.run(lambda s, n: _r_block(J, wide, grid_step, method, s, n)):
        stats = stats.merge(BlockStats.from_values(2.0 * r_wide - r if extrapolated else r))
        window = window.merge(BlockStats.from_values(r))
        undercut += int(edge.sum())
    logger.info(
        "beta1 = %.6f +- %.6f (J=%d, window mean %.6f, %d samples, %s)",
        stats.mean,
        stats.stderr,
        J,
        window.mean,
        n_samples,
        method,
    )
    return BesselBetaEstimate(
        value=stats.mean,
        stderr=stats.stderr,
        n_samples=n_samples,
        J=J,
        grid_step=grid_step,
        seed=seed,
        method=method,
        edge_undercut=undercut / n_samples,
        extrapolated=extrapolated,
        window_mean=window.mean,
    )


def cache_path() -> Path:
    root = os.environ.get(CACHE_ENV)
    base = Path(root) if root else Path.home() / ".cache" / "barriercc"
    return base / CACHE_FILE


def load_cached_beta1(path: Optional[Path] = None) -> Optional[BesselBetaEstimate]:
    """
    The cached record, or `None` when there is none or it cannot be decoded.
    """
    path = path or cache_path()
    if not path.is_file():
        return None
    try:
        return json.decode(path.read_bytes(), type=BesselBetaEstimate)
    except (DecodeError, ValidationError) as e:
        logger.warning("ignoring unreadable beta1 cache %s: %s", path, e)
        return None


def store_cached_beta1(estimate: BesselBetaEstimate, path: Optional[Path] = None) -> Path:
    path = path or cache_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(json.format(json.encode(estimate), indent=2))
    tmp.replace(path)
    logger.info("stored beta1 record in %s", path)
    return path


def resolve_beta1(
    source: Beta1Source = "cached",
    *,
    pinned: Optional[float] = None,
    J: int = DEFAULT_J,  # noqa: N803
    grid_step: float = DEFAULT_GRID_STEP,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    method: BetaMethod = "lattice",
    extrapolate: bool = True,
) -> BesselBetaEstimate:
    """
    Return the `beta1` to use: a pinned value, the cached record, or a fresh estimate
    (stored in the cache).

    A cached record is only used when it was produced by the requested settings; a missing,
    unreadable or mismatching cache is recomputed and overwritten.
    """
    if source == "pinned":
        if pinned is None:
            raise ParameterDomainError("beta1 source 'pinned' needs a value")
        return BesselBetaEstimate.pinned(pinned)
    if source == "cached":
        cached = load_cached_beta1()
        if cached is None:
            logger.warning("no cached beta1 in %s, computing it", cache_path())
        elif cached.matches(J, grid_step, n_samples, seed, method, extrapolate):
            logger.debug("using cached beta1 %.6f", cached.value)
            return cached
        else:
            logger.warning("cached beta1 in %s was estimated with other settings, recomputing it", cache_path())
    estimate = estimate_beta1(J, grid_step, n_samples, seed, method=method, extrapolate=extrapolate)
    store_cached_beta1(estimate)
    return estimate
