"""
Bodies of the CLI subcommands: each turns a resolved `ExperimentConfig` into a result record.

Records embed the package version and the resolved config. They never carry timings, so
the same config and seed always give byte-identical output.
"""
import logging
import math
from typing import Any, Callable, Optional, Union

import numpy as np
from msgspec import Struct, json, structs
from scipy import integrate, stats

from . import __version__
from .bessel import (
    BesselBetaEstimate,
    bessel_bridge_grid_min,
    bessel_bridge_min_cdf,
    bessel_transition_density,
    bridge_max_argmax_density,
    bridge_min_cdf_bound,
    estimate_beta1,
    max_argmax_density,
    reduced_bessel_density,
    reduced_density_bound,
    resolve_beta1,
    sample_r,
    store_cached_beta1,
)
from .config import ExperimentConfig
from .correction import CorrectionRequest, apply_correction, corrected_probability
from .errors import CommandError
from .pricing import gap_distribution_sample, martingale_check, price_continuous, price_discrete, price_vanilla
from .rng import UINT64_MAX, jump_time_gap_statistics
from .stream import BlockStream

logger = logging.getLogger(__name__)

CONVERGENCE_HEADER = [
    "n",
    "discrete_price",
    "discrete_stderr",
    "corrected_price",
    "corrected_stderr",
    "continuous_ref",
    "rel_err_discrete",
    "rel_err_corrected",
]


def _resolve_beta1(config: ExperimentConfig) -> BesselBetaEstimate:
    return resolve_beta1(
        config.beta1_source,
        pinned=config.beta1,
        J=config.J,
        grid_step=config.grid_step,
        n_samples=config.samples,
        seed=config.seed,
        method=config.beta1_method,
        extrapolate=config.beta1_extrapolate,
    )


def _other_seed(seed: int) -> int:
    return (seed + 1) % (UINT64_MAX + 1)


class PriceRow(Struct, frozen=True):
    monitoring: Union[int, str]
    price: float
    stderr: float
    n_paths: int


class PriceRecord(Struct, frozen=True):
    version: str
    config: ExperimentConfig
    seed: int
    results: list[PriceRow]

    def table(self):
        return ["monitoring", "price", "stderr", "n_paths"], [
            [r.monitoring, r.price, r.stderr, r.n_paths] for r in self.results
        ]


def run_price(config: ExperimentConfig) -> PriceRecord:
    """
    Continuous price followed by the discrete price for every `n` of `config.monitoring`.
    """
    model, spec = config.to_model(), config.to_spec()
    kwargs = {"rebate_timing": config.rebate_timing}
    estimates = [("continuous", price_continuous(model, spec, config.paths, config.seed, **kwargs))]
    for n in config.monitoring:
        estimates.append((n, price_discrete(model, spec, n, config.paths, config.seed, **kwargs)))
    return PriceRecord(
        version=__version__,
        config=config,
        seed=config.seed,
        results=[PriceRow(monitoring=m, price=e.mean, stderr=e.stderr, n_paths=e.n_paths) for m, e in estimates],
    )


class CorrectRow(Struct, frozen=True):
    n: int
    price: float
    stderr: float
    n_paths: int
    shifted_barrier: float
    beta1_used: float


class CorrectRecord(Struct, frozen=True):
    version: str
    config: ExperimentConfig
    seed: int
    mode: str
    beta1: BesselBetaEstimate
    results: list[CorrectRow]

    def table(self):
        return ["n", "price", "stderr", "n_paths", "shifted_barrier", "beta1_used"], [
            [r.n, r.price, r.stderr, r.n_paths, r.shifted_barrier, r.beta1_used] for r in self.results
        ]


def run_correct(config: ExperimentConfig) -> CorrectRecord:
    model, spec = config.to_model(), config.to_spec()
    beta1 = _resolve_beta1(config)
    rows = []
    for n in config.monitoring:
        result = apply_correction(
            CorrectionRequest(spec=spec, n=n, beta1=beta1, mode=config.mode),
            model,
            config.paths,
            config.seed,
            rebate_timing=config.rebate_timing,
        )
        rows.append(
            CorrectRow(
                n=n,
                price=result.estimate.mean,
                stderr=result.estimate.stderr,
                n_paths=result.estimate.n_paths,
                shifted_barrier=result.shifted_barrier,
                beta1_used=result.beta1_used,
            )
        )
    return CorrectRecord(
        version=__version__, config=config, seed=config.seed, mode=config.mode, beta1=beta1, results=rows
    )


class ConvergenceRow(Struct, frozen=True):
    n: int
    discrete_price: float
    discrete_stderr: float
    corrected_price: float
    corrected_stderr: float
    continuous_ref: float
    rel_err_discrete: float
    rel_err_corrected: float


class ConvergenceTable(Struct, frozen=True):
    version: str
    config: ExperimentConfig
    beta1: Optional[BesselBetaEstimate]
    rows: list[ConvergenceRow]

    def table(self):
        return list(CONVERGENCE_HEADER), [[getattr(r, name) for name in CONVERGENCE_HEADER] for r in self.rows]


def _rel_err(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference)


def run_convergence_table(config: ExperimentConfig) -> ConvergenceTable:
    """
    Discrete and corrected prices for every `n` of `config.monitoring`.

    With `mode = continuous_from_discrete` the corrected column is the discrete price at the
    lowered barrier and both relative errors are taken against the continuous reference.
    With `discrete_from_continuous` it is the continuous price at the raised barrier and its
    relative error is taken against the discrete price.
    """
    if not config.monitoring:
        return ConvergenceTable(version=__version__, config=config, beta1=None, rows=[])
    model, spec = config.to_model(), config.to_spec()
    beta1 = _resolve_beta1(config)
    kwargs = {"rebate_timing": config.rebate_timing}
    reference = config.continuous_reference
    if reference is None:
        reference = price_continuous(model, spec, config.paths, config.seed, **kwargs).mean
    rows = []
    for n in config.monitoring:
        discrete = price_discrete(model, spec, n, config.paths, config.seed, **kwargs)
        corrected = apply_correction(
            CorrectionRequest(spec=spec, n=n, beta1=beta1, mode=config.mode),
            model,
            config.paths,
            config.seed,
            **kwargs,
        ).estimate
        target = reference if config.mode == "continuous_from_discrete" else discrete.mean
        rows.append(
            ConvergenceRow(
                n=n,
                discrete_price=discrete.mean,
                discrete_stderr=discrete.stderr,
                corrected_price=corrected.mean,
                corrected_stderr=corrected.stderr,
                continuous_ref=reference,
                rel_err_discrete=_rel_err(discrete.mean, reference),
                rel_err_corrected=_rel_err(corrected.mean, target),
            )
        )
        logger.info("n=%d: discrete %.4f, corrected %.4f", n, discrete.mean, corrected.mean)
    return ConvergenceTable(version=__version__, config=config, beta1=beta1, rows=rows)


class Beta1Record(Struct, frozen=True):
    version: str
    config: ExperimentConfig
    estimate: BesselBetaEstimate

    def table(self):
        names = [
            "value",
            "stderr",
            "n_samples",
            "J",
            "grid_step",
            "seed",
            "method",
            "edge_undercut",
            "extrapolated",
            "window_mean",
        ]
        return names, [[getattr(self.estimate, name) for name in names]]


def run_beta1(config: ExperimentConfig) -> Beta1Record:
    """
    Estimate `beta1` and store it as the cached record.
    """
    estimate = estimate_beta1(
        config.J,
        config.grid_step,
        config.samples,
        config.seed,
        method=config.beta1_method,
        extrapolate=config.beta1_extrapolate,
    )
    store_cached_beta1(estimate)
    return Beta1Record(version=__version__, config=config, estimate=estimate)


class CheckResult(Struct, frozen=True):
    name: str
    passed: bool
    detail: dict[str, Any]


class CheckReport(Struct, frozen=True):
    version: str
    config: ExperimentConfig
    passed: bool
    results: list[CheckResult]

    @property
    def failed(self) -> list[str]:
        return [r.name for r in self.results if not r.passed]

    def table(self):
        return ["check", "passed", "detail"], [
            [r.name, r.passed, json.encode(r.detail).decode()] for r in self.results
        ]


CheckFunc = Callable[[ExperimentConfig], CheckResult]
CHECKS: dict[str, CheckFunc] = {}


def check(name: str):
    """
    Register a property check under `name`.
    """

    def inner(func: Callable[[ExperimentConfig], tuple[bool, dict[str, Any]]]):
        if name in CHECKS:
            raise CommandError(f"Check {name!r} already exists")

        def run(config: ExperimentConfig) -> CheckResult:
            passed, detail = func(config)
            logger.info("check %s: %s", name, "ok" if passed else "FAILED")
            return CheckResult(name=name, passed=bool(passed), detail=detail)

        CHECKS[name] = run
        return func

    return inner


def _within(estimate, expected: float, k: float = 3.0, cushion: float = 0.0) -> bool:
    return abs(estimate.mean - expected) <= k * estimate.stderr + cushion


@check("parity")
def check_parity(config: ExperimentConfig):
    model = config.to_model()
    base = structs.replace(config.to_spec(), rebate=0.0)
    n = config.monitoring[0] if config.monitoring else 10
    paths = config.check_paths
    knock_out = price_discrete(model, base.with_knock("out"), n, paths, config.seed)
    knock_in = price_discrete(model, base.with_knock("in"), n, paths, config.seed)
    vanilla = price_vanilla(model, base, paths, config.seed, n=n)
    gap = knock_in.mean + knock_out.mean - vanilla.mean
    passed = abs(gap) <= 1e-9 * max(1.0, abs(vanilla.mean))
    return passed, {"n": n, "in": knock_in.mean, "out": knock_out.mean, "vanilla": vanilla.mean, "gap": gap}


@check("martingale")
def check_martingale(config: ExperimentConfig):
    estimate = martingale_check(
        config.to_model(), config.maturity, config.check_paths, config.seed, drift_offset=config.drift_offset
    )
    return _within(estimate, 1.0), {"mean": estimate.mean, "stderr": estimate.stderr}


@check("bessel_kernels")
def check_bessel_kernels(config: ExperimentConfig):
    worst = 0.0
    for t in (0.1, 1.0, 4.0):
        for x in (0.0, 0.5, 2.0):
            top = x + 40.0 * math.sqrt(t)
            mass, _ = integrate.quad(
                lambda y, t=t, x=x: bessel_transition_density(t, x, y),
                0.0,
                top,
                points=[x] if x > 0 else None,
                epsabs=1e-13,
                epsrel=1e-13,
                limit=200,
            )
            worst = max(worst, abs(mass - 1.0))

    # joint law of the argmax and the maximum of the standard bridge from 0 to 0;
    # given the argmax s the maximum lives on the scale sqrt(s(1 - s))
    joint, _ = integrate.dblquad(
        lambda m, s: bridge_max_argmax_density(s, m),
        0.0,
        1.0,
        0.0,
        lambda s: 40.0 * math.sqrt(s * (1.0 - s)),
        epsabs=1e-11,
        epsrel=1e-11,
    )

    rng = np.random.default_rng(config.seed)
    s, m = rng.uniform(0.05, 3.0, 20), rng.uniform(0.05, 3.0, 20)
    identity = float(np.max(np.abs(max_argmax_density(s, m) - bessel_transition_density(s, 0.0, m) / (m * math.sqrt(2)))))

    excess = 0.0
    for gamma in (-0.5, 0.0, 0.7, 3.0):
        s, r, m = rng.uniform(0.01, 2.0, 2000), rng.uniform(0.0, 3.0, 2000), rng.uniform(1e-3, 5.0, 2000)
        lhs = reduced_bessel_density(s, r, m) * np.exp(gamma * m - 0.5 * gamma * gamma * s)
        excess = max(excess, float(np.max(lhs / reduced_density_bound(s, r, gamma))))

    passed = worst <= 1e-8 and abs(joint - 1.0) <= 1e-6 and identity <= 1e-12 and excess <= 1.0 + 1e-12
    return passed, {
        "normalization_error": worst,
        "joint_mass": joint,
        "identity_error": identity,
        "bound_ratio": excess,
    }


@check("jump_times")
def check_jump_times(config: ExperimentConfig):
    n_samples = min(config.check_paths, 10**6)
    worst_mean, worst_prob, passed = -math.inf, -math.inf, True
    for l in (1, 2, 5):  # noqa: E741
        for t in (0.5, 1.0):
            res = jump_time_gap_statistics(l, t, n_samples, config.seed)
            for mean, stderr in zip(res.inv_sqrt_mean, res.inv_sqrt_stderr):
                worst_mean = max(worst_mean, (mean - res.bound) / stderr)
                passed &= mean <= res.bound + 3.0 * stderr
            for alpha, probs, stderrs in zip(res.alpha, res.short_gap_prob, res.short_gap_stderr):
                for prob, stderr in zip(probs, stderrs):
                    worst_prob = max(worst_prob, (prob - l * alpha) / max(stderr, 1e-300))
                    passed &= prob <= l * alpha + 3.0 * stderr
    return passed, {"worst_mean_z": worst_mean, "worst_prob_z": worst_prob, "n_samples": n_samples}


MIN_SAMPLER_CASES = [(1.0, 1.0, 1.0, 0.5), (0.5, 1.5, 0.5, 0.3)]


@check("bessel_bridge_min")
def check_bessel_bridge_min(config: ExperimentConfig):
    rng = np.random.default_rng(config.seed)
    y, m = rng.uniform(0.01, 3.0, 10**4), rng.uniform(0.01, 3.0, 10**4)
    b, span = rng.uniform(0.0, 3.0, 10**4), rng.uniform(0.01, 2.0, 10**4)
    cdf = np.array([bessel_bridge_min_cdf(1.0, 1.0 + T, yy, mm, bb) for yy, mm, bb, T in zip(y, m, b, span)])
    bound_ok = bool(np.all(cdf <= bridge_min_cdf_bound(y, m, b) + 1e-12))

    # grid minima overshoot the continuous one; the level is raised by beta1 sqrt(dt) to compensate
    beta1 = _resolve_beta1(config).value
    n_steps, n_samples = 1024, 10**4
    cases, passed = [], bound_ok
    for y0, m0, T, level in MIN_SAMPLER_CASES:
        shifted = level + beta1 * math.sqrt(T / n_steps)
        hits = np.concatenate(
            list(
                BlockStream(n_samples, config.seed, block_size=256, desc="Bessel bridge").run(
                    lambda s, k, y0=y0, m0=m0, T=T, shifted=shifted: bessel_bridge_grid_min(
                        1.0, 1.0 + T, y0, m0, n_steps, s, k
                    )
                    <= shifted
                )
            )
        )
        freq = float(hits.mean())
        stderr = float(hits.std(ddof=1) / math.sqrt(n_samples))
        expected = bessel_bridge_min_cdf(1.0, 1.0 + T, y0, m0, level)
        ok = abs(freq - expected) <= 3.0 * stderr + 0.01 and expected <= bridge_min_cdf_bound(y0, m0, level)
        passed &= ok
        cases.append({"y": y0, "m": m0, "T": T, "b": level, "cdf": expected, "mc": freq, "stderr": stderr})
    return passed, {"bound_holds": bound_ok, "cases": cases}


@check("gap_law")
def check_gap_law(config: ExperimentConfig):
    model = config.to_model().without_jumps()
    sample = gap_distribution_sample(model, config.maturity, config.gap_n, config.gap_samples, config.seed)
    scale = config.sigma * math.sqrt(config.maturity)
    oracle = scale * sample_r(config.J, config.gap_samples, _other_seed(config.seed))
    ks = stats.ks_2samp(sample.gap, oracle)
    rho, rho_pvalue = stats.spearmanr(sample.gap, sample.terminal)
    passed = ks.pvalue > 0.01 and rho_pvalue > 0.001
    return passed, {
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "gap_mean": float(sample.gap.mean()),
        "oracle_mean": float(oracle.mean()),
        "spearman_rho": float(rho),
        "spearman_pvalue": float(rho_pvalue),
    }


@check("correction_probabilities")
def check_correction_probabilities(config: ExperimentConfig):
    model = config.to_model()
    beta1 = _resolve_beta1(config)
    x = math.log(1.1)
    cases, passed = [], True
    for n in (16, 64):
        for side in ("raise_continuous", "lower_discrete"):
            comp = corrected_probability(model, x, 0.0, config.maturity, n, config.check_paths, config.seed, beta1, side)
            ok = abs(comp.difference) <= 3.0 * comp.combined_stderr + 0.5 / n
            passed &= ok
            cases.append({"n": n, "side": side, "lhs": comp.lhs.mean, "rhs": comp.rhs.mean, "ok": ok})
    return passed, {"cases": cases}


def run_check_suite(config: ExperimentConfig, names: Optional[list[str]] = None) -> CheckReport:
    """
    Run the registered property checks (all of them by default).
    """
    selected = names or list(CHECKS)
    unknown = [name for name in selected if name not in CHECKS]
    if unknown:
        raise CommandError(f"unknown check(s): {', '.join(unknown)}")
    results = [CHECKS[name](config) for name in selected]
    return CheckReport(
        version=__version__, config=config, passed=all(r.passed for r in results), results=results
    )
