import math

import numpy as np
import pytest

from barriercc.bessel import BesselBetaEstimate
from barriercc.correction import (
    CorrectionRequest,
    apply_correction,
    corrected_continuous_price,
    corrected_discrete_price,
    corrected_probability,
    fit_through_origin,
    monitoring_gap_scaling,
    shift_size,
    shifted_barrier,
)
from barriercc.errors import ParameterDomainError
from barriercc.pricing import price_continuous, price_discrete

from .conftest import BETA1

PATHS = 2 * 10**4


def test_shifted_barrier_examples():
    up = shifted_barrier(110.0, "up", 0.3, 1.0, 25, BETA1)
    assert up == pytest.approx(113.913, abs=5e-4)
    down = shifted_barrier(110.0, "down", 0.3, 1.0, 25, BETA1)
    assert down == pytest.approx(106.221, abs=5e-4)
    inverse = shifted_barrier(110.0, "up", 0.3, 1.0, 25, BETA1, mode="continuous_from_discrete")
    assert inverse == pytest.approx(down, rel=1e-14)
    assert shifted_barrier(90.0, "down", 0.3, 1.0, 5, BETA1) < 90.0
    assert shifted_barrier(90.0, "down", 0.3, 1.0, 5, BETA1, mode="continuous_from_discrete") > 90.0


def test_shift_round_trip():
    there = shifted_barrier(110.0, "up", 0.3, 1.0, 7, BETA1)
    back = shifted_barrier(there, "up", 0.3, 1.0, 7, BETA1, mode="continuous_from_discrete")
    assert back == pytest.approx(110.0, rel=1e-12)


def test_shift_vanishes_with_frequent_monitoring():
    assert shifted_barrier(110.0, "up", 0.3, 1.0, 10**12, BETA1) == pytest.approx(110.0, rel=1e-6)
    assert shift_size(0.3, 1.0, 4, BETA1) == pytest.approx(0.3 * BETA1 * 0.5)


def test_beta1_estimate_is_accepted():
    estimate = BesselBetaEstimate.pinned(BETA1)
    assert shift_size(0.3, 1.0, 5, estimate) == shift_size(0.3, 1.0, 5, BETA1)


@pytest.mark.parametrize(
    "args",
    [
        (110.0, "up", 0.0, 1.0, 5, BETA1),
        (110.0, "up", 0.3, 0.0, 5, BETA1),
        (110.0, "up", 0.3, 1.0, 0, BETA1),
        (110.0, "up", 0.3, 1.0, 5, 0.0),
        (0.0, "up", 0.3, 1.0, 5, BETA1),
    ],
)
def test_shift_domain(args):
    with pytest.raises(ParameterDomainError):
        shifted_barrier(*args)


def test_request_domain(up_out_put):
    with pytest.raises(ParameterDomainError):
        CorrectionRequest(spec=up_out_put, n=0, beta1=BesselBetaEstimate.pinned(BETA1))


def test_corrected_prices_use_the_shifted_barrier(model, up_out_put):
    lowered = up_out_put.with_barrier(shifted_barrier(110.0, "up", 0.3, 1.0, 5, BETA1, "continuous_from_discrete"))
    raised = up_out_put.with_barrier(shifted_barrier(110.0, "up", 0.3, 1.0, 5, BETA1))
    assert corrected_continuous_price(model, up_out_put, 5, PATHS, 1, BETA1).mean == (
        price_discrete(model, lowered, 5, PATHS, 1).mean
    )
    assert corrected_discrete_price(model, up_out_put, 5, PATHS, 1, BETA1).mean == (
        price_continuous(model, raised, PATHS, 1).mean
    )


def test_correction_result(model, up_out_put):
    request = CorrectionRequest(spec=up_out_put, n=25, beta1=BesselBetaEstimate.pinned(BETA1))
    result = apply_correction(request, model, 1000, 2)
    assert result.beta1_used == BETA1
    assert result.mode == "discrete_from_continuous"
    assert result.shifted_barrier == pytest.approx(113.913, abs=5e-4)
    assert result.estimate.n_paths == 1000


def test_correction_bypassed_when_breached_at_inception(model, up_out_put):
    spec = up_out_put.with_barrier(99.0)
    for mode in ("discrete_from_continuous", "continuous_from_discrete"):
        request = CorrectionRequest(spec=spec, n=5, beta1=BesselBetaEstimate.pinned(BETA1), mode=mode)
        result = apply_correction(request, model, 1000, 3)
        assert result.shifted_barrier == 99.0
        assert result.estimate.mean == pytest.approx(10.0 * math.exp(-model.r), rel=1e-14)


def test_correction_reduces_the_error(model, up_out_put):
    paths = 10**5
    continuous = price_continuous(model, up_out_put, paths, 4)
    discrete = price_discrete(model, up_out_put, 5, paths, 5)
    corrected = corrected_continuous_price(model, up_out_put, 5, paths, 5, BETA1)
    assert abs(corrected.mean - continuous.mean) < abs(discrete.mean - continuous.mean)


@pytest.mark.parametrize("side", ["raise_continuous", "lower_discrete"])
@pytest.mark.parametrize("n", [16, 64])
def test_probability_correction(diffusion, side, n):
    comp = corrected_probability(diffusion, math.log(1.1), 0.0, 1.0, n, 10**5, 6, BETA1, side)
    assert comp.side == side
    assert comp.shift == pytest.approx(0.3 * BETA1 / math.sqrt(n))
    assert abs(comp.difference) <= 3 * comp.combined_stderr + 0.5 / n


def test_probability_correction_domain(model):
    with pytest.raises(ParameterDomainError):
        corrected_probability(model, 0.0, 0.0, 1.0, 16, 100, 0, BETA1)


def test_fit_through_origin():
    x = np.array([0.5, 0.25, 0.125])
    slope, r_squared = fit_through_origin(x, 3.0 * x)
    assert slope == pytest.approx(3.0)
    assert r_squared == pytest.approx(1.0)
    slope, r_squared = fit_through_origin(x, np.array([1.0, 0.1, 0.9]))
    assert r_squared < 0.9


def test_scaling_needs_two_points(diffusion, up_out_call):
    with pytest.raises(ParameterDomainError):
        monitoring_gap_scaling(diffusion, up_out_call, [16], 100, 0)


def test_scaling_fit(diffusion, up_out_call):
    fit = monitoring_gap_scaling(diffusion, up_out_call, [8, 32], PATHS, 7)
    assert [n for n, _ in fit.points] == [8, 32]
    assert fit.slope > 0.0
    assert fit.r_squared > 0.9
