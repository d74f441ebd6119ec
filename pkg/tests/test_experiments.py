import pytest
from msgspec import structs

from barriercc import __version__
from barriercc.bessel import load_cached_beta1
from barriercc.config import ExperimentConfig, apply_overrides
from barriercc.errors import CommandError
from barriercc.experiments import (
    CHECKS,
    CONVERGENCE_HEADER,
    check,
    run_beta1,
    run_check_suite,
    run_convergence_table,
    run_correct,
    run_price,
)

from .conftest import BETA1


@pytest.fixture
def config() -> ExperimentConfig:
    return apply_overrides(
        ExperimentConfig(),
        [
            "paths=4000",
            "monitoring=[5, 10]",
            "beta1_source=pinned",
            f"beta1={BETA1}",
            "check_paths=20000",
            "samples=2000",
            "J=2",
        ],
    )


def test_price_record(config):
    record = run_price(config)
    assert record.version == __version__
    assert record.config == config
    assert [row.monitoring for row in record.results] == ["continuous", 5, 10]
    assert all(row.n_paths == 4000 for row in record.results)
    header, rows = record.table()
    assert header == ["monitoring", "price", "stderr", "n_paths"]
    assert len(rows) == 3


def test_correct_record(config):
    record = run_correct(structs.replace(config, mode="discrete_from_continuous", monitoring=[25]))
    assert record.beta1.value == BETA1
    (row,) = record.results
    assert row.shifted_barrier == pytest.approx(113.913, abs=5e-4)
    assert row.beta1_used == BETA1


def test_convergence_table(config):
    table = run_convergence_table(structs.replace(config, continuous_reference=13.24))
    header, rows = table.table()
    assert header == CONVERGENCE_HEADER
    assert [row[0] for row in rows] == [5, 10]
    for row in table.rows:
        assert row.continuous_ref == 13.24
        assert row.rel_err_discrete == pytest.approx(abs(row.discrete_price - 13.24) / 13.24)
        assert row.rel_err_corrected == pytest.approx(abs(row.corrected_price - 13.24) / 13.24)


def test_convergence_against_the_discrete_price(config):
    table = run_convergence_table(structs.replace(config, mode="discrete_from_continuous", monitoring=[5]))
    (row,) = table.rows
    assert row.rel_err_corrected == pytest.approx(abs(row.corrected_price - row.discrete_price) / row.discrete_price)


def test_empty_convergence_table(config):
    table = run_convergence_table(structs.replace(config, monitoring=[], beta1_source="cached"))
    assert table.rows == []
    assert table.beta1 is None
    # nothing was estimated
    assert load_cached_beta1() is None


def test_beta1_record_is_cached(config):
    record = run_beta1(config)
    assert record.estimate.J == 2
    assert record.estimate.n_samples == 2000
    assert load_cached_beta1() == record.estimate
    header, rows = record.table()
    assert header[0] == "value" and rows[0][0] == record.estimate.value


def test_check_registry():
    assert set(CHECKS) == {
        "parity",
        "martingale",
        "bessel_kernels",
        "jump_times",
        "bessel_bridge_min",
        "gap_law",
        "correction_probabilities",
    }
    with pytest.raises(CommandError):
        check("parity")(lambda config: (True, {}))


def test_unknown_check(config):
    with pytest.raises(CommandError):
        run_check_suite(config, ["parity", "nope"])


@pytest.mark.parametrize("name", ["parity", "martingale", "bessel_kernels", "jump_times", "correction_probabilities"])
def test_checks_pass(config, name):
    report = run_check_suite(config, [name])
    assert report.passed, report.results[0].detail
    assert report.failed == []


def test_martingale_check_catches_a_wrong_drift(config):
    report = run_check_suite(structs.replace(config, drift_offset=0.05), ["martingale"])
    assert not report.passed
    assert report.failed == ["martingale"]
    header, rows = report.table()
    assert header == ["check", "passed", "detail"]
    assert rows[0][:2] == ["martingale", False]


@pytest.mark.slow
@pytest.mark.parametrize("name", ["bessel_bridge_min", "gap_law"])
def test_slow_checks_pass(config, name):
    report = run_check_suite(structs.replace(config, J=20), [name])
    assert report.passed, report.results[0].detail
