import pytest
from msgspec import json

from barriercc.config import (
    ExperimentConfig,
    apply_overrides,
    decode_config,
    dump_config,
    load_config,
    resolve_config,
    with_flags,
)
from barriercc.errors import ConfigError
from barriercc.model import BarrierOptionSpec, JumpDiffusionParams, KouJumpParams


def test_defaults_describe_the_reference_contract():
    config = ExperimentConfig()
    assert config.to_model() == JumpDiffusionParams(
        r=0.05, delta=0.0, sigma=0.3, lam=7.0, jumps=KouJumpParams(p=0.6, eta1=50.0, eta2=25.0)
    )
    assert config.to_spec() == BarrierOptionSpec(
        kind="put", direction="up", knock="out", strike=100.0, barrier=110.0, rebate=10.0, maturity=1.0, spot=100.0
    )
    assert config.monitoring == [5, 6, 7, 8, 9, 10, 15, 25]
    assert config.rebate_timing == "hit"


def test_dump_and_decode():
    config = apply_overrides(ExperimentConfig(), ["sigma=0.25", "monitoring=[5, 50]"])
    raw = dump_config(config)
    assert json.decode(raw)["lambda"] == 7.0
    assert decode_config(raw) == config
    assert dump_config(decode_config(raw)) == raw


@pytest.mark.parametrize(
    ("raw", "field"),
    [
        (b'{"sigma": -1}', "sigma"),
        (b'{"lambda": -0.5}', "lambda"),
        (b'{"eta1": 1.0}', "eta1"),
        (b'{"monitoring": [5, 0]}', "monitoring"),
        (b'{"kind": "straddle"}', "kind"),
        (b'{"seed": -3}', "seed"),
    ],
)
def test_invalid_fields_are_named(raw, field):
    with pytest.raises(ConfigError) as info:
        decode_config(raw)
    assert info.value.field == field
    assert info.value.to_json()["field"] == field


def test_unknown_and_malformed_documents():
    with pytest.raises(ConfigError):
        decode_config(b'{"volatility": 0.3}')
    with pytest.raises(ConfigError):
        decode_config(b'{"sigma": ')
    with pytest.raises(ConfigError, match="beta1"):
        decode_config(b'{"beta1_source": "pinned"}')


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "missing.json")
    assert info.value.to_json()["path"] == str(tmp_path / "missing.json")


def test_overrides_are_typed():
    config = apply_overrides(
        ExperimentConfig(),
        [
            "sigma=0.2",
            "kind=call",
            "lambda=0",
            "monitoring=[5,10]",
            "grid-step=0.25",
            "mode=discrete_from_continuous",
            "continuous_reference=13.24",
            "output=out/table.csv",
            "beta1_source=pinned",
            "beta1=0.5826",
        ],
    )
    assert config.sigma == 0.2
    assert config.kind == "call"
    assert config.lam == 0.0
    assert config.monitoring == [5, 10]
    assert config.grid_step == 0.25
    assert config.mode == "discrete_from_continuous"
    assert config.continuous_reference == 13.24
    assert config.output == "out/table.csv"
    assert config.beta1 == 0.5826
    assert apply_overrides(config, ["continuous_reference=null"]).continuous_reference is None


@pytest.mark.parametrize(
    ("assignment", "field"),
    [
        ("bogus=1", "bogus"),
        ("sigma=abc", "sigma"),
        ("sigma=-1", "sigma"),
        ("paths=0", "paths"),
        ("kind=straddle", "kind"),
    ],
)
def test_bad_overrides(assignment, field):
    with pytest.raises(ConfigError) as info:
        apply_overrides(ExperimentConfig(), [assignment])
    assert info.value.field == field


def test_malformed_override():
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), ["sigma"])
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), ["=0.3"])


def test_precedence(tmp_path):
    path = tmp_path / "config.json"
    path.write_bytes(b'{"sigma": 0.25, "paths": 100, "seed": 4}')
    config = resolve_config(path, ["paths=200", "sigma=0.35"], paths=300, seed=None)
    assert config.sigma == 0.35
    assert config.paths == 300
    assert config.seed == 4
    assert resolve_config(path).paths == 100
    assert resolve_config().paths == ExperimentConfig().paths


def test_flags_are_validated():
    assert with_flags(ExperimentConfig(), seed=None) == ExperimentConfig()
    with pytest.raises(ConfigError) as info:
        with_flags(ExperimentConfig(), paths=0)
    assert info.value.field == "paths"


def test_seed_covers_the_unsigned_64_bit_range():
    assert decode_config(b"{}").seed == ExperimentConfig().seed
    assert decode_config(b'{"seed": 0}').seed == 0
    assert decode_config(b'{"seed": 18446744073709551615}').seed == 2**64 - 1
    assert resolve_config(seed=2**64 - 1).seed == 2**64 - 1
    with pytest.raises(ConfigError):
        decode_config(b'{"seed": 18446744073709551616}')
    with pytest.raises(ValueError):
        ExperimentConfig(seed=2**64)
