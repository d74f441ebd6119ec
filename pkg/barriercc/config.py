"""
Experiment configuration.

`ExperimentConfig` is a flat JSON document. Its defaults describe an up-and-out put in the
double-exponential jump-diffusion (sigma = 0.3, lambda = 7, p = 0.6, eta1 = 50, eta2 = 25,
S0 = K = 100, H = 110, rebate 10, r = 0.05, T = 1).

Values are resolved in this order, later ones winning: defaults, the `--config` file,
`--set FIELD=VALUE` overrides, dedicated command-line flags.
"""
import re
from pathlib import Path
from typing import Any, Literal, Optional, Union

from msgspec import DecodeError, Meta, Struct, ValidationError, convert, field, json, to_builtins
from typing_extensions import Annotated, TypeAlias

from .bessel import DEFAULT_GRID_STEP, DEFAULT_J, DEFAULT_SAMPLES, Beta1Source, BetaMethod
from .correction import ShiftMode
from .errors import ConfigError
from .model import (
    DEFAULT_REBATE_TIMING,
    BarrierOptionSpec,
    Direction,
    JumpDiffusionParams,
    Knock,
    KouJumpParams,
    OptionKind,
    RebateTiming,
)
from .rng import UINT64_MAX
from .validators import field_validators, find_validator, parse_assignment

OutputFormat: TypeAlias = Literal["json", "csv"]

Positive = Annotated[float, Meta(gt=0)]
NonNegative = Annotated[float, Meta(ge=0)]
Count = Annotated[int, Meta(ge=1)]
Seed = Annotated[int, Meta(ge=0)]

_FIELD_RE = re.compile(r"at `\$\.([A-Za-z_0-9]+)")


class ExperimentConfig(Struct, kw_only=True, forbid_unknown_fields=True):
    # model
    r: float = 0.05
    delta: float = 0.0
    sigma: Positive = 0.3
    lam: NonNegative = field(default=7.0, name="lambda")
    p: Annotated[float, Meta(ge=0, le=1)] = 0.6
    eta1: Annotated[float, Meta(gt=1)] = 50.0
    eta2: Positive = 25.0

    # contract
    kind: OptionKind = "put"
    direction: Direction = "up"
    knock: Knock = "out"
    strike: Positive = 100.0
    barrier: Positive = 110.0
    rebate: NonNegative = 10.0
    maturity: Positive = 1.0
    spot: Positive = 100.0
    rebate_timing: RebateTiming = DEFAULT_REBATE_TIMING

    # monitoring and Monte Carlo
    monitoring: list[Count] = field(default_factory=lambda: [5, 6, 7, 8, 9, 10, 15, 25])
    paths: Count = 4_000_000
    seed: Seed = 0
    mode: ShiftMode = "continuous_from_discrete"
    continuous_reference: Optional[Positive] = None

    # beta1
    beta1_source: Beta1Source = "cached"
    beta1: Optional[Positive] = None
    beta1_method: BetaMethod = "lattice"
    beta1_extrapolate: bool = True
    J: Annotated[int, Meta(ge=0)] = DEFAULT_J
    grid_step: Positive = DEFAULT_GRID_STEP
    samples: Count = DEFAULT_SAMPLES

    # property checks
    check_paths: Count = 4_000_000
    gap_n: Count = 256
    gap_samples: Count = 10_000
    drift_offset: float = 0.0

    # output
    output: Optional[str] = None
    format: OutputFormat = "json"

    def __post_init__(self):
        if self.seed > UINT64_MAX:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.beta1_source == "pinned" and self.beta1 is None:
            raise ValueError("beta1_source 'pinned' requires a value for beta1")
        if self.beta1_method == "pinned":
            raise ValueError("beta1_method must be 'lattice' or 'grid'")
        # builds the model once so that domain errors surface with the config
        self.to_model()
        self.to_spec()

    def to_model(self) -> JumpDiffusionParams:
        return JumpDiffusionParams(
            r=self.r,
            delta=self.delta,
            sigma=self.sigma,
            lam=self.lam,
            jumps=KouJumpParams(p=self.p, eta1=self.eta1, eta2=self.eta2),
        )

    def to_spec(self) -> BarrierOptionSpec:
        return BarrierOptionSpec(
            kind=self.kind,
            direction=self.direction,
            knock=self.knock,
            strike=self.strike,
            barrier=self.barrier,
            rebate=self.rebate,
            maturity=self.maturity,
            spot=self.spot,
        )


def _field_of(message: str) -> Optional[str]:
    match = _FIELD_RE.search(message)
    return match.group(1) if match else None


def _convert(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return convert(data, ExperimentConfig)
    except ValidationError as e:
        raise ConfigError(str(e), field=_field_of(str(e))) from e


def decode_config(raw: Union[bytes, str]) -> ExperimentConfig:
    try:
        return json.decode(raw, type=ExperimentConfig)
    except ValidationError as e:
        raise ConfigError(str(e), field=_field_of(str(e))) from e
    except DecodeError as e:
        raise ConfigError(f"malformed config: {e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config file {str(path)!r}: {e.strerror}", path=str(path)) from e
    return decode_config(raw)


def dump_config(config: ExperimentConfig) -> bytes:
    return json.format(json.encode(config), indent=2)


def apply_overrides(config: ExperimentConfig, assignments: list[str]) -> ExperimentConfig:
    """
    Apply `FIELD=VALUE` assignments, each value read as the field's annotated type.

    Raises:
        ConfigError: for unknown fields and values that do not validate.
    """
    if not assignments:
        return config
    validators = field_validators(ExperimentConfig)
    data = to_builtins(config)
    for text in assignments:
        try:
            name, value = parse_assignment(text)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        validator = find_validator(validators, name)
        if validator is None:
            raise ConfigError(f"unknown config field {name!r}", field=name)
        err, rv = validator.validate(value)
        if err:
            raise ConfigError(rv, field=validator.name)
        data[validator.name] = rv
    return _convert(data)


def with_flags(config: ExperimentConfig, **flags: Any) -> ExperimentConfig:
    """
    Apply dedicated command-line flags; `None` means the flag was not given.
    """
    given = {k: v for k, v in flags.items() if v is not None}
    if not given:
        return config
    data = to_builtins(config)
    data.update(given)
    return _convert(data)


def resolve_config(
    path: Optional[Union[str, Path]] = None,
    assignments: Optional[list[str]] = None,
    **flags: Any,
) -> ExperimentConfig:
    config = load_config(path) if path is not None else ExperimentConfig()
    config = apply_overrides(config, assignments or [])
    return with_flags(config, **flags)
