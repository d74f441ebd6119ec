import logging

import pytest

from barriercc.bessel import CACHE_ENV
from barriercc.model import BarrierOptionSpec, JumpDiffusionParams, KouJumpParams

# correction constant used where a test needs a fixed value instead of an estimate
BETA1 = 0.5826


@pytest.fixture(autouse=True)
def _cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "cache"))


@pytest.fixture(autouse=True)
def _reset_logging():
    yield
    logger = logging.getLogger("barriercc")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)


@pytest.fixture
def model() -> JumpDiffusionParams:
    return JumpDiffusionParams(r=0.05, delta=0.0, sigma=0.3, lam=7.0, jumps=KouJumpParams(p=0.6, eta1=50.0, eta2=25.0))


@pytest.fixture
def diffusion(model) -> JumpDiffusionParams:
    return model.without_jumps()


@pytest.fixture
def up_out_put() -> BarrierOptionSpec:
    return BarrierOptionSpec(
        kind="put", direction="up", knock="out", strike=100.0, barrier=110.0, rebate=10.0, maturity=1.0, spot=100.0
    )


@pytest.fixture
def up_out_call() -> BarrierOptionSpec:
    return BarrierOptionSpec(
        kind="call", direction="up", knock="out", strike=100.0, barrier=130.0, rebate=0.0, maturity=1.0, spot=100.0
    )
