__version__ = "0.1.0"

from .bessel import BesselBetaEstimate, estimate_beta1, resolve_beta1  # noqa: E402
from .correction import (  # noqa: E402
    corrected_continuous_price,
    corrected_discrete_price,
    corrected_probability,
    shifted_barrier,
)
from .model import BarrierOptionSpec, JumpDiffusionParams, KouJumpParams  # noqa: E402
from .pricing import MCEstimate, price_continuous, price_discrete  # noqa: E402
