"""Overflow asymptotics and Monte Carlo validation for transient Gaussian fluid queues."""

from .asympt import AsymptoticEstimate, approx_dispatch
from .errors import GFQError
from .estimate import MCEstimate, estimate_pair, estimate_pi, estimate_pi_sup
from .geometry import QueueSpec
from .regimes import ExpScale, FixedT, OffsetFromPeak, PowerLaw, Scenario, classify
from .variance_models import FractionalBrownian, NumericTable

__all__ = [
    "AsymptoticEstimate",
    "ExpScale",
    "FixedT",
    "FractionalBrownian",
    "GFQError",
    "MCEstimate",
    "NumericTable",
    "OffsetFromPeak",
    "PowerLaw",
    "QueueSpec",
    "Scenario",
    "approx_dispatch",
    "classify",
    "estimate_pair",
    "estimate_pi",
    "estimate_pi_sup",
]
