"""Joint receiver and relay power-allocation design for multihop amplify-and-forward networks."""

__version__ = "0.1.0"

from .estimators import EqualPowerDesign, MMSERelayDesign, MSRRelayDesign  # noqa: E402
from .network import (  # noqa: E402
    ChannelSet,
    GlobalPower,
    IndividualPower,
    LocalPower,
    Topology,
    draw_channels,
)

__all__ = [
    "__version__",
    "Topology",
    "ChannelSet",
    "GlobalPower",
    "LocalPower",
    "IndividualPower",
    "draw_channels",
    "MMSERelayDesign",
    "MSRRelayDesign",
    "EqualPowerDesign",
]
