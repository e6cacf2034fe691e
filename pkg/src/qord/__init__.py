"""Two-wavelength entangled-photon polarimetry: simulation and analysis toolkit."""

from qord.errors import (
    ConfigError,
    DomainError,
    FitError,
    InputError,
    MetadataError,
    SchemeError,
    VisibilityWarning,
)
from qord.measurement import FringeModel, Scheme
from qord.sample import DispersionModel, Sample
from qord.state import TwoPhotonState, WavelengthPair

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DispersionModel",
    "DomainError",
    "FitError",
    "FringeModel",
    "InputError",
    "MetadataError",
    "Sample",
    "Scheme",
    "SchemeError",
    "TwoPhotonState",
    "VisibilityWarning",
    "WavelengthPair",
]
