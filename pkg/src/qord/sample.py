"""Chiral solution model: Drude-type rotatory dispersion and rotation angles.

Units follow polarimetry convention: specific rotation in deg ml g^-1 dm^-1,
concentration in g/ml, path length in dm, wavelengths in nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import yaml

from qord.errors import ConfigError, DomainError
from qord.state import BAND_NM, DEFAULT_PUMP_NM, WavelengthPair

MAX_DELTA_LAMBDA_NM = 20.0


@dataclass(frozen=True)
class DrudeTerm:
    amplitude: float  # deg nm^2 ml g^-1 dm^-1
    lambda0: float  # nm


@dataclass(frozen=True)
class DispersionModel:
    """Specific rotation [alpha](lambda) = sum_k A_k / (lambda^2 - lambda0_k^2)."""

    terms: tuple[DrudeTerm, ...]
    name: str = "custom"

    def __post_init__(self):
        terms = tuple(t if isinstance(t, DrudeTerm) else DrudeTerm(*t) for t in self.terms)
        if not terms:
            raise DomainError("dispersion model needs at least one term")
        for t in terms:
            if not 0 <= t.lambda0 < BAND_NM[0]:
                raise DomainError(
                    f"resonance lambda0={t.lambda0} nm must lie in [0, {BAND_NM[0]}) nm"
                )
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_mapping(cls, data: dict) -> "DispersionModel":
        try:
            terms = tuple(DrudeTerm(float(t["A"]), float(t["lambda0"])) for t in data["terms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad dispersion block: {exc}") from exc
        try:
            return cls(terms, name=str(data.get("name", "custom")))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def to_mapping(self) -> dict:
        return {
            "name": self.name,
            "terms": [{"A": t.amplitude, "lambda0": t.lambda0} for t in self.terms],
        }


def default_sucrose_model() -> DispersionModel:
    text = resources.files("qord.data").joinpath("sucrose.yaml").read_text()
    return DispersionModel.from_mapping(yaml.safe_load(text))


@dataclass(frozen=True)
class Sample:
    concentration: float = 0.0  # g/ml
    path_length: float = 0.2  # dm
    model: DispersionModel = field(default_factory=default_sucrose_model)
    is_blank: bool = False
    label: str = ""

    def __post_init__(self):
        if self.concentration < 0:
            raise DomainError(f"concentration must be >= 0, got {self.concentration}")
        if not self.path_length > 0:
            raise DomainError(f"path length must be > 0, got {self.path_length}")
        if not self.label:
            label = "water" if self.is_blank else f"C={self.concentration:g}g/ml"
            object.__setattr__(self, "label", label)

    @classmethod
    def blank(cls, path_length: float = 0.2, model: DispersionModel | None = None) -> "Sample":
        return cls(0.0, path_length, model or default_sucrose_model(), is_blank=True)


def _check_band(lam: float):
    lo, hi = BAND_NM
    if not lo <= lam <= hi:
        raise DomainError(f"wavelength {lam} nm outside validated band [{lo}, {hi}] nm")


def specific_rotation(model: DispersionModel, lam: float, check_band: bool = True) -> float:
    if check_band:
        _check_band(lam)
    return math.fsum(t.amplitude / (lam * lam - t.lambda0 * t.lambda0) for t in model.terms)


def specific_rotation_derivative(model: DispersionModel, lam: float) -> float:
    """d[alpha]/d(lambda) in deg ml g^-1 dm^-1 nm^-1."""
    _check_band(lam)
    return math.fsum(
        -2.0 * t.amplitude * lam / (lam * lam - t.lambda0 * t.lambda0) ** 2 for t in model.terms
    )


def rotation_angle(sample: Sample, lam: float) -> float:
    """Rotation of the plane of linear polarization, in degrees."""
    _check_band(lam)
    if sample.is_blank or sample.concentration == 0:
        return 0.0
    return specific_rotation(sample.model, lam) * sample.concentration * sample.path_length


def mean_and_difference(sample: Sample, pair: WavelengthPair) -> tuple[float, float]:
    """(mean, difference) of the two photons' rotations in degrees; difference is a2 - a1."""
    a1 = rotation_angle(sample, pair.lambda1)
    a2 = rotation_angle(sample, pair.lambda2)
    return 0.5 * (a1 + a2), a2 - a1


def wavelength_pair(delta_lambda: float, pump: float = DEFAULT_PUMP_NM) -> WavelengthPair:
    """Signal/idler pair separated by `delta_lambda` nm under energy conservation.

    Solves lambda1^2 + (d - 2p) lambda1 - d p = 0 for the positive root.
    """
    if not 0 <= delta_lambda <= MAX_DELTA_LAMBDA_NM:
        raise DomainError(f"delta_lambda must be in [0, {MAX_DELTA_LAMBDA_NM}] nm")
    if not pump > 0:
        raise DomainError("pump wavelength must be positive")
    d, p = float(delta_lambda), float(pump)
    disc = 4.0 * p * p + d * d
    if disc < 0:
        raise DomainError("no real wavelength pair")
    lam1 = 0.5 * ((2.0 * p - d) + math.sqrt(disc))
    return WavelengthPair(lam1, lam1 + d, p)


def predicted_rotations(
    sample: Sample, delta_lambdas: Sequence[float], pump: float = DEFAULT_PUMP_NM
) -> list[tuple[float, float, float]]:
    """(delta_lambda, mean_deg, difference_deg) for each requested separation."""
    out = []
    for dl in delta_lambdas:
        m, d = mean_and_difference(sample, wavelength_pair(dl, pump))
        out.append((float(dl), m, d))
    return out
