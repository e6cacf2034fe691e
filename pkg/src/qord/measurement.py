"""Outcome probabilities for the entangled schemes and the classical benchmark."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from qord.errors import DomainError, SchemeError

HALF_FRINGE = 0.5 * np.pi


class Scheme(str, enum.Enum):
    PHI = "phi"
    PSI = "psi"
    CLASSICAL = "classical"

    @property
    def is_quantum(self) -> bool:
        return self is not Scheme.CLASSICAL

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise SchemeError(f"unknown scheme {value!r}; expected one of phi, psi, classical") from None


@dataclass(frozen=True)
class FringeModel:
    """Fringe parameters for one scheme.

    For the quantum schemes `bias_phase` is the state's bias phase alpha0. For
    the classical pair it is the analyzer offset (beta1, beta2); a scalar is
    applied to both photons.
    """

    scheme: Scheme
    bias_phase: float | tuple[float, float] = HALF_FRINGE
    visibility: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not 0 < self.visibility <= 1:
            raise DomainError(f"visibility must lie in (0, 1], got {self.visibility}")
        if self.scheme is Scheme.CLASSICAL:
            b = self.bias_phase
            pair = (float(b), float(b)) if np.ndim(b) == 0 else tuple(float(x) for x in b)
            if len(pair) != 2:
                raise DomainError("classical analyzer offsets need exactly two values")
            object.__setattr__(self, "bias_phase", pair)
        elif np.ndim(self.bias_phase) != 0:
            raise DomainError("quantum schemes take a single bias phase")
        else:
            object.__setattr__(self, "bias_phase", float(self.bias_phase))


def theta_of_rotations(scheme, bias_phase: float, mean_rotation: float, difference_rotation: float) -> float:
    """Fringe phase for the entangled schemes; all angles in radians."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.PHI:
        return bias_phase - 4.0 * mean_rotation
    if scheme is Scheme.PSI:
        return bias_phase + 2.0 * difference_rotation
    raise SchemeError("the classical pair has no single fringe phase")


def fringe_probabilities(visibility, theta):
    """(HH, HV, VH, VV) = 1/4 (1 +- V cos theta); broadcasts over theta."""
    c = visibility * np.cos(theta)
    same = 0.25 * (1.0 + c)
    mixed = 0.25 * (1.0 - c)
    return np.stack([same, mixed, mixed, same], axis=-1)


def quantum_probabilities(model: FringeModel, theta: float) -> np.ndarray:
    if not model.scheme.is_quantum:
        raise SchemeError("quantum_probabilities needs the phi or psi scheme")
    return fringe_probabilities(model.visibility, theta)


@dataclass(frozen=True)
class ClassicalOutcome:
    p1: float  # P(photon 1 found H)
    p2: float
    joint: np.ndarray  # (HH, HV, VH, VV)


def classical_probabilities(model: FringeModel, alpha1: float, alpha2: float) -> ClassicalOutcome:
    """Independent linearly polarized photons analysed in the H/V basis."""
    if model.scheme is not Scheme.CLASSICAL:
        raise SchemeError("classical_probabilities needs the classical scheme")
    b1, b2 = model.bias_phase
    v = model.visibility
    p1 = 0.5 * (1.0 + v * np.cos(2.0 * alpha1 + b1))
    p2 = 0.5 * (1.0 + v * np.cos(2.0 * alpha2 + b2))
    joint = np.array([p1 * p2, p1 * (1 - p2), (1 - p1) * p2, (1 - p1) * (1 - p2)])
    return ClassicalOutcome(float(p1), float(p2), joint)


def outcome_probabilities(model: FringeModel, mean_rotation: float, difference_rotation: float) -> np.ndarray:
    """Joint outcome probabilities for any scheme given (mean, difference) rotations in radians."""
    if model.scheme.is_quantum:
        theta = theta_of_rotations(model.scheme, model.bias_phase, mean_rotation, difference_rotation)
        return quantum_probabilities(model, theta)
    a1 = mean_rotation - 0.5 * difference_rotation
    a2 = mean_rotation + 0.5 * difference_rotation
    return classical_probabilities(model, a1, a2).joint
