"""Two-photon polarization states in the circular basis.

Amplitudes are ordered (RR, RL, LR, LL); the first letter is the photon in
path 1. Linear polarizations are fixed by

    |H> = (|R> + |L>) / sqrt(2),    |V> = i (|R> - |L>) / sqrt(2)

which makes the H/V coincidence fringes come out as 1/4 (1 +- cos theta)
with theta the relative phase between the two populated components.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from qord.errors import DomainError, InputError

BASIS = ("RR", "RL", "LR", "LL")
OUTCOMES = ("HH", "HV", "VH", "VV")

NORM_TOL = 1e-12
BAND_NM = (700.0, 900.0)
DEFAULT_PUMP_NM = 404.85


class Polarization(enum.Enum):
    L = "L"
    R = "R"
    H = "H"
    V = "V"

    @property
    def helicity(self) -> int:
        if self is Polarization.L:
            return 1
        if self is Polarization.R:
            return -1
        raise ValueError(f"helicity undefined for linear polarization {self.value}")


# single-photon kets in the (R, L) basis
_KET = {
    Polarization.R: np.array([1.0, 0.0], dtype=complex),
    Polarization.L: np.array([0.0, 1.0], dtype=complex),
    Polarization.H: np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    Polarization.V: 1j * np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
}

# helicity of each basis component, per photon
_HEL1 = np.array([-1, -1, 1, 1])
_HEL2 = np.array([-1, 1, -1, 1])


def ket(pol: Polarization) -> np.ndarray:
    return _KET[pol].copy()


@dataclass(frozen=True)
class WavelengthPair:
    lambda1: float
    lambda2: float
    pump: float = DEFAULT_PUMP_NM

    def __post_init__(self):
        if not self.pump > 0:
            raise DomainError(f"pump wavelength must be positive, got {self.pump}")
        lo, hi = BAND_NM
        for name in ("lambda1", "lambda2"):
            lam = getattr(self, name)
            if not lo <= lam <= hi:
                raise DomainError(f"{name}={lam} nm outside [{lo}, {hi}] nm")
        lhs = 1.0 / self.lambda1 + 1.0 / self.lambda2
        rhs = 1.0 / self.pump
        if abs(lhs - rhs) > 1e-9 * rhs:
            raise DomainError(
                f"energy conservation violated: 1/{self.lambda1} + 1/{self.lambda2} != 1/{self.pump}"
            )

    @property
    def delta(self) -> float:
        return self.lambda2 - self.lambda1

    @classmethod
    def degenerate(cls, pump: float = DEFAULT_PUMP_NM) -> "WavelengthPair":
        return cls(2.0 * pump, 2.0 * pump, pump)


@dataclass(frozen=True)
class TwoPhotonState:
    amplitudes: np.ndarray
    wavelengths: WavelengthPair = field(default_factory=WavelengthPair.degenerate)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (4,):
            raise InputError(f"expected 4 amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol

    def relative_phase(self, first: str, second: str) -> float:
        """Phase of the `second` component relative to `first`, wrapped to (-pi, pi]."""
        a = self.amplitudes[BASIS.index(first)]
        b = self.amplitudes[BASIS.index(second)]
        return float(np.angle(b * np.conj(a)))


def make_phi(bias_phase: float, wavelengths: WavelengthPair | None = None) -> TwoPhotonState:
    """Correlated-helicity state (|RR> + e^{i bias}|LL>)/sqrt(2)."""
    s = 1.0 / np.sqrt(2.0)
    amps = np.array([s, 0.0, 0.0, s * np.exp(1j * bias_phase)], dtype=complex)
    return TwoPhotonState(amps, wavelengths or WavelengthPair.degenerate())


def make_psi(bias_phase: float, wavelengths: WavelengthPair | None = None) -> TwoPhotonState:
    """Anti-correlated-helicity state (|RL> + e^{i bias}|LR>)/sqrt(2)."""
    s = 1.0 / np.sqrt(2.0)
    amps = np.array([0.0, s, s * np.exp(1j * bias_phase), 0.0], dtype=complex)
    return TwoPhotonState(amps, wavelengths or WavelengthPair.degenerate())


def _require_normalized(state: TwoPhotonState):
    if not state.is_normalized():
        raise InputError(f"state is not normalized (norm={state.norm!r})")


def optical_activity_operator(alpha1: float, alpha2: float) -> np.ndarray:
    """Diagonal 4x4 unitary exp(-i (L1 alpha1 + L2 alpha2)) in the circular basis."""
    return np.diag(np.exp(-1j * (_HEL1 * alpha1 + _HEL2 * alpha2)))


def apply_optical_activity(state: TwoPhotonState, alpha1: float, alpha2: float) -> TwoPhotonState:
    """Rotate the linear polarization of photon m by alpha_m (radians)."""
    _require_normalized(state)
    phases = np.exp(-1j * (_HEL1 * alpha1 + _HEL2 * alpha2))
    return TwoPhotonState(state.amplitudes * phases, state.wavelengths)


def _hv_projectors() -> np.ndarray:
    # rows are <HH|, <HV|, <VH|, <VV| in the circular basis
    h, v = _KET[Polarization.H], _KET[Polarization.V]
    return np.array([np.kron(a, b).conj() for a in (h, v) for b in (h, v)])


_HV_BRAS = _hv_projectors()


def hv_projection_probabilities(state: TwoPhotonState) -> np.ndarray:
    """Probabilities of the HH, HV, VH, VV coincidence outcomes."""
    _require_normalized(state)
    return np.abs(_HV_BRAS @ state.amplitudes) ** 2
