"""Fisher information, quantum Fisher information and Cramer-Rao bounds.

Everything here is per detected pair and in rad^-2. Chain-rule factors from
the fringe phase theta to the physical rotations are 16 (mean rotation,
phi scheme) and 4 (rotation difference, psi scheme).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from qord.errors import DomainError, InputError, SchemeError
from qord.measurement import (
    HALF_FRINGE,
    FringeModel,
    Scheme,
    classical_probabilities,
    fringe_probabilities,
    theta_of_rotations,
)
from qord.state import (
    TwoPhotonState,
    _HEL1,
    _HEL2,
    apply_optical_activity,
    make_phi,
    make_psi,
)

ZERO_PROB = 1e-15
DEFAULT_STEP = 1e-3

# d theta / d parameter for each entangled scheme
CHAIN_FACTOR = {Scheme.PHI: 4.0, Scheme.PSI: 2.0}

# ideal per-pair FI about each physical parameter at optimal bias
IDEAL_QUANTUM_FI = {"mean": 16.0, "difference": 4.0}
IDEAL_CLASSICAL_FI = {"mean": 8.0, "difference": 2.0}


class Parameter(str, enum.Enum):
    THETA = "theta"
    MEAN = "mean"
    DIFFERENCE = "difference"

    @classmethod
    def parse(cls, value) -> "Parameter":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


SENSITIVE_TO = {Scheme.PHI: Parameter.MEAN, Scheme.PSI: Parameter.DIFFERENCE}


def _derivatives(prob_model: Callable, theta: float, h: float):
    # fourth-order central stencils for first and second derivatives
    pts = np.array([theta - 2 * h, theta - h, theta, theta + h, theta + 2 * h])
    p = np.array([np.asarray(prob_model(t), dtype=float) for t in pts])
    d1 = (p[0] - 8 * p[1] + 8 * p[3] - p[4]) / (12 * h)
    d2 = (-p[0] + 16 * p[1] - 30 * p[2] + 16 * p[3] - p[4]) / (12 * h * h)
    return p[2], d1, d2


def fisher_information(prob_model: Callable[[float], np.ndarray], theta: float, step: float = DEFAULT_STEP) -> float:
    """Classical FI sum_i (dp_i/dtheta)^2 / p_i by finite differences.

    Outcomes with p_i < 1e-15 are dropped from the direct sum; at such a
    point p_i is locally quadratic and its limiting contribution 2 p_i'' is
    added instead.
    """
    p, d1, d2 = _derivatives(prob_model, theta, step)
    if np.any(p < -ZERO_PROB):
        raise DomainError(f"negative outcome probability {p.min()!r} at theta={theta}")
    live = p >= ZERO_PROB
    total = float(np.sum(d1[live] ** 2 / p[live]))
    total += float(np.sum(2.0 * np.clip(d2[~live], 0.0, None)))
    return total


def fringe_fisher(visibility, theta):
    """Closed-form FI of the four-outcome fringe: V^2 sin^2 / (1 - V^2 cos^2)."""
    v = np.asarray(visibility, dtype=float)
    s2 = np.sin(theta) ** 2
    denom = 1.0 - v * v * np.cos(theta) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(denom > 0, v * v * s2 / np.where(denom > 0, denom, 1.0), 1.0)
    # V = 1: sin^2/sin^2 -> 1 at the fringe extrema as well
    out = np.where(v == 1.0, 1.0, out)
    return out if out.ndim else float(out)


def theta_generator(scheme) -> np.ndarray:
    """Generator G with |psi(theta)> = exp(i theta G)|psi(0)> for the fringe phase."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.PHI:
        return np.diag([0.0, 0.0, 0.0, 1.0])
    if scheme is Scheme.PSI:
        return np.diag([0.0, 0.0, 1.0, 0.0])
    raise SchemeError("no fringe-phase generator for the classical pair")


def rotation_generator(parameter) -> np.ndarray:
    """Generator of the optical-activity unitary for the mean rotation or the difference."""
    parameter = Parameter.parse(parameter)
    if parameter is Parameter.MEAN:
        return np.diag(-(_HEL1 + _HEL2).astype(float))
    if parameter is Parameter.DIFFERENCE:
        return np.diag(0.5 * (_HEL1 - _HEL2).astype(float))
    raise DomainError("use theta_generator for the fringe phase")


def qfi_pure_state(state: TwoPhotonState, generator) -> float:
    """QFI = 4 (<G^2> - <G>^2) for a pure state under unitary exp(-i x G)."""
    if not state.is_normalized():
        raise InputError(f"QFI needs a normalized state (norm={state.norm!r})")
    if isinstance(generator, str):
        try:
            generator = rotation_generator(generator)
        except ValueError:
            generator = theta_generator(generator)
    g = np.asarray(generator, dtype=complex)
    if g.ndim == 1:
        g = np.diag(g)
    if g.shape != (4, 4) or not np.allclose(g, g.conj().T):
        raise InputError("generator must be a Hermitian 4x4 matrix")
    psi = state.amplitudes
    gpsi = g @ psi
    mean = np.vdot(psi, gpsi).real
    second = np.vdot(gpsi, gpsi).real
    return float(4.0 * (second - mean * mean))


@dataclass(frozen=True)
class FisherReport:
    scheme: Scheme
    parameter: Parameter
    fi_per_pair: float
    qfi_per_pair: float | None = None
    theta: float | None = None

    def crb_sigma(self, n_pairs) -> float:
        """Cramer-Rao standard deviation after n_pairs detected pairs, in rad."""
        if n_pairs <= 0 or self.fi_per_pair <= 0:
            return math.inf
        return 1.0 / math.sqrt(n_pairs * self.fi_per_pair)


def classical_per_photon_fi(visibility: float, phase: float) -> float:
    """FI about one photon's own rotation: 4 V^2 sin^2 / (1 - V^2 cos^2) of phase 2a + b."""
    return 4.0 * fringe_fisher(visibility, phase)


def classical_fisher_matrix(model: FringeModel, alpha1: float, alpha2: float, numeric: bool = True) -> np.ndarray:
    """2x2 Fisher matrix about (mean, difference) for the separable pair."""
    if model.scheme is not Scheme.CLASSICAL:
        raise SchemeError("classical Fisher matrix needs the classical scheme")
    b1, b2 = model.bias_phase
    if numeric:
        def photon(m):
            def probs(a):
                a1, a2 = (a, alpha2) if m == 1 else (alpha1, a)
                o = classical_probabilities(model, a1, a2)
                p = o.p1 if m == 1 else o.p2
                return np.array([p, 1.0 - p])
            return probs

        f1 = fisher_information(photon(1), alpha1)
        f2 = fisher_information(photon(2), alpha2)
    else:
        f1 = classical_per_photon_fi(model.visibility, 2 * alpha1 + b1)
        f2 = classical_per_photon_fi(model.visibility, 2 * alpha2 + b2)
    per_photon = np.diag([f1, f2])
    # (a1, a2) = (mean - diff/2, mean + diff/2)
    jac = np.array([[1.0, -0.5], [1.0, 0.5]])
    return jac.T @ per_photon @ jac


def _effective(fmat: np.ndarray, idx: int) -> float:
    # information about one parameter with the other unknown (Schur complement)
    other = 1 - idx
    if fmat[other, other] <= 0:
        return float(fmat[idx, idx])
    return float(fmat[idx, idx] - fmat[idx, other] ** 2 / fmat[other, other])


def fi_for_parameter(scheme, parameter, bias_phase=HALF_FRINGE, visibility=1.0, at_value=0.0,
                     other_value=0.0, numeric=False) -> FisherReport:
    """FI about `parameter` at `at_value` (rad), with the other rotation at `other_value`."""
    scheme = Scheme.parse(scheme)
    parameter = Parameter.parse(parameter)
    model = FringeModel(scheme, bias_phase, visibility)

    if scheme is Scheme.CLASSICAL:
        if parameter is Parameter.THETA:
            raise SchemeError("the classical pair has no fringe phase")
        mean, diff = (at_value, other_value) if parameter is Parameter.MEAN else (other_value, at_value)
        fmat = classical_fisher_matrix(model, mean - diff / 2, mean + diff / 2, numeric=numeric)
        idx = 0 if parameter is Parameter.MEAN else 1
        return FisherReport(scheme, parameter, _effective(fmat, idx))

    if parameter is Parameter.THETA:
        theta = float(at_value)
        factor = 1.0
    else:
        if SENSITIVE_TO[scheme] is not parameter:
            raise SchemeError(f"{scheme.value} scheme carries no information about the {parameter.value} rotation")
        mean, diff = (at_value, other_value) if parameter is Parameter.MEAN else (other_value, at_value)
        theta = theta_of_rotations(scheme, bias_phase, mean, diff)
        factor = CHAIN_FACTOR[scheme] ** 2

    if numeric:
        info = fisher_information(lambda t: fringe_probabilities(visibility, t), theta)
    else:
        info = fringe_fisher(visibility, theta)

    base = (make_phi if scheme is Scheme.PHI else make_psi)(bias_phase)
    if parameter is Parameter.THETA:
        qfi = qfi_pure_state(base, theta_generator(scheme))
    else:
        evolved = apply_optical_activity(base, mean - diff / 2, mean + diff / 2)
        qfi = qfi_pure_state(evolved, rotation_generator(parameter))
    return FisherReport(scheme, parameter, factor * info, qfi, theta)


@dataclass(frozen=True)
class FICurve:
    visibility: float
    bias_phase: float
    delta_alpha: np.ndarray
    fi_experimental: np.ndarray
    fi_quantum_ideal: np.ndarray
    fi_classical_ideal: np.ndarray

    COLUMNS = ("delta_alpha_rad", "fi_exp", "fi_quantum_ideal", "fi_classical_ideal")

    def rows(self):
        return list(zip(*(a.tolist() for a in (self.delta_alpha, self.fi_experimental,
                                                 self.fi_quantum_ideal, self.fi_classical_ideal))))


def fi_curve(visibility: float, bias_phase: float, delta_alpha_grid) -> FICurve:
    """FI about the rotation difference for the psi scheme vs ideal quantum and classical lines."""
    grid = np.asarray(delta_alpha_grid, dtype=float)
    if np.any(np.abs(grid) > HALF_FRINGE + 1e-12):
        raise DomainError("delta_alpha grid must lie within +-pi/2")
    if not 0 < visibility <= 1:
        raise DomainError(f"visibility must lie in (0, 1], got {visibility}")
    theta = bias_phase + 2.0 * grid
    exp = CHAIN_FACTOR[Scheme.PSI] ** 2 * np.asarray(fringe_fisher(visibility, theta), dtype=float)
    return FICurve(
        float(visibility), float(bias_phase), grid, exp,
        np.full_like(grid, IDEAL_QUANTUM_FI["difference"]),
        np.full_like(grid, IDEAL_CLASSICAL_FI["difference"]),
    )


def classical_crossings(visibility: float) -> list[float]:
    """Fringe phases in [0, pi] where the psi-scheme FI about the difference equals the classical 2."""
    def excess(t):
        return 4.0 * fringe_fisher(visibility, t) - IDEAL_CLASSICAL_FI["difference"]

    if excess(HALF_FRINGE) < 0:
        return []
    if excess(0.0) >= 0:
        return []  # never below the classical line (V = 1)
    left = brentq(excess, 0.0, HALF_FRINGE, xtol=1e-14, rtol=1e-14)
    return [left, math.pi - left]


BREAK_EVEN_VISIBILITY = 1.0 / math.sqrt(2.0)


def fisher_summary(curve: FICurve) -> dict:
    v = curve.visibility
    peak = 4.0 * v * v
    return {
        "visibility": v,
        "bias_phase_rad": curve.bias_phase,
        "max_fi_exp": peak,
        "max_fi_exp_on_grid": float(np.max(curve.fi_experimental)) if curve.delta_alpha.size else None,
        "fi_quantum_ideal": IDEAL_QUANTUM_FI["difference"],
        "fi_classical_ideal": IDEAL_CLASSICAL_FI["difference"],
        "enhancement_ratio": peak / IDEAL_CLASSICAL_FI["difference"],
        "ideal_enhancement_ratio": IDEAL_QUANTUM_FI["difference"] / IDEAL_CLASSICAL_FI["difference"],
        "break_even_visibility": BREAK_EVEN_VISIBILITY,
        "classical_crossings_theta_rad": classical_crossings(v),
    }
