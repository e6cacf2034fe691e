import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qord.errors import DomainError, InputError, SchemeError
from qord.fisher import (
    BREAK_EVEN_VISIBILITY,
    FisherReport,
    Parameter,
    classical_crossings,
    classical_fisher_matrix,
    fi_curve,
    fi_for_parameter,
    fisher_information,
    fisher_summary,
    fringe_fisher,
    qfi_pure_state,
    rotation_generator,
    theta_generator,
)
from qord.measurement import FringeModel, Scheme, fringe_probabilities, quantum_probabilities, theta_of_rotations
from qord.state import TwoPhotonState, apply_optical_activity, make_phi, make_psi

GRID = np.arange(100) * 2 * np.pi / 100


def variance_oracle(amps, diag):
    # QFI = 4 Var(G) for a diagonal generator, from the outcome weights
    w = np.abs(amps) ** 2
    mean = np.sum(w * diag)
    return 4 * np.sum(w * (diag - mean) ** 2)


def test_ideal_fringe_fi_is_one_on_grid():
    for t in GRID:
        assert fisher_information(lambda x: fringe_probabilities(1.0, x), t) == pytest.approx(1.0, abs=1e-9)
        assert fringe_fisher(1.0, t) == 1.0


def test_v092_at_quarter_fringe():
    assert fringe_fisher(0.92, np.pi / 2) == pytest.approx(0.8464, abs=1e-15)
    assert fisher_information(lambda x: fringe_probabilities(0.92, x), np.pi / 2) == pytest.approx(0.8464, rel=1e-9)


def test_flat_fringes_carry_no_information():
    for t in GRID[::10]:
        assert fringe_fisher(1e-9, t) < 1e-17
        assert fisher_information(lambda x: fringe_probabilities(1e-9, x), t) < 1e-15


def test_analytic_matches_numeric_random_sweep(rng):
    for _ in range(1000):
        v = rng.uniform(0.01, 1.0)
        t = rng.uniform(0, 2 * np.pi)
        num = fisher_information(lambda x: fringe_probabilities(v, x), t)
        ana = fringe_fisher(v, t)
        assert num == pytest.approx(ana, rel=1e-6, abs=1e-12)


def test_negative_probability_rejected():
    with pytest.raises(DomainError):
        fisher_information(lambda x: np.array([1.2, -0.2]), 0.0)


@pytest.mark.parametrize("scheme, param, quantum, classical", [
    ("phi", "mean", 16.0, 8.0),
    ("psi", "difference", 4.0, 2.0),
])
@pytest.mark.parametrize("numeric", [False, True])
def test_factor_two_enhancement(scheme, param, quantum, classical, numeric):
    q = fi_for_parameter(scheme, param, np.pi / 2, 1.0, 0.0, numeric=numeric)
    c = fi_for_parameter("classical", param, np.pi / 2, 1.0, 0.0, numeric=numeric)
    assert q.fi_per_pair == pytest.approx(quantum, abs=1e-9)
    assert c.fi_per_pair == pytest.approx(classical, abs=1e-9)
    assert q.fi_per_pair / c.fi_per_pair == pytest.approx(2.0, abs=1e-9)


def test_phi_carries_no_difference_information():
    def probs(d):
        return quantum_probabilities(FringeModel("phi", 0.3, 0.9), theta_of_rotations("phi", 0.3, 0.01, d))

    assert fisher_information(probs, 0.02) < 1e-20
    with pytest.raises(SchemeError):
        fi_for_parameter("phi", "difference")
    with pytest.raises(SchemeError):
        fi_for_parameter("psi", "mean")


def test_reparametrization_factor():
    for v in (0.5, 0.92, 1.0):
        for t in (0.3, 1.2, 2.5):
            phi = fi_for_parameter("phi", "mean", t, v, 0.0)
            psi = fi_for_parameter("psi", "difference", t, v, 0.0)
            assert phi.fi_per_pair == pytest.approx(4 * psi.fi_per_pair, rel=1e-12)


def test_qfi_phi_theta_generator():
    g = theta_generator("phi")
    assert qfi_pure_state(make_phi(0.7), g) == pytest.approx(1.0, abs=1e-12)
    assert qfi_pure_state(make_phi(0.7), g) == pytest.approx(variance_oracle(make_phi(0.7).amplitudes, np.diag(g)))


def test_qfi_psi_theta_generator():
    assert qfi_pure_state(make_psi(-1.1), "psi") == pytest.approx(1.0, abs=1e-12)


def test_qfi_product_state_zero():
    rr = TwoPhotonState(np.array([1, 0, 0, 0], dtype=complex))
    assert qfi_pure_state(rr, theta_generator("phi")) == 0.0


def test_qfi_physical_generators():
    st_ = apply_optical_activity(make_phi(0.4), 0.01, 0.02)
    assert qfi_pure_state(st_, "mean") == pytest.approx(16.0, abs=1e-12)
    assert qfi_pure_state(st_, "difference") == pytest.approx(0.0, abs=1e-12)
    st_ = apply_optical_activity(make_psi(0.4), 0.01, 0.02)
    assert qfi_pure_state(st_, "difference") == pytest.approx(4.0, abs=1e-12)
    assert qfi_pure_state(st_, rotation_generator("mean")) == pytest.approx(0.0, abs=1e-12)


def test_qfi_rejects_unnormalized():
    with pytest.raises(InputError):
        qfi_pure_state(TwoPhotonState(np.ones(4)), "phi")


def test_qfi_matches_state_derivative_fidelity():
    # independent route: QFI = 4 (<d psi|d psi> - |<psi|d psi>|^2) by finite differences
    h = 1e-5
    base = make_psi(0.3)

    def evolved(d):
        return apply_optical_activity(base, -d / 2, d / 2).amplitudes

    dpsi = (evolved(h) - evolved(-h)) / (2 * h)
    psi = evolved(0.0)
    qfi = 4 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2)
    assert qfi == pytest.approx(4.0, rel=1e-8)


@settings(max_examples=300)
@given(st.floats(0.01, 1.0), st.floats(-3, 3))
def test_fi_never_exceeds_qfi(v, at):
    for scheme, param in (("phi", "mean"), ("psi", "difference")):
        r = fi_for_parameter(scheme, param, 0.4, v, at)
        assert r.fi_per_pair <= r.qfi_per_pair + 1e-9
    r = fi_for_parameter("psi", "theta", 0.0, v, at)
    assert r.fi_per_pair <= r.qfi_per_pair + 1e-9


def test_fi_equals_qfi_at_unit_visibility():
    for t in GRID:
        r = fi_for_parameter("phi", "theta", 0.0, 1.0, t, numeric=True)
        assert r.fi_per_pair == pytest.approx(r.qfi_per_pair, abs=1e-9)


def test_crb_sigma():
    r = FisherReport(Scheme.PSI, Parameter.DIFFERENCE, 4.0)
    assert r.crb_sigma(100) == pytest.approx(0.05)
    assert math.isinf(FisherReport(Scheme.PSI, Parameter.DIFFERENCE, 0.0).crb_sigma(100))


def test_classical_fisher_matrix_numeric_vs_analytic():
    model = FringeModel("classical", (0.9, 1.7), 0.8)
    num = classical_fisher_matrix(model, 0.1, -0.2, numeric=True)
    ana = classical_fisher_matrix(model, 0.1, -0.2, numeric=False)
    np.testing.assert_allclose(num, ana, rtol=1e-8)
    # unequal per-photon information couples mean and difference
    assert abs(ana[0, 1]) > 0


def test_classical_effective_fi_uses_schur_complement():
    model = FringeModel("classical", (0.9, 1.7), 0.8)
    f = classical_fisher_matrix(model, 0.0, 0.0, numeric=False)
    r = fi_for_parameter("classical", "mean", (0.9, 1.7), 0.8, 0.0)
    assert r.fi_per_pair == pytest.approx(1 / np.linalg.inv(f)[0, 0], rel=1e-12)


def test_fi_curve_unit_visibility_is_ideal():
    curve = fi_curve(1.0, 0.2, np.linspace(-1.5, 1.5, 101))
    np.testing.assert_allclose(curve.fi_experimental, curve.fi_quantum_ideal)
    assert np.all(curve.fi_classical_ideal == 2.0)


def test_fi_curve_peak_and_crossings():
    v = 0.92
    curve = fi_curve(v, np.pi / 2, np.linspace(-np.pi / 2, np.pi / 2, 2001))
    assert curve.fi_experimental.max() == pytest.approx(4 * v * v, abs=1e-12)
    assert curve.fi_experimental.min() < 2
    # closed form of the crossing: cos^2 theta = (2V^2 - 1) / V^2
    closed = math.acos(math.sqrt((2 * v * v - 1) / (v * v)))
    left, right = classical_crossings(v)
    assert left == pytest.approx(closed, abs=1e-12)
    assert right == pytest.approx(math.pi - closed, abs=1e-12)


def test_no_crossings_below_break_even_or_at_unity():
    assert classical_crossings(0.5) == []
    assert classical_crossings(1.0) == []
    assert BREAK_EVEN_VISIBILITY == pytest.approx(2 ** -0.5)


def test_bias_translates_curve():
    grid = np.linspace(-1.0, 1.0, 51)
    shift = 0.37
    a = fi_curve(0.92, 0.5, grid)
    b = fi_curve(0.92, 0.5 + shift, grid - shift / 2)
    np.testing.assert_allclose(a.fi_experimental, b.fi_experimental, atol=1e-12)


def test_fi_curve_grid_limits():
    with pytest.raises(DomainError):
        fi_curve(0.9, 0.0, [0.0, 2.0])


def test_summary_values():
    s = fisher_summary(fi_curve(1.0, np.pi / 2, np.linspace(-1, 1, 11)))
    assert s["enhancement_ratio"] == pytest.approx(2.0)
    s = fisher_summary(fi_curve(0.92, np.pi / 2, np.linspace(-1, 1, 11)))
    assert s["max_fi_exp"] == pytest.approx(3.3856)
