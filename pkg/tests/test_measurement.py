import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qord.errors import DomainError, SchemeError
from qord.measurement import (
    FringeModel,
    Scheme,
    classical_probabilities,
    outcome_probabilities,
    quantum_probabilities,
    theta_of_rotations,
)

vis = st.floats(1e-3, 1.0)
ang = st.floats(-10, 10, allow_nan=False)


def test_theta_phi():
    assert theta_of_rotations(Scheme.PHI, 0.0, np.pi / 8, 0.0) == pytest.approx(-np.pi / 2)


def test_theta_psi():
    assert theta_of_rotations("psi", np.pi / 2, 0.3, 0.0) == pytest.approx(np.pi / 2)


def test_theta_phi_ignores_difference():
    assert theta_of_rotations("phi", 0.2, 0.1, 0.0) == theta_of_rotations("phi", 0.2, 0.1, 5.0)


def test_theta_classical_rejected():
    with pytest.raises(SchemeError):
        theta_of_rotations("classical", 0, 0, 0)


@pytest.mark.parametrize("v, theta, expected", [
    (1.0, 0.0, [0.5, 0, 0, 0.5]),
    (0.92, 0.0, [0.48, 0.02, 0.02, 0.48]),
    (0.37, np.pi / 2, [0.25] * 4),
])
def test_quantum_probabilities(v, theta, expected):
    np.testing.assert_allclose(quantum_probabilities(FringeModel("psi", 0, v), theta), expected, atol=1e-15)


@given(vis, ang)
def test_quantum_normalization_and_symmetry(v, theta):
    p = quantum_probabilities(FringeModel("phi", 0, v), theta)
    assert abs(p.sum() - 1) < 1e-12
    assert p[0] == p[3] and p[1] == p[2]


@given(vis, ang)
def test_visibility_is_convex_mixture(v, theta):
    ideal = quantum_probabilities(FringeModel("phi", 0, 1.0), theta)
    mixed = quantum_probabilities(FringeModel("phi", 0, v), theta)
    np.testing.assert_allclose(mixed, v * ideal + (1 - v) * 0.25, atol=1e-14)


def test_classical_certain_h():
    out = classical_probabilities(FringeModel("classical", 0.0, 1.0), 0.0, 0.0)
    assert out.p1 == pytest.approx(1.0) and out.p2 == pytest.approx(1.0)


def test_classical_half_fringe_uniform():
    out = classical_probabilities(FringeModel("classical", np.pi / 2, 1.0), 0.0, 0.0)
    np.testing.assert_allclose(out.joint, [0.25] * 4, atol=1e-15)


def test_classical_independence(rng):
    for _ in range(100):
        v = rng.uniform(0.1, 1)
        b = tuple(rng.uniform(-np.pi, np.pi, 2))
        a1, a2 = rng.uniform(-1, 1, 2)
        out = classical_probabilities(FringeModel("classical", b, v), a1, a2)
        assert out.joint[0] == pytest.approx(out.p1 * out.p2, abs=1e-15)
        assert abs(out.joint.sum() - 1) < 1e-12


def test_wrong_scheme_errors():
    with pytest.raises(SchemeError):
        classical_probabilities(FringeModel("phi"), 0, 0)
    with pytest.raises(SchemeError):
        quantum_probabilities(FringeModel("classical"), 0)
    with pytest.raises(SchemeError):
        Scheme.parse("noon")


@pytest.mark.parametrize("v", [0.0, 1.5, -0.2])
def test_visibility_range(v):
    with pytest.raises(DomainError):
        FringeModel("phi", 0, v)


def test_outcome_probabilities_dispatch():
    p = outcome_probabilities(FringeModel("psi", np.pi / 2, 1.0), 0.3, np.pi / 4)
    np.testing.assert_allclose(p, quantum_probabilities(FringeModel("psi", 0, 1), np.pi), atol=1e-15)
    c = outcome_probabilities(FringeModel("classical", np.pi / 2, 1.0), 0.0, 0.0)
    np.testing.assert_allclose(c, [0.25] * 4)
