import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qord.errors import ConfigError, DomainError
from qord.sample import (
    DispersionModel,
    DrudeTerm,
    Sample,
    default_sucrose_model,
    mean_and_difference,
    predicted_rotations,
    rotation_angle,
    specific_rotation,
    specific_rotation_derivative,
    wavelength_pair,
)

# configured sucrose constants, evaluated by hand below
A_SUCROSE = 21648000.0
L0_SUCROSE = 145.945


def drude_oracle(lam):
    return A_SUCROSE / (lam ** 2 - L0_SUCROSE ** 2)


def test_single_term_arithmetic():
    model = DispersionModel((DrudeTerm(1.0, 0.0),))
    assert specific_rotation(model, 100.0, check_band=False) == pytest.approx(1e-4, rel=1e-15)


def test_sodium_d_golden():
    value = specific_rotation(default_sucrose_model(), 589.3, check_band=False)
    assert value == pytest.approx(66.41009306061021, rel=1e-12)
    assert value == pytest.approx(drude_oracle(589.3), rel=1e-14)
    # tabulated [alpha]_D of sucrose is +66.47
    assert value == pytest.approx(66.47, rel=2e-3)


def test_out_of_band_rejected():
    with pytest.raises(DomainError):
        specific_rotation(default_sucrose_model(), 650.0)


def test_monotone_over_band():
    m = default_sucrose_model()
    assert specific_rotation(m, 800) > specific_rotation(m, 819)
    lams = np.linspace(700, 900, 201)
    vals = [specific_rotation(m, x) for x in lams]
    assert np.all(np.diff(vals) < 0)


def test_near_linear_over_probed_band():
    m = default_sucrose_model()
    lams = np.linspace(800, 819, 400)
    vals = np.array([specific_rotation(m, x) for x in lams])
    secant = vals[0] + (vals[-1] - vals[0]) * (lams - 800) / 19
    assert np.max(np.abs(vals - secant)) < 0.01 * abs(vals[-1] - vals[0])


def test_rotation_golden():
    s = Sample(0.2, 0.2)
    assert rotation_angle(s, 809.7) == pytest.approx(1.3651279955358275, rel=1e-12)
    assert rotation_angle(s, 809.7) == pytest.approx(drude_oracle(809.7) * 0.2 * 0.2, rel=1e-14)


def test_rotation_zero_cases():
    assert rotation_angle(Sample(0.0), 805.0) == 0.0
    assert rotation_angle(Sample.blank(), 805.0) == 0.0
    assert mean_and_difference(Sample.blank(), wavelength_pair(19)) == (0.0, 0.0)


@given(st.floats(700, 900), st.floats(0.01, 1.0), st.floats(0.5, 8.0))
def test_concentration_linearity(lam, conc, factor):
    base = rotation_angle(Sample(conc), lam)
    scaled = rotation_angle(Sample(conc * factor), lam)
    assert scaled == pytest.approx(factor * base, rel=1e-14)


def test_doubling_is_exact():
    assert rotation_angle(Sample(0.4), 812.0) == 2 * rotation_angle(Sample(0.2), 812.0)


def test_degenerate_pair():
    pair = wavelength_pair(0, 404.85)
    assert pair.lambda1 == pytest.approx(809.7, abs=1e-12)
    assert pair.lambda2 == pytest.approx(809.7, abs=1e-12)
    assert mean_and_difference(Sample(0.2), pair)[1] == 0.0


def test_pair_19nm_by_substitution():
    pair = wavelength_pair(19, 404.85)
    assert pair.lambda2 - pair.lambda1 == pytest.approx(19, abs=1e-9)
    assert 1 / pair.lambda1 + 1 / pair.lambda2 == pytest.approx(1 / 404.85, rel=1e-12)
    assert pair.lambda1 < 809.7 < pair.lambda2
    assert pair.lambda1 == pytest.approx(800.3114456957601, abs=1e-9)


@given(st.floats(0, 20), st.floats(395, 420))
def test_pair_energy_conservation(dl, pump):
    pair = wavelength_pair(dl, pump)
    assert abs((1 / pair.lambda1 + 1 / pair.lambda2) * pump - 1) < 1e-9


def test_pair_bounds():
    with pytest.raises(DomainError):
        wavelength_pair(25)
    with pytest.raises(DomainError):
        wavelength_pair(-1)


def test_mean_difference_19nm_golden():
    mean, diff = mean_and_difference(Sample(0.2, 0.2), wavelength_pair(19))
    pair = wavelength_pair(19)
    a1 = drude_oracle(pair.lambda1) * 0.04
    a2 = drude_oracle(pair.lambda2) * 0.04
    assert mean == pytest.approx((a1 + a2) / 2, rel=1e-13)
    assert diff == pytest.approx(a2 - a1, rel=1e-10)
    assert mean == pytest.approx(1.3653482546863174, rel=1e-12)
    assert diff == pytest.approx(-0.0662096395530909, rel=1e-10)


def test_difference_slope_matches_derivative():
    s = Sample(0.2, 0.2)
    dl = 1e-3
    _, diff = mean_and_difference(s, wavelength_pair(dl))
    analytic = specific_rotation_derivative(s.model, 809.7) * 0.2 * 0.2
    assert diff / dl == pytest.approx(analytic, rel=1e-6)


def test_derivative_against_finite_difference():
    m = default_sucrose_model()
    h = 1e-3
    fd = (specific_rotation(m, 810 + h) - specific_rotation(m, 810 - h)) / (2 * h)
    assert specific_rotation_derivative(m, 810) == pytest.approx(fd, rel=1e-7)


def test_model_validation():
    with pytest.raises(DomainError):
        DispersionModel(())
    with pytest.raises(DomainError):
        DispersionModel((DrudeTerm(1.0, 750.0),))
    with pytest.raises(ConfigError):
        DispersionModel.from_mapping({"terms": [{"A": 1.0}]})
    with pytest.raises(DomainError):
        Sample(-0.1)


def test_predicted_rotations_table():
    rows = predicted_rotations(Sample(0.2), [0, 19])
    assert rows[0][2] == 0.0
    assert math.isclose(rows[1][1], 1.3653482546863174, rel_tol=1e-12)
