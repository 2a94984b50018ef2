import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yaglom import (
    LinearFractional,
    Polynomial,
    affine,
    choose_radius,
    decay_envelope,
    psi_p,
)
from yaglom.errors import DomainError, ModelError, UnsupportedRegimeError
from yaglom.genfun import (
    AFFINE_RADIUS_CAP,
    derivative_at,
    evaluate,
    require_subcritical,
)


def _grid_argmin(P, lo, hi, step=1e-6):
    x = np.arange(lo + step, hi, step)
    return x[np.argmin(np.real(P(x)) - x)]


@st.composite
def subcritical_polynomials(draw):
    d = draw(st.integers(2, 9))
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=d + 1, max_size=d + 1)))
    w[0] += draw(st.floats(0.5, 8.0)) * w[1:].sum()
    c = w / w.sum()
    c[0] += 1.0 - c.sum()
    return Polynomial(c)


def test_normalization_at_one(linfrac_half, poly776, poly942):
    for P in (linfrac_half, poly776, poly942):
        assert evaluate(P, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_linfrac_values(linfrac_half):
    assert linfrac_half(0.0) == pytest.approx(0.6)
    assert linfrac_half.mean == pytest.approx(4 / 7)
    assert derivative_at(linfrac_half, 1.0) == pytest.approx(4 / 7)


def test_example_means(poly776, poly942):
    assert derivative_at(poly776, 1.0) == pytest.approx(0.776, abs=1e-12)
    assert derivative_at(poly942, 1.0) == pytest.approx(0.942, abs=1e-12)


def test_linfrac_derivatives_match_series():
    P = LinearFractional(0.6, 0.3)
    j = np.arange(1, 400)
    p = np.concatenate(([0.6], 0.4 * 0.7 * 0.3 ** (j - 1)))
    z = 0.8 + 0.3j
    for order in (1, 2, 3):
        ref = np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(p, order))
        assert P.derivative(z, order) == pytest.approx(ref, rel=1e-12)


def test_linfrac_pole():
    P = LinearFractional(0.6, 0.3)
    with pytest.raises(DomainError):
        P(1 / 0.3)
    with pytest.raises(DomainError):
        P.derivative(np.array([0.0, 1 / 0.3]))


def test_polynomial_validation():
    with pytest.raises(ModelError):
        Polynomial([0.5, 0.6])
    with pytest.raises(ModelError):
        Polynomial([1.2, -0.2])
    with pytest.raises(ModelError):
        Polynomial([0.0, 1.0])
    with pytest.raises(ModelError):
        Polynomial([1.0])
    assert Polynomial([0.5, 0.3, 0.2, 0.0]).degree == 2


def test_linfrac_validation():
    with pytest.raises(ModelError):
        LinearFractional(1.0, 0.2)
    with pytest.raises(ModelError):
        LinearFractional(0.5, -0.1)


def test_subcriticality_required():
    with pytest.raises(UnsupportedRegimeError):
        require_subcritical(Polynomial([0.2, 0.3, 0.5]))


def test_psi_linfrac(linfrac_half):
    assert psi_p(linfrac_half) == pytest.approx(2.0, abs=1e-11)


def test_psi_examples(poly776, poly942):
    # reported to three decimals
    assert psi_p(poly776) == pytest.approx(1.101, abs=1e-3)
    assert psi_p(poly942) == pytest.approx(1.026, abs=1e-3)
    for P in (poly776, poly942):
        psi = psi_p(P)
        assert P(psi) == pytest.approx(psi, abs=1e-10)


def test_psi_affine_infinite():
    assert math.isinf(psi_p(affine(0.5)))


def test_psi_radius_of_convergence_case():
    # P(1/p) < 1/p only if the pole is reached first; p0 close to 1 keeps P small
    P = LinearFractional(0.99, 0.5)
    assert P.mean < 1
    psi = psi_p(P)
    assert 1 < psi <= P.radius_of_convergence


def test_choose_radius_affine_cap():
    assert choose_radius(affine(0.3)) == AFFINE_RADIUS_CAP


def test_choose_radius_linfrac_grid_scan(linfrac_half):
    r = choose_radius(linfrac_half)
    assert r == pytest.approx(_grid_argmin(linfrac_half, 1.0, 2.0), abs=2e-6)
    assert linfrac_half.derivative(r) == pytest.approx(1.0, abs=1e-7)


def test_choose_radius_degree7(poly98):
    r = choose_radius(poly98)
    psi = psi_p(poly98)
    assert r == pytest.approx(_grid_argmin(poly98, 1.0, psi), abs=2e-6)
    assert psi > 1.0078


@settings(max_examples=40, deadline=None)
@given(subcritical_polynomials())
def test_radius_encloses_image(P):
    if P.mean >= 1:
        return
    r = choose_radius(P)
    assert 1 < r < psi_p(P)
    assert P(r) < r
    z = r * np.exp(2j * np.pi * np.arange(256) / 256)
    assert np.max(np.abs(P(z))) <= P(r) + 1e-12


def test_secant_slope_consistent(poly776, linfrac_half):
    for P in (poly776, linfrac_half):
        x = 1.05
        assert P.secant_slope(x) == pytest.approx((P(x) - 1) / (x - 1), rel=1e-10)


def test_decay_envelope(poly776):
    assert decay_envelope(poly776, 0) == 1.0
    psi = psi_p(poly776)
    np.testing.assert_allclose(decay_envelope(poly776, [1, 10]), [psi**-1, psi**-10])
