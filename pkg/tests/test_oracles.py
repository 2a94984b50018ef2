import math

import numpy as np
import pytest

from yaglom import LinearFractional, Polynomial
from yaglom.errors import PrecisionWarning, TruncationWarning, UnsupportedRegimeError
from yaglom.oracles import (
    bell_values,
    linfrac2d_grid,
    linfrac2d_params,
    linfrac2d_qsd,
    linfrac_moments,
    linfrac_qsd,
    moments_from_coefficients,
    moments_from_recurrence,
)


def test_linfrac_qsd_values():
    assert linfrac_qsd(0.6, 0.3, 1) == pytest.approx(0.5)
    assert linfrac_qsd(0.6, 0.3, 2) == pytest.approx(0.25)
    assert linfrac_qsd(0.6, 0.3, 0) == 0.0


def test_linfrac_qsd_normalized():
    g = linfrac_qsd(0.6, 0.3, np.arange(1, 61))
    assert math.fsum(g) == pytest.approx(1.0, abs=1e-15)


def test_linfrac_qsd_rejects_non_subcritical():
    with pytest.raises(UnsupportedRegimeError):
        linfrac_qsd(0.3, 0.6, 1)


def test_linfrac_moments_direct_differentiation():
    # factorial moments of g_j = 2^-j summed term by term
    j = np.arange(1, 400)
    g = 0.5**j
    direct = [math.fsum(math.perm(int(k), h) * gk for k, gk in zip(j, g)) for h in range(1, 6)]
    np.testing.assert_allclose(linfrac_moments(0.6, 0.3, 5), direct, rtol=1e-12)
    np.testing.assert_allclose(linfrac_moments(0.6, 0.3, 5), [2, 4, 12, 48, 240], rtol=1e-14)


def test_linfrac2d_parameters(linfrac2d):
    _, rho, nu, mu = linfrac2d_params(linfrac2d.model)
    assert rho == pytest.approx(2 / 3)
    np.testing.assert_allclose(nu, [0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(mu, [0.125, 0.125], atol=1e-14)


def test_linfrac2d_first_coefficient(linfrac2d):
    m = linfrac2d.model
    assert linfrac2d_qsd(m.S, m.c, m.b, m.d, 1, 0) == pytest.approx(0.375)
    assert linfrac2d_qsd(m.S, m.c, m.b, m.d, 0, 1) == pytest.approx(0.375)
    with pytest.raises(ValueError):
        linfrac2d_qsd(m.S, m.c, m.b, m.d, 0, 0)


def test_linfrac2d_grid_normalized(linfrac2d):
    g = linfrac2d_grid(linfrac2d.model, 201)
    h, k = np.indices(g.shape)
    assert math.fsum(g[h + k <= 200]) == pytest.approx(1.0, abs=1e-12)
    assert g[0, 0] == 0
    np.testing.assert_allclose(g, g.T, rtol=1e-12)


def test_linfrac2d_grid_matches_scalar(linfrac2d):
    m = linfrac2d.model
    g = linfrac2d_grid(m, 70)
    for h, k in [(1, 0), (3, 4), (60, 2), (25, 44)]:
        assert g[h, k] == pytest.approx(linfrac2d_qsd(m.S, m.c, m.b, m.d, h, k), rel=1e-12)


def test_bell_values_small_orders():
    P = Polynomial([0.5, 0.2, 0.2, 0.1])
    f1, f2, f3 = (float(P.derivative(1.0, k)) for k in (1, 2, 3))
    B = bell_values(P, 3)
    assert B[1, 1] == pytest.approx(f1)
    assert B[2, 1] == pytest.approx(f2)
    assert B[2, 2] == pytest.approx(f1**2)
    assert B[3, 1] == pytest.approx(f3)
    assert B[3, 2] == pytest.approx(3 * f1 * f2)
    assert B[3, 3] == pytest.approx(f1**3)


def test_recurrence_linfrac_against_closed_form():
    P = LinearFractional(0.6, 0.3)
    exact = linfrac_moments(0.6, 0.3, 5)
    rec = moments_from_recurrence(P, exact[0], 5)
    np.testing.assert_allclose(rec.values, exact, rtol=1e-10)
    assert rec[1] == exact[0] and rec.H == 5
    with pytest.raises(IndexError):
        rec[6]


def test_recurrence_single_order():
    rec = moments_from_recurrence(LinearFractional(0.6, 0.3), 2.0, 1)
    assert rec.values.tolist() == [2.0]


def test_recurrence_precision_warning():
    P = Polynomial([1 - 0.999999999 / 2, 0.0, 0.999999999 / 2])
    with pytest.warns(PrecisionWarning):
        moments_from_recurrence(P, 1.0, 2)


def test_coefficient_moments_geometric():
    g = linfrac_qsd(0.6, 0.3, np.arange(200))
    mom = moments_from_coefficients(g, 3)
    assert mom[1] == pytest.approx(2.0, rel=1e-14)
    assert mom.tail_converged


def test_coefficient_moments_truncation_flag():
    g = linfrac_qsd(0.6, 0.3, np.arange(16))
    with pytest.warns(TruncationWarning):
        mom = moments_from_coefficients(g, 2)
    assert not mom.tail_converged
