"""Closed forms and independent cross-checks.

Linear-fractional processes have geometric quasi-stationary distributions in
one and two types, which gives exact reference coefficients. Factorial
moments ``G^(h)(1)`` of the quasi-stationary law can be obtained either from
computed coefficients or from a recurrence that only involves derivatives of
``P`` at 1; agreement of the two is a solver-independent sanity check.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .dense import QsdCoefficients
from .errors import (
    ModelError,
    PrecisionWarning,
    TruncationWarning,
    UnsupportedRegimeError,
)
from .genfun import OffspringGF, require_subcritical
from .multitype import LinearFractional2D

__all__ = [
    "LinFrac2DParams",
    "Moments",
    "bell_values",
    "linfrac2d_grid",
    "linfrac2d_params",
    "linfrac2d_qsd",
    "linfrac_moments",
    "linfrac_qsd",
    "moments_from_coefficients",
    "moments_from_recurrence",
]

EXACT_BINOMIAL_MAX = 50
TAIL_FLOOR = 1e-15


def _ratio(p0, p):
    if not 0.0 <= p < p0 < 1.0:
        raise UnsupportedRegimeError(f"need 0 <= p < p0 < 1 (got p0={p0}, p={p})")
    return p / p0


def linfrac_qsd(p0: float, p: float, j):
    """Quasi-stationary probabilities ``(1 - q) q^(j - 1)`` with ``q = p / p0``.

    Vectorized in ``j``; ``j = 0`` gives 0.
    """
    q = _ratio(p0, p)
    j = np.asarray(j)
    with np.errstate(divide="ignore"):
        out = np.where(j >= 1, (1.0 - q) * np.power(q, np.maximum(j, 1) - 1.0), 0.0)
    return out[()] if out.ndim == 0 else out


def linfrac_moments(p0: float, p: float, H: int) -> np.ndarray:
    """``G^(h)(1) = h! q^(h-1) / (1 - q)^h`` for ``h = 1..H``."""
    q = _ratio(p0, p)
    return np.array([math.factorial(h) * q ** (h - 1) / (1.0 - q) ** h for h in range(1, H + 1)])


# --------------------------------------------------------------------------
# Two types
# --------------------------------------------------------------------------

class LinFrac2DParams(NamedTuple):
    M: np.ndarray
    rho: float
    nu: np.ndarray
    mu: np.ndarray


def linfrac2d_params(model: LinearFractional2D) -> LinFrac2DParams:
    """Mean matrix, Perron root, left Perron vector ``nu`` and ``mu`` of the closed form."""
    M = model.mean_matrix
    vals, vecs = np.linalg.eig(M.T)
    top = int(np.argmax(vals.real))
    rho = float(vals[top].real)
    nu = np.abs(vecs[:, top].real)
    nu /= nu.sum()
    t = -model.c / model.d
    t0 = 1.0 - t.sum()
    if t0 == 0:
        raise ModelError("t0 = 0: closed form undefined")
    w = t / t0
    I_M = np.eye(2) - M
    if abs(np.linalg.det(I_M)) < 1e-14:
        raise ModelError("I - M is singular")
    wx = np.linalg.solve(I_M.T, w)  # w (I - M)^-1 as a row vector
    mu = wx / (1.0 + wx.sum())
    return LinFrac2DParams(M, rho, nu, mu)


def _binom(a, b):
    """``C(a, b)`` for integer arrays, zero when ``b > a`` or ``b < 0``."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    out = np.zeros(a.size)
    valid = (b >= 0) & (b <= a)
    small = np.flatnonzero(valid & (a <= EXACT_BINOMIAL_MAX))
    out[small] = [float(math.comb(int(a[i]), int(b[i]))) for i in small]
    big = valid & (a > EXACT_BINOMIAL_MAX)
    if big.any():
        ab, bb = a[big], b[big]
        out[big] = np.exp(gammaln(ab + 1.0) - gammaln(bb + 1.0) - gammaln(ab - bb + 1.0))
    return out.reshape(shape)


def _power(base, expo):
    # 0 ** 0 = 1 and never evaluate negative exponents (their terms vanish)
    return np.where(expo >= 0, np.power(base, np.maximum(expo, 0)), 0.0)


def linfrac2d_grid(model: LinearFractional2D, size: int) -> np.ndarray:
    """Closed-form coefficients ``g[h, k]`` for ``0 <= h, k < size``."""
    _, _, nu, mu = linfrac2d_params(model)
    h = np.arange(size)[:, None]
    k = np.arange(size)[None, :]
    hk = h + k - 1
    first = (nu[0] - mu[0]) * _binom(hk, k) * _power(mu[0], h - 1) * _power(mu[1], k)
    second = (nu[1] - mu[1]) * _binom(hk, h) * _power(mu[0], h) * _power(mu[1], k - 1)
    g = first + second
    g[0, 0] = 0.0
    return g


def linfrac2d_qsd(S, c, b, d, h: int, k: int) -> float:
    """Single closed-form coefficient ``g[h, k]`` of the two-type linear-fractional law."""
    if h < 0 or k < 0 or (h, k) == (0, 0):
        raise ValueError("need h, k >= 0 and (h, k) != (0, 0)")
    model = LinearFractional2D(S, c, b, d)
    _, _, nu, mu = linfrac2d_params(model)
    a = h + k - 1
    first = (nu[0] - mu[0]) * _binom(a, k)[()] * _power(mu[0], h - 1)[()] * _power(mu[1], k)[()]
    second = (nu[1] - mu[1]) * _binom(a, h)[()] * _power(mu[0], h)[()] * _power(mu[1], k - 1)[()]
    return float(first + second)


# --------------------------------------------------------------------------
# Factorial moments
# --------------------------------------------------------------------------

@dataclass
class Moments:
    """Factorial moments ``values[h - 1] = G^(h)(1)``, ``h = 1..H``."""

    values: np.ndarray
    tail_converged: bool = True

    @property
    def H(self) -> int:
        return self.values.size

    def __getitem__(self, h: int) -> float:
        if not 1 <= h <= self.H:
            raise IndexError(f"order {h} outside 1..{self.H}")
        return float(self.values[h - 1])


def bell_values(P: OffspringGF, H: int) -> np.ndarray:
    """Table ``B[h, j]`` of partial Bell polynomials in ``P'(1), P''(1), ...``.

    Uses ``B[h, j] = h!/j! [z^h] f(z)^j`` with ``f(z) = P(1 + z) - 1``
    truncated after ``z^H``.
    """
    f = np.zeros(H + 1)
    for j in range(1, H + 1):
        f[j] = float(np.real(P.derivative(1.0, j))) / math.factorial(j)
    B = np.zeros((H + 1, H + 1))
    power = np.zeros(H + 1)
    power[0] = 1.0
    for j in range(1, H + 1):
        power = np.convolve(power, f)[: H + 1]
        for h in range(j, H + 1):
            B[h, j] = math.factorial(h) / math.factorial(j) * power[h]
    return B


def moments_from_recurrence(P: OffspringGF, g1: float, H: int) -> Moments:
    """Factorial moments from ``(m - m^h) G^(h)(1) = sum_{j<h} G^(j)(1) B[h, j]``.

    ``g1 = G'(1)`` seeds the recurrence, which is uninformative at ``h = 1``.
    """
    if H < 1:
        raise ValueError("H must be >= 1")
    m = require_subcritical(P)
    B = bell_values(P, H)
    out = np.zeros(H)
    out[0] = g1
    for h in range(2, H + 1):
        gap = m - m**h
        if gap < 1e-8 * m:
            warnings.warn(
                f"m - m^{h} = {gap:.3g} loses precision in the moment recurrence",
                PrecisionWarning,
                stacklevel=2,
            )
        out[h - 1] = sum(out[j - 1] * B[h, j] for j in range(1, h)) / gap
    return Moments(out)


def moments_from_coefficients(g, H: int) -> Moments:
    """``G^(h)(1) = sum_j j!/(j-h)! g_j`` from a coefficient vector.

    Sets ``tail_converged=False`` (and warns) unless the coefficients have
    dropped below 1e-15 in magnitude by the end of the vector.
    """
    coeffs = np.asarray(g.g if isinstance(g, QsdCoefficients) else g, dtype=float)
    j = np.arange(coeffs.size, dtype=float)
    tail = coeffs[-max(1, coeffs.size // 64):]
    converged = bool(np.max(np.abs(tail)) < TAIL_FLOOR)
    if not converged:
        warnings.warn(
            "coefficients have not decayed below 1e-15; factorial moments are truncated",
            TruncationWarning,
            stacklevel=2,
        )
    out = np.zeros(H)
    falling = np.ones_like(j)
    for h in range(1, H + 1):
        falling = falling * (j - (h - 1))
        out[h - 1] = math.fsum(falling * coeffs)
    return Moments(out, converged)
