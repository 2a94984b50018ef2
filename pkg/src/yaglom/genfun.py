"""Offspring probability generating functions and their contour analysis.

Two families are shipped: finite-support :class:`Polynomial` laws and the
modified-geometric :class:`LinearFractional` law. New families subclass
:class:`OffspringGF` and implement evaluation, derivatives and the radius of
convergence; the analysis helpers here only rely on that interface.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    AnalysisError,
    DegenerateContourError,
    DomainError,
    ModelError,
    UnsupportedRegimeError,
)

__all__ = [
    "AFFINE_RADIUS_CAP",
    "LinearFractional",
    "OffspringGF",
    "Polynomial",
    "affine",
    "choose_radius",
    "decay_envelope",
    "derivative_at",
    "evaluate",
    "psi_p",
    "require_subcritical",
]

SUM_TOL = 1e-12
ROOT_TOL = 1e-12
MIN_TOL = 1e-10
AFFINE_RADIUS_CAP = 2.0
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class OffspringGF(abc.ABC):
    """A probability generating function ``P(z) = sum_j p_j z^j``."""

    @abc.abstractmethod
    def __call__(self, z):
        """Evaluate ``P`` at scalar or array ``z`` (complex allowed)."""

    @abc.abstractmethod
    def derivative(self, z, order: int = 1):
        """Exact ``order``-th derivative at ``z``."""

    @property
    @abc.abstractmethod
    def radius_of_convergence(self) -> float:
        ...

    @property
    def mean(self) -> float:
        return float(np.real(self.derivative(1.0, 1)))

    @property
    def is_affine(self) -> bool:
        return False

    def secant_slope(self, x: float) -> float:
        """``(P(x) - 1) / (x - 1)`` for real ``x > 1``.

        Subclasses override this with a cancellation-free formula.
        """
        return (float(np.real(self(x))) - 1.0) / (x - 1.0)


@dataclass(frozen=True, eq=False)
class Polynomial(OffspringGF):
    """Offspring law with finite support ``0..d``.

    Parameters
    ----------
    coeffs : sequence of float
        ``p_0, ..., p_d``; nonnegative, summing to one within 1e-12, with
        ``0 < p_0 + p_1 < 1``.
    """

    coeffs: np.ndarray = field()

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ModelError("polynomial needs at least two coefficients")
        if not np.all(np.isfinite(c)) or np.any(c < 0) or np.any(c > 1):
            raise ModelError("coefficients must lie in [0, 1]")
        if abs(c.sum() - 1.0) > SUM_TOL:
            raise ModelError(f"coefficients sum to {c.sum():.17g}, not 1")
        if not 0.0 < c[0] + c[1] < 1.0:
            raise ModelError("need 0 < p_0 + p_1 < 1")
        c = np.trim_zeros(c, "b")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def p0(self) -> float:
        return float(self.coeffs[0])

    def __call__(self, z):
        return npoly.polyval(z, self.coeffs)

    def derivative(self, z, order: int = 1):
        if order < 1:
            raise ValueError("order must be >= 1")
        return npoly.polyval(z, npoly.polyder(self.coeffs, order))

    @property
    def radius_of_convergence(self) -> float:
        return math.inf

    def secant_slope(self, x: float) -> float:
        # P(x) - 1 = (x - 1) * sum_k x^k * (p_{k+1} + ... + p_d)
        tails = np.cumsum(self.coeffs[::-1])[::-1][1:]
        return float(npoly.polyval(x, tails))


@dataclass(frozen=True)
class LinearFractional(OffspringGF):
    """Modified geometric law ``p_j = (1 - p0)(1 - p) p^(j-1)``, ``j >= 1``.

    ``P(z) = p0 + (1 - p0)(1 - p) z / (1 - p z)``. With ``p = 0`` this is the
    affine law ``1 - m + m z``.
    """

    p0: float
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p0 < 1.0 and 0.0 <= self.p < 1.0):
            raise ModelError("linear-fractional parameters need p0, p in [0, 1)")

    def __call__(self, z):
        z = np.asarray(z) if np.ndim(z) else z
        den = 1.0 - self.p * z
        if np.any(den == 0):
            raise DomainError(f"z = 1/p = {1 / self.p} is a pole")
        return self.p0 + (1.0 - self.p0) * (1.0 - self.p) * z / den

    def derivative(self, z, order: int = 1):
        if order < 1:
            raise ValueError("order must be >= 1")
        den = 1.0 - self.p * np.asarray(z)
        if np.any(den == 0):
            raise DomainError(f"z = 1/p = {1 / self.p} is a pole")
        scale = math.factorial(order) * (1.0 - self.p0) * (1.0 - self.p) * self.p ** (order - 1)
        return scale / den ** (order + 1)

    @property
    def mean(self) -> float:
        return (1.0 - self.p0) / (1.0 - self.p)

    @property
    def radius_of_convergence(self) -> float:
        return math.inf if self.p == 0 else 1.0 / self.p

    @property
    def is_affine(self) -> bool:
        return self.p == 0

    def secant_slope(self, x: float) -> float:
        den = 1.0 - self.p * x
        return math.inf if den <= 0 else (1.0 - self.p0) / den


def affine(m: float) -> LinearFractional:
    """The affine law ``P(z) = 1 - m + m z``."""
    return LinearFractional(1.0 - m, 0.0)


def evaluate(P: OffspringGF, z):
    return P(z)


def derivative_at(P: OffspringGF, z, order: int = 1):
    return P.derivative(z, order)


def require_subcritical(P: OffspringGF) -> float:
    """Return the mean of ``P``, raising unless it lies in (0, 1)."""
    m = P.mean
    if not 0.0 < m < 1.0:
        raise UnsupportedRegimeError(f"mean offspring {m:.6g} is not in (0, 1)")
    return m


# --------------------------------------------------------------------------
# Root bracketing / minimization on the real axis
# --------------------------------------------------------------------------

def _bisect(f, lo, hi, tol=ROOT_TOL):
    """Root of an increasing function with ``f(lo) < 0 <= f(hi)``."""
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _golden_min(f, a, b, tol=MIN_TOL):
    """Minimizer of a unimodal function on ``[a, b]`` by golden-section search."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _safe_real(fun, x):
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            v = float(np.real(fun(x)))
    except (DomainError, DegenerateContourError, ZeroDivisionError):
        return math.inf
    return v if not math.isnan(v) else math.inf


def fixed_point_threshold(fun, secant, radius, affine_case) -> float:
    """Shared implementation of :func:`psi_p` for any real-analytic ``fun``.

    ``secant(x)`` must return ``(fun(x) - 1)/(x - 1)``, increasing in x.
    """
    if affine_case:
        return math.inf
    if secant(1.0 + 1e-9) >= 1.0:
        raise UnsupportedRegimeError("P(x) >= x just right of 1: not subcritical")
    lo, step = 1.0, 0.125
    hi = 1.0 + step
    while True:
        if hi >= radius:
            hi = radius
            if _safe_real(fun, radius) < radius:
                return radius
            break
        if secant(hi) >= 1.0:
            break
        lo = hi
        step *= 2.0
        hi = 1.0 + step
        if not math.isfinite(hi) or step > 1e300:
            raise AnalysisError("could not bracket the fixed point P(x) = x")
    g = lambda x: secant(x) - 1.0
    return _bisect(g, lo, hi)


def psi_p(P: OffspringGF) -> float:
    """Right end of the interval ``(1, psi)`` on which ``P(x) < x``.

    ``inf`` for affine ``P``; the radius of convergence ``r_P`` when
    ``P(r_P) < r_P``; otherwise the fixed point ``x > 1`` of ``P``, located
    by bisection to 1e-12.
    """
    return fixed_point_threshold(P, P.secant_slope, P.radius_of_convergence, P.is_affine)


def minimize_gap(fun, psi) -> float:
    """Argmin of ``fun(x) - x`` over ``(1, psi)``; capped at 2 when ``psi`` is infinite."""
    if psi <= 1.0:
        raise UnsupportedRegimeError(f"empty search interval (1, {psi})")
    if math.isinf(psi):
        r = AFFINE_RADIUS_CAP
    else:
        r = _golden_min(lambda x: _safe_real(fun, x) - x, 1.0, psi)
    if not (r > 1.0 and _safe_real(fun, r) < r):
        raise UnsupportedRegimeError(f"radius {r} does not satisfy 1 < r, P(r) < r")
    return r


def choose_radius(P: OffspringGF) -> float:
    """Contour radius ``r = argmin_{x in (1, psi_P)} P(x) - x``.

    For affine ``P`` the objective is unbounded below and the radius is
    capped at :data:`AFFINE_RADIUS_CAP`.
    """
    return minimize_gap(P, psi_p(P))


def decay_envelope(P: OffspringGF, j):
    """Reference coefficient envelope ``psi_P ** -j``."""
    psi = psi_p(P)
    return np.power(psi, -np.asarray(j, dtype=float))
