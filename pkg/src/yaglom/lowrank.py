"""Low-rank evaluation-interpolation for large ``n``.

The Cauchy factor ``C[j, h] = 1 / (r xi_h - P(r xi_j))`` has exponentially
decaying singular values, so adaptive cross approximation (ACA) compresses it
to ``U V*`` from O(n k) sampled entries. The smallest eigenvector of
``U V* D - m I`` is then recovered from the ``k x k`` matrix ``V* D U - m I``.
This module also provides the two a-priori bounds on the singular values of
``C`` used as diagnostics.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import numkernel as nk
from .dense import (
    ContourConfig,
    QsdCoefficients,
    _image_gap,
    coefficients_from_values,
    residual,
    resolve_radius,
)
from .errors import (
    AmbiguousEigenvalueError,
    ConfigurationError,
    DegenerateContourError,
    IllConditionedWarning,
    TruncationWarning,
)
from .genfun import OffspringGF, require_subcritical

__all__ = [
    "DEFAULT_TAU",
    "ArrayOracle",
    "CauchyOracle",
    "EntryOracle",
    "LowRankFactors",
    "aca",
    "decay_bound_taylor",
    "decay_bound_zolotarev",
    "eigs_lr",
    "solve_lowrank",
    "zolotarev_parameters",
]

DEFAULT_TAU = 1e-10
DEFAULT_MAX_RANK = 2000
PIVOT_FLOOR = 1e-300
AMBIGUITY_TOL = 1e-8
ROUNDOFF_ROW = 8 * np.finfo(float).eps


class EntryOracle(Protocol):
    """Row and column access to an implicit ``N x N`` matrix."""

    N: int

    def row(self, i: int) -> np.ndarray:
        ...

    def col(self, j: int) -> np.ndarray:
        ...


class CauchyOracle:
    """Entries ``1 / (x[h] - y[j])`` at row ``j``, column ``h``."""

    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=complex)
        self.y = np.asarray(y, dtype=complex)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ConfigurationError("Cauchy generators must be 1-D of equal length")
        self.N = self.x.size

    def row(self, i):
        return 1.0 / (self.x - self.y[i])

    def col(self, j):
        return 1.0 / (self.x[j] - self.y)

    def dense(self):
        return 1.0 / (self.x[None, :] - self.y[:, None])


class ArrayOracle:
    """Entry access to an explicit square matrix (testing and small problems)."""

    def __init__(self, A):
        self.A = np.asarray(A)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ConfigurationError("ArrayOracle needs a square matrix")
        self.N = self.A.shape[0]

    def row(self, i):
        return self.A[i, :]

    def col(self, j):
        return self.A[:, j]


@dataclass
class LowRankFactors:
    """``C ~= U @ Vh`` with ``U`` of shape ``(N, k)`` and ``Vh = V*`` of shape ``(k, N)``."""

    U: np.ndarray
    Vh: np.ndarray
    tau: float
    truncated: bool = False

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @property
    def V(self) -> np.ndarray:
        return self.Vh.conj().T

    def to_dense(self) -> np.ndarray:
        return self.U @ self.Vh


class _Growable:
    """Row-stacked buffer of length-N vectors.

    Grows in place with ``ndarray.resize`` so large buffers are extended by
    ``realloc`` instead of being copied next to a second allocation.
    """

    def __init__(self, N, capacity, limit):
        self.buf = np.empty((max(min(capacity, limit), 1), N), dtype=complex)
        self.limit = limit
        self.k = 0

    def append(self, vec):
        if self.k == self.buf.shape[0]:
            cap = self.buf.shape[0]
            new_cap = min(cap + max(cap // 2, 1), self.limit)
            self.buf.resize((new_cap, self.buf.shape[1]), refcheck=False)
        self.buf[self.k] = vec
        self.k += 1

    @property
    def rows(self):
        return self.buf[: self.k]


def aca(oracle: EntryOracle, tau: float = DEFAULT_TAU, max_rank: int | None = None,
        *, start_row: int = 0, initial_capacity: int = 64) -> LowRankFactors:
    """Adaptive cross approximation with partial pivoting.

    Each step takes the residual of the current pivot row, pivots on its
    largest entry, and adds the resulting rank-one cross. The next pivot row
    is the largest entry of the new column among rows not used yet. The
    iteration stops once ``||u|| ||v|| < tau``; that last cross is kept.
    It also stops, without adding a cross, when the residual of the pivot
    row is at roundoff level relative to the sampled row.

    Returns factors with ``truncated=True`` if ``max_rank`` was reached
    before the stopping criterion.
    """
    if not tau > 0:
        raise ConfigurationError("tau must be positive")
    N = oracle.N
    if max_rank is None:
        max_rank = min(N, DEFAULT_MAX_RANK)
    if not 1 <= max_rank <= N:
        raise ConfigurationError(f"max_rank must lie in [1, {N}]")

    Ut = _Growable(N, initial_capacity, max_rank)
    Vh = _Growable(N, initial_capacity, max_rank)
    used = np.zeros(N, dtype=bool)
    i = start_row
    converged = False
    while Ut.k < max_rank:
        used[i] = True
        v = np.array(oracle.row(i), dtype=complex)
        row_scale = float(np.max(np.abs(v)))
        if Ut.k:
            v -= Ut.rows[:, i] @ Vh.rows
        j = int(np.argmax(np.abs(v)))
        pivot = v[j]
        # a row already reproduced to roundoff carries no new information
        if abs(pivot) < PIVOT_FLOOR or abs(pivot) <= ROUNDOFF_ROW * row_scale:
            converged = True
            break
        u = np.array(oracle.col(j), dtype=complex)
        if Ut.k:
            u -= Vh.rows[:, j] @ Ut.rows
        u /= pivot
        Ut.append(u)
        Vh.append(v)
        if np.linalg.norm(u) * np.linalg.norm(v) < tau:
            converged = True
            break
        if used.all():
            converged = True
            break
        mag = np.abs(u)
        mag[used] = -1.0
        i = int(np.argmax(mag))

    truncated = not converged
    if truncated:
        warnings.warn(
            f"ACA stopped at max_rank={max_rank} before reaching tau={tau:g}",
            TruncationWarning,
            stacklevel=2,
        )
    return LowRankFactors(U=Ut.rows.T, Vh=Vh.rows, tau=tau, truncated=truncated)


def _eigs_reduced(U, Vh, m):
    k = U.shape[1]
    R = Vh @ U
    R[np.diag_indices(k)] -= m
    lam, w = nk.smallest_eigenpair(R)
    if abs(lam) > m + AMBIGUITY_TOL:
        raise AmbiguousEigenvalueError(
            f"reduced eigenvalue {lam:.6g} is larger in modulus than m={m:.6g}; "
            "the smallest eigenvalue of U V* - m I is -m and its eigenvector is not determined"
        )
    if abs(lam) >= m - AMBIGUITY_TOL:
        warnings.warn(
            f"reduced eigenvalue {lam:.6g} ties with -m in modulus",
            IllConditionedWarning,
            stacklevel=3,
        )
    return lam, U @ w


def eigs_lr(U, V, m: float) -> np.ndarray:
    """Smallest eigenvector of ``U V* - m I`` via the ``k x k`` matrix ``V* U - m I``.

    Parameters
    ----------
    U, V : ndarray, shape (N, k)
    m : float
        Shift; the smallest eigenvalue must not be ``-m``.

    Returns
    -------
    ndarray, shape (N,)
        ``U w`` where ``w`` is the smallest eigenvector of the reduced matrix.
    """
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if U.ndim == 1:
        U = U[:, None]
    if V.ndim == 1:
        V = V[:, None]
    if U.shape != V.shape:
        raise ConfigurationError("U and V must have the same shape")
    return _eigs_reduced(U, V.conj().T, m)[1]


def solve_lowrank(P: OffspringGF, cfg: ContourConfig, tau: float = DEFAULT_TAU,
                  max_rank: int | None = None, *, compute_residual: bool = True) -> QsdCoefficients:
    """Quasi-stationary coefficients with the Cauchy factor compressed by ACA."""
    m = require_subcritical(P)
    r = resolve_radius(P, cfg)
    n = cfg.n
    x = r * nk.roots_of_unity(n)
    y = np.asarray(P(x), dtype=complex)
    _image_gap(x, y, r)
    factors = aca(CauchyOracle(x, y), tau, max_rank)
    # fold the quadrature weights D = diag(x / n) into V*
    factors.Vh *= x / n
    lam, v = _eigs_reduced(factors.U, factors.Vh, m)
    rank, truncated = factors.rank, factors.truncated
    del factors
    g, leak = coefficients_from_values(v, r)
    res = residual(P, g, m) if compute_residual else math.nan
    return QsdCoefficients(
        g=g,
        n=n,
        r=r,
        residual=res,
        sum=float(math.fsum(g)),
        imag_leak=leak,
        method="lowrank",
        rank=rank,
        eigenvalue=complex(lam),
        flags=("truncated",) if truncated else (),
    )


# --------------------------------------------------------------------------
# Singular-value decay bounds for the Cauchy factor
# --------------------------------------------------------------------------

def _contour_data(P: OffspringGF, r: float):
    p0 = float(np.real(P(0.0)))
    Pr = float(np.real(P(r)))
    if not (r > 1.0 and Pr < r):
        raise DegenerateContourError(f"need r > 1 and P(r) < r, got r={r}, P(r)={Pr}")
    return p0, Pr


def decay_bound_taylor(P: OffspringGF, r: float, n: int, k: int) -> float:
    """Bound on ``sigma_{k+1}(C)`` from truncating the Taylor expansion of the kernel.

    ``theta**k * n / ((1 - theta) * (r - p0))`` with
    ``theta = (P(r) - p0) / (r - p0)``.
    """
    p0, Pr = _contour_data(P, r)
    theta = (Pr - p0) / (r - p0)
    if not 0.0 < theta < 1.0:
        raise DegenerateContourError(f"decay ratio {theta} outside (0, 1)")
    return theta**k * n / ((1.0 - theta) * (r - p0))


def zolotarev_parameters(P: OffspringGF, r: float):
    """Common inverse points ``(alpha, beta)`` of the two circles and the ratio ``theta``.

    The image of the contour lies in the disc of radius ``P(r) - p0`` around
    ``p0``; ``alpha`` and ``beta`` are symmetric with respect to both that
    circle and ``|z| = r``, and the Moebius map sending them to 0 and infinity
    turns the two regions into the complement of an annulus with radius
    ratio ``theta < 1``.
    """
    p0, Pr = _contour_data(P, r)
    if p0 <= 0.0:
        raise DegenerateContourError("p0 must be positive for the inverse-point construction")
    s = 2.0 * p0 * Pr - Pr * Pr + r * r
    disc = s * s - 4.0 * p0 * p0 * r * r
    if disc < 0.0:
        raise DegenerateContourError(f"negative discriminant {disc:.3g}")
    alpha = (s + math.sqrt(disc)) / (2.0 * p0)
    beta = r * r / alpha
    # z -> (z - alpha)/(z - beta) sends |z| = r to the inner circle of the annulus
    # (alpha lies outside it) and the disc around p0 to the outside of the outer one
    theta = (alpha - r) * (Pr - beta) / ((r - beta) * (alpha - Pr))
    if not 0.0 < theta < 1.0:
        raise DegenerateContourError(f"annulus ratio {theta} outside (0, 1)")
    return alpha, beta, theta


def decay_bound_zolotarev(P: OffspringGF, r: float, k: int) -> float:
    """Bound ``theta**k`` on ``sigma_{k+1}(C) / sigma_1(C)``."""
    return zolotarev_parameters(P, r)[2] ** k
