"""Complex numerical primitives used by the solvers.

Matrices are plain :class:`numpy.ndarray` objects of dtype ``complex128``.
Dense matrices handed to the eigensolver are kept in Fortran (column-major)
order so LAPACK can factor them in place.

DFT convention: the forward transform evaluates a coefficient vector at the
roots of unity ``exp(2*pi*1j*j/n)`` without scaling; the inverse transform
carries the ``1/n`` factor and recovers coefficients from such evaluations.
Note this is the opposite sign to :func:`numpy.fft.fft`.
"""
from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.linalg import blas

from .errors import (
    ConfigurationError,
    ConvergenceError,
    IllConditionedWarning,
    SingularMatrixError,
)

__all__ = [
    "PolyFit",
    "fft",
    "fft2",
    "ifft",
    "ifft2",
    "is_power_of_two",
    "lu_solve",
    "polyfit_real",
    "polyval",
    "polyval2d",
    "roots_of_unity",
    "singular_values",
    "smallest_eigenpair",
]

PIVOT_FLOOR = 1e-300
SVD_MAX_DIM = 2000
_CHUNK_BYTES = 64 * 2**20


def is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def _check_length(n):
    if not is_power_of_two(n):
        raise ConfigurationError(f"transform length must be a power of two, got {n}")


def roots_of_unity(n: int) -> np.ndarray:
    """``exp(2*pi*1j*j/n)`` for ``j = 0..n-1``."""
    return np.exp(2j * np.pi * np.arange(n) / n)


def fft(coeffs) -> np.ndarray:
    """Evaluate ``sum_k c_k z^k`` at the n-th roots of unity."""
    c = np.asarray(coeffs, dtype=complex)
    n = c.shape[0]
    _check_length(n)
    return np.fft.ifft(c) * n


def ifft(values) -> np.ndarray:
    """Coefficients of the degree < n interpolant of values at the roots of unity.

    ``c_k = (1/n) * sum_j values_j * exp(-2*pi*1j*j*k/n)``.
    """
    v = np.asarray(values, dtype=complex)
    n = v.shape[0]
    _check_length(n)
    return np.fft.fft(v) / n


def fft2(coeffs) -> np.ndarray:
    """Evaluate ``sum_{a,b} c_ab x^a y^b`` on the tensor grid of roots of unity."""
    c = np.asarray(coeffs, dtype=complex)
    _check_length(c.shape[0])
    _check_length(c.shape[1])
    return np.fft.ifft2(c) * (c.shape[0] * c.shape[1])


def ifft2(values) -> np.ndarray:
    """Inverse of :func:`fft2`: ifft applied along both axes."""
    v = np.asarray(values, dtype=complex)
    _check_length(v.shape[0])
    _check_length(v.shape[1])
    return np.fft.fft2(v) / (v.shape[0] * v.shape[1])


# --------------------------------------------------------------------------
# LU factorization and inverse iteration
# --------------------------------------------------------------------------

def _lu_factor(A, overwrite_a=False):
    """LU with partial pivoting; returns ``(lu, piv, k)``.

    ``k`` is the index of the first pivot below :data:`PIVOT_FLOOR`, or -1.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, overwrite_a=overwrite_a, check_finite=False)
    small = np.flatnonzero(np.abs(np.diagonal(lu)) < PIVOT_FLOOR)
    return lu, piv, (int(small[0]) if small.size else -1)


def lu_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot has modulus below 1e-300.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigurationError(f"lu_solve needs a square matrix, got shape {A.shape}")
    dtype = np.result_type(A, np.asarray(b), float)
    lu, piv, k = _lu_factor(np.array(A, dtype=dtype, order="F"), overwrite_a=True)
    if k >= 0:
        raise SingularMatrixError(f"pivot {k} is numerically zero")
    return scipy.linalg.lu_solve((lu, piv), np.asarray(b, dtype=dtype), check_finite=False)


def _row_permutation(piv):
    perm = np.arange(piv.shape[0])
    for i, p in enumerate(piv):
        if p != i:
            perm[i], perm[p] = perm[p], perm[i]
    return perm


def _lu_matvec(lu, perm):
    """Return ``v -> A v`` reconstructed from the factors (``A[perm] = L U``)."""
    trmv = blas.get_blas_funcs("trmv", (lu,))

    def matvec(v):
        y = trmv(lu, np.asarray(v, dtype=lu.dtype), lower=0)
        y = trmv(lu, y, lower=1, diag=1)
        out = np.empty_like(y)
        out[perm] = y
        return out

    return matvec


def _null_vector(lu, k):
    """Vector x with ``U x = 0`` given a vanishing k-th pivot."""
    x = np.zeros(lu.shape[0], dtype=lu.dtype)
    x[k] = 1.0
    if k > 0:
        x[:k] = scipy.linalg.solve_triangular(lu[:k, :k], -lu[:k, k], lower=False)
    return x / np.linalg.norm(x)


def smallest_eigenpair(A, tol=None, max_iter=200, *, overwrite_a=False):
    """Eigenpair of smallest modulus by inverse iteration (shift 0).

    Parameters
    ----------
    A : (n, n) array_like
        Square matrix. Its smallest-modulus eigenvalue is assumed simple.
    tol : float, optional
        Residual target for ``||A v - lam v||_2``; defaults to
        ``1e-13 * ||A||_F``.
    max_iter : int
        Total number of inverse-iteration steps allowed.
    overwrite_a : bool
        Factor ``A`` in place (it must then be a Fortran-ordered complex
        array). Residuals are then measured with the LU factors.

    Returns
    -------
    lam : complex
    v : ndarray
        Unit 2-norm eigenvector.

    Notes
    -----
    The start vector is the normalized all-ones vector. If the residual
    stagnates the iteration is restarted once from ``ones + 1e-3 e_1``.
    A singular ``A`` yields ``(0, v)`` with ``v`` a null vector read off the
    factorization.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigurationError(f"eigensolver needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if not (overwrite_a and A.dtype == np.complex128 and A.flags.f_contiguous):
        A = np.array(A, dtype=complex, order="F")
        overwrite_a = False
        keep = A.copy(order="F")
    else:
        keep = None
    if tol is None:
        tol = 1e-13 * np.linalg.norm(A)

    lu, piv, k = _lu_factor(A, overwrite_a=True)
    if k >= 0:
        return 0j, _null_vector(lu, k)
    matvec = (lambda v: keep @ v) if keep is not None else _lu_matvec(lu, _row_permutation(piv))

    v = np.full(n, 1.0 / math.sqrt(n), dtype=complex)
    best = math.inf
    since_best = 0
    restarted = False
    res = math.inf
    for _ in range(max_iter):
        w = scipy.linalg.lu_solve((lu, piv), v, check_finite=False)
        w /= np.linalg.norm(w)
        Aw = matvec(w)
        lam = np.vdot(w, Aw)
        res = float(np.linalg.norm(Aw - lam * w))
        v = w
        if res <= tol:
            return complex(lam), v
        if res < 0.5 * best:
            best, since_best = res, 0
        else:
            since_best += 1
        if since_best >= 20 and not restarted:
            v = np.ones(n, dtype=complex)
            v[0] += 1e-3
            v /= np.linalg.norm(v)
            best, since_best, restarted = math.inf, 0, True
    raise ConvergenceError(
        f"inverse iteration did not converge in {max_iter} steps "
        f"(residual {res:.3e}, target {tol:.3e})",
        residual=res,
    )


# --------------------------------------------------------------------------
# Diagnostics and fitting
# --------------------------------------------------------------------------

def singular_values(A) -> np.ndarray:
    """Singular values in descending order (LAPACK divide and conquer)."""
    A = np.asarray(A)
    if min(A.shape) > SVD_MAX_DIM:
        raise ConfigurationError(
            f"singular_values is a diagnostic limited to min(rows, cols) <= {SVD_MAX_DIM}"
        )
    return np.linalg.svd(A, compute_uv=False)


class PolyFit(NamedTuple):
    coef: np.ndarray
    """Monomial coefficients, constant term first."""
    rank: int
    rank_deficient: bool


def polyfit_real(xs, ys, degree: int) -> PolyFit:
    """Least-squares polynomial fit in the monomial basis.

    Emits :class:`IllConditionedWarning` when the Vandermonde matrix is
    numerically rank deficient; the flag is also set on the result.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ConfigurationError("xs and ys must be 1-D arrays of equal length")
    if degree < 0 or xs.size < degree + 1:
        raise ConfigurationError(f"need at least {degree + 1} points for degree {degree}")
    V = np.vander(xs, degree + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(V, ys, rcond=None)
    deficient = int(rank) < degree + 1
    if deficient:
        warnings.warn(
            f"Vandermonde matrix has numerical rank {rank} < {degree + 1}",
            IllConditionedWarning,
            stacklevel=2,
        )
    return PolyFit(coef, int(rank), deficient)


def polyval(coeffs, z) -> np.ndarray:
    """Evaluate ``sum_k c_k z^k`` at arbitrary points.

    Long coefficient vectors are split into blocks of about ``sqrt(n)``
    terms; each block is evaluated with a matrix product and the blocks are
    combined by Horner's rule in ``z**block``. Cost is ``O(n * len(z))``
    flops, mostly in BLAS.
    """
    c = np.asarray(coeffs)
    z = np.asarray(z)
    n = c.shape[0]
    if n <= 64 or z.size <= 16:
        return np.polynomial.polynomial.polyval(z, c)
    b = math.isqrt(n - 1) + 1
    nb = -(-n // b)
    C = np.zeros(nb * b, dtype=np.result_type(c, complex))
    C[:n] = c
    C = C.reshape(nb, b).T
    zf = z.ravel().astype(complex)
    out = np.empty(zf.shape, dtype=complex)
    step = max(1, _CHUNK_BYTES // (16 * max(b, nb)))
    for lo in range(0, zf.size, step):
        zc = zf[lo:lo + step]
        Z = np.vander(zc, b, increasing=True)
        blocks = Z @ C
        w = Z[:, -1] * zc
        acc = blocks[:, -1].copy()
        for q in range(nb - 2, -1, -1):
            acc *= w
            acc += blocks[:, q]
        out[lo:lo + step] = acc
    return out.reshape(z.shape)


def polyval2d(coeffs, x, y) -> np.ndarray:
    """Evaluate ``sum_{a,b} c[a, b] x^a y^b`` at paired points ``(x_p, y_p)``."""
    C = np.asarray(coeffs)
    x = np.asarray(x)
    y = np.broadcast_to(np.asarray(y), x.shape)
    na, nb = C.shape
    xf = x.ravel().astype(complex)
    yf = y.ravel().astype(complex)
    out = np.empty(xf.shape, dtype=complex)
    Ct = np.ascontiguousarray(C.T)
    step = max(1, _CHUNK_BYTES // (16 * max(na, nb)))
    for lo in range(0, xf.size, step):
        xc, yc = xf[lo:lo + step], yf[lo:lo + step]
        T = np.vander(yc, nb, increasing=True) @ Ct
        acc = T[:, -1].copy()
        for a in range(na - 2, -1, -1):
            acc *= xc
            acc += T[:, a]
        out[lo:lo + step] = acc
    return out.reshape(x.shape)
