"""Two-type Galton-Watson processes.

The offspring law of a type-``i`` individual is a bivariate generating
function ``P_i(x, y)``. The quasi-stationary generating function ``G(x, y)``
solves ``G(P_1, P_2) = rho G + 1 - rho`` with ``G(0, 0) = 0``, where ``rho`` is
the Perron root of the mean progeny matrix. Discretizing the double Cauchy
integral on the torus ``|x| = r1, |y| = r2`` gives an ``n^2 x n^2``
eigenproblem whose matrix is the Hadamard product of two Cauchy matrices.

Flattened indices follow one convention throughout: the node
``(r1 xi_s, r2 xi_t)`` has index ``s + n t``.
"""
from __future__ import annotations

import abc
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs

from . import numkernel as nk
from .errors import (
    AmbiguousEigenvalueError,
    ConfigurationError,
    ConvergenceError,
    DegenerateContourError,
    ModelError,
    NormalizationError,
    UnsupportedRegimeError,
)
from .genfun import SUM_TOL, fixed_point_threshold, minimize_gap
from .lowrank import DEFAULT_TAU, _eigs_reduced, aca

__all__ = [
    "DENSE_2D_MAX_N",
    "BivariateGF",
    "BivariateOffspring",
    "HadamardCauchyOracle",
    "LinearFractional2D",
    "Polynomial2D",
    "QsdGrid",
    "choose_radii",
    "mean_matrix_and_rho",
    "residual_2d",
    "solve_dense_2d",
    "solve_krylov_2d",
    "solve_lowrank_2d",
]

DENSE_2D_MAX_N = 128
_TORUS_SAMPLES = 64
KRYLOV_TOL = 1e-14
KRYLOV_CHUNK_ENTRIES = 1 << 21
_KRYLOV_SEED = 20240611


class BivariateGF(abc.ABC):
    """Generating function ``P(x, y)`` of a pair of offspring counts."""

    @abc.abstractmethod
    def __call__(self, x, y):
        """Evaluate at paired points (broadcasting)."""

    @abc.abstractmethod
    def gradient_at_one(self) -> np.ndarray:
        """``(dP/dx, dP/dy)`` at ``(1, 1)``."""

    @abc.abstractmethod
    def diagonal_radius(self) -> float:
        """Radius of convergence of ``x -> P(x, x)``."""

    @abc.abstractmethod
    def diagonal_secant(self, x: float) -> float:
        """``(P(x, x) - 1) / (x - 1)``."""

    def diagonal(self, x):
        return self(x, x)

    @property
    def diagonal_affine(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class Polynomial2D(BivariateGF):
    """Finite-support law with ``coeffs[h, k] = Prob(h of type 1, k of type 2)``."""

    coeffs: np.ndarray = field()

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.size < 2:
            raise ModelError("bivariate polynomial needs a 2-D coefficient grid")
        if not np.all(np.isfinite(c)) or np.any(c < 0) or np.any(c > 1):
            raise ModelError("coefficients must lie in [0, 1]")
        if abs(c.sum() - 1.0) > SUM_TOL:
            raise ModelError(f"coefficients sum to {c.sum():.17g}, not 1")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
        out = nk.polyval2d(self.coeffs, x, y)
        if not (np.iscomplexobj(x) or np.iscomplexobj(y)):
            out = out.real
        return out if out.ndim else out[()]

    def gradient_at_one(self):
        h = np.arange(self.coeffs.shape[0])[:, None]
        k = np.arange(self.coeffs.shape[1])[None, :]
        return np.array([(h * self.coeffs).sum(), (k * self.coeffs).sum()])

    def diagonal_coeffs(self) -> np.ndarray:
        a, b = self.coeffs.shape
        d = np.zeros(a + b - 1)
        for h in range(a):
            d[h:h + b] += self.coeffs[h]
        return d

    def diagonal_radius(self):
        return math.inf

    def diagonal_secant(self, x):
        tails = np.cumsum(self.diagonal_coeffs()[::-1])[::-1][1:]
        return float(np.polynomial.polynomial.polyval(x, tails))

    @property
    def diagonal_affine(self):
        return self.diagonal_coeffs()[2:].sum() == 0


@dataclass(frozen=True, eq=False)
class LinearFractional2D:
    """Two-type linear-fractional law.

    ``P_i(x, y) = (S[i, 0] x + S[i, 1] y + b[i]) / (c[0] x + c[1] y + d)``.
    Requires ``S, b >= 0``, ``c <= 0``, ``d > 0`` and ``P_i(1, 1) = 1``.
    """

    S: np.ndarray
    c: np.ndarray
    b: np.ndarray
    d: float

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        c = np.array(self.c, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        d = float(self.d)
        if S.shape != (2, 2) or c.shape != (2,) or b.shape != (2,):
            raise ModelError("need S of shape (2, 2) and c, b of length 2")
        if np.any(S < 0) or np.any(b < 0) or np.any(c > 0) or not d > 0:
            raise ModelError("need S >= 0, b >= 0, c <= 0 and d > 0")
        den = c.sum() + d
        if not den > 0:
            raise ModelError("denominator vanishes at (1, 1)")
        at_one = S.sum(axis=1) + b
        if np.max(np.abs(at_one - den)) > SUM_TOL * max(1.0, den):
            raise ModelError("P_i(1, 1) must equal 1 for both types")
        for name, val in (("S", S), ("c", c), ("b", b)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "d", d)

    def component(self, i: int) -> _LinFracComponent:
        return _LinFracComponent(self, i)

    @property
    def components(self):
        return self.component(0), self.component(1)

    @property
    def mean_matrix(self) -> np.ndarray:
        return (self.S - self.c[None, :]) / (self.c.sum() + self.d)


class _LinFracComponent(BivariateGF):
    def __init__(self, model: LinearFractional2D, i: int):
        self.model, self.i = model, i

    def __call__(self, x, y):
        m = self.model
        den = m.c[0] * np.asarray(x) + m.c[1] * np.asarray(y) + m.d
        if np.any(den == 0):
            raise DegenerateContourError("evaluation at a pole of the linear-fractional law")
        return (m.S[self.i, 0] * x + m.S[self.i, 1] * y + m.b[self.i]) / den

    def gradient_at_one(self):
        return self.model.mean_matrix[self.i].copy()

    def diagonal_radius(self):
        csum = self.model.c.sum()
        return math.inf if csum == 0 else -self.model.d / csum

    def diagonal_secant(self, x):
        # P(x, x) - 1 = (s - c)(x - 1) / (c x + d) with s, c the row and c sums
        m = self.model
        csum = m.c.sum()
        den = csum * x + m.d
        return math.inf if den <= 0 else (m.S[self.i].sum() - csum) / den

    @property
    def diagonal_affine(self):
        return self.model.c.sum() == 0


class BivariateOffspring:
    """Pair of offspring generating functions, one per parent type."""

    def __init__(self, P1, P2=None):
        if isinstance(P1, LinearFractional2D):
            if P2 is not None:
                raise ModelError("a LinearFractional2D model already holds both types")
            self.model = P1
            P1, P2 = P1.components
        else:
            self.model = None
        if not (isinstance(P1, BivariateGF) and isinstance(P2, BivariateGF)):
            raise ModelError("both components must be bivariate generating functions")
        self.P1, self.P2 = P1, P2

    @classmethod
    def polynomial(cls, coeffs1, coeffs2) -> BivariateOffspring:
        return cls(Polynomial2D(coeffs1), Polynomial2D(coeffs2))

    @property
    def components(self):
        return self.P1, self.P2

    def __call__(self, x, y):
        return self.P1(x, y), self.P2(x, y)


@dataclass
class QsdGrid:
    """Approximate bivariate quasi-stationary distribution ``g[h, k]``, ``g[0, 0] = 0``."""

    g: np.ndarray
    n: int
    r1: float
    r2: float
    residual: float
    sum: float
    imag_leak: float
    method: str
    rank: int | None = None
    rho: float | None = None
    eigenvalue: complex | None = None
    flags: tuple = field(default_factory=tuple)

    def metadata(self) -> dict:
        out = {
            "method": self.method,
            "n": self.n,
            "r1": self.r1,
            "r2": self.r2,
            "rho": self.rho,
            "residual": self.residual,
            "sum": self.sum,
            "imag_leak": self.imag_leak,
            "rank": self.rank,
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out


# --------------------------------------------------------------------------
# Mean matrix and contour radii
# --------------------------------------------------------------------------

def mean_matrix_and_rho(B: BivariateOffspring, require_regular: bool = True):
    """Mean progeny matrix ``M[i, j] = dP_i/dx_j (1, 1)`` and its Perron root."""
    if B.model is not None:
        M = B.model.mean_matrix
    else:
        M = np.vstack([B.P1.gradient_at_one(), B.P2.gradient_at_one()])
    M = np.asarray(M, dtype=float)
    if require_regular and not (np.all(M > 0) or np.all(M @ M > 0)):
        raise ModelError("mean progeny matrix is not positively regular")
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = max(tr * tr - 4.0 * det, 0.0)
    rho = 0.5 * (tr + math.sqrt(disc))
    return M, rho


def _require_subcritical(B: BivariateOffspring) -> float:
    _, rho = mean_matrix_and_rho(B)
    if not 0.0 < rho < 1.0:
        raise UnsupportedRegimeError(f"Perron root {rho:.6g} is not in (0, 1)")
    return rho


def _diagonal_minimizer(P: BivariateGF) -> float:
    psi = fixed_point_threshold(P.diagonal, P.diagonal_secant, P.diagonal_radius(),
                                P.diagonal_affine)
    return minimize_gap(P.diagonal, psi)


def _torus_margin(B: BivariateOffspring, r1: float, r2: float, samples: int = _TORUS_SAMPLES):
    """Smallest of ``r1 - max|P_1|`` and ``r2 - max|P_2|`` over a torus grid."""
    w = np.exp(2j * np.pi * np.arange(samples) / samples)
    X = (r1 * w)[:, None] * np.ones(samples)[None, :]
    Y = np.ones(samples)[:, None] * (r2 * w)[None, :]
    try:
        a, b = B(X, Y)
    except DegenerateContourError:
        return -math.inf
    return min(r1 - np.max(np.abs(a)), r2 - np.max(np.abs(b)))


def choose_radii(B: BivariateOffspring):
    """Torus radii ``(r1, r2)`` from the minimizers of ``P_j(x, x) - x``.

    The per-type minimizers are paired with the coordinates so that the
    image of the torus stays inside it, ``|P_1| < r1`` and ``|P_2| < r2``
    (checked on a sampled grid). The identity pairing is tried first.
    """
    a = _diagonal_minimizer(B.P1)
    b = _diagonal_minimizer(B.P2)
    for r1, r2 in ((a, b), (b, a)):
        if _torus_margin(B, r1, r2) > 0:
            return r1, r2
    raise UnsupportedRegimeError(
        f"no pairing of the radii {a:.6g}, {b:.6g} keeps the torus image inside the torus"
    )


def _resolve_radii(B, radii):
    if radii is None:
        return choose_radii(B)
    r1, r2 = map(float, radii)
    if not (r1 > 1 and r2 > 1 and _torus_margin(B, r1, r2) > 0):
        raise UnsupportedRegimeError(f"radii ({r1}, {r2}) do not enclose the torus image")
    return r1, r2


# --------------------------------------------------------------------------
# Discretization
# --------------------------------------------------------------------------

def _torus_nodes(B, n, r1, r2):
    xi = nk.roots_of_unity(n)
    x1, x2 = r1 * xi, r2 * xi
    # node s + n t  <->  (x1[s], x2[t])
    X1 = np.tile(x1, n)
    X2 = np.repeat(x2, n)
    y1, y2 = B(X1, X2)
    return x1, x2, np.asarray(y1, dtype=complex), np.asarray(y2, dtype=complex)


class HadamardCauchyOracle:
    """Entries ``1 / ((x1[h] - y1[i]) (x2[k] - y2[i]))`` at row ``i``, column ``h + n k``."""

    def __init__(self, x1, x2, y1, y2):
        self.x1 = np.asarray(x1, dtype=complex)
        self.x2 = np.asarray(x2, dtype=complex)
        self.y1 = np.asarray(y1, dtype=complex)
        self.y2 = np.asarray(y2, dtype=complex)
        self.n = self.x1.size
        self.N = self.n * self.n
        if self.x2.size != self.n or self.y1.size != self.N or self.y2.size != self.N:
            raise ConfigurationError("inconsistent generator sizes")

    def row(self, i):
        a = 1.0 / (self.x1 - self.y1[i])
        b = 1.0 / (self.x2 - self.y2[i])
        return np.outer(b, a).ravel()

    def col(self, j):
        h, k = j % self.n, j // self.n
        return 1.0 / ((self.x1[h] - self.y1) * (self.x2[k] - self.y2))


def _check_dense_2d(n):
    if not nk.is_power_of_two(n):
        raise ConfigurationError(f"n must be a power of two, got {n}")
    if n > DENSE_2D_MAX_N:
        raise ConfigurationError(
            f"dense 2-D path limited to n <= {DENSE_2D_MAX_N}; use the low-rank solver"
        )
    need = 16 * n**4
    try:
        avail = os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return
    if need > 0.8 * avail:
        raise ConfigurationError(
            f"dense 2-D matrix needs {need / 2**30:.1f} GiB; use the low-rank solver"
        )


def _assemble_2d(x1, x2, y1, y2, rho):
    n = x1.size
    N = n * n
    w1 = (x1 / n)[:, None] / (x1[:, None] - y1[None, :])  # (h, i)
    w2 = (x2 / n)[:, None] / (x2[:, None] - y2[None, :])  # (k, i)
    Bt = np.empty((N, N), dtype=complex)  # Bt[h + n k, i]
    Bt3 = Bt.reshape(n, n, N)
    for k in range(n):
        np.multiply(w1, w2[k][None, :], out=Bt3[k])
    A = Bt.T
    A[np.diag_indices(N)] -= rho
    return A


def _grid_from_values(v, n, r1, r2):
    v = np.asarray(v, dtype=complex)
    idx = int(np.argmax(np.abs(v)))
    if v[idx] == 0:
        raise NormalizationError("eigenvector is identically zero")
    v = v * (np.conj(v[idx]) / abs(v[idx]))
    F = nk.ifft2(v.reshape(n, n).T)  # F[h, k]
    j = np.arange(n)
    F *= np.exp(-j * math.log(r1))[:, None] * np.exp(-j * math.log(r2))[None, :]
    f00 = F[0, 0]
    if not abs(f00) >= 1e-14 * np.linalg.norm(F):
        raise NormalizationError(f"constant coefficient vanishes (|f_00| = {abs(f00):.3g})")
    G = -F / f00
    G[0, 0] = 0.0
    return np.ascontiguousarray(G.real), float(np.max(np.abs(G.imag)))


def _trim(g, floor=1e-22):
    mask = np.abs(g) >= floor
    if not mask.any():
        return g[:1, :1]
    h = np.nonzero(mask.any(axis=1))[0][-1] + 1
    k = np.nonzero(mask.any(axis=0))[0][-1] + 1
    return g[:h, :k]


def residual_2d(B: BivariateOffspring, g, rho: float | None = None) -> float:
    """Functional-equation defect on the unit torus grid.

    ``max |G(P_1, P_2) - rho G - 1 + rho|`` over pairs of ``n``-th roots of
    unity, ``G`` being the truncated series with coefficients ``g[h, k]``.
    """
    coeffs = np.asarray(g.g if isinstance(g, QsdGrid) else g, dtype=float)
    if rho is None:
        rho = mean_matrix_and_rho(B, require_regular=False)[1]
    n = coeffs.shape[0]
    if coeffs.shape != (n, n) or not nk.is_power_of_two(n):
        raise ConfigurationError("coefficient grid must be square with power-of-two side")
    g_grid = nk.fft2(coeffs).ravel()  # entry s * n + t  <->  (xi_s, xi_t)
    xi = nk.roots_of_unity(n)
    X = np.repeat(xi, n)
    Y = np.tile(xi, n)
    p1, p2 = B(X, Y)
    g_img = nk.polyval2d(_trim(coeffs), np.asarray(p1, dtype=complex), np.asarray(p2, dtype=complex))
    return float(np.max(np.abs(g_img - rho * g_grid - 1.0 + rho)))


def _finish(B, G, leak, n, r1, r2, rho, method, lam, rank=None, flags=(), compute_residual=True):
    res = residual_2d(B, G, rho) if compute_residual else math.nan
    return QsdGrid(
        g=G, n=n, r1=r1, r2=r2, residual=res, sum=float(math.fsum(G.ravel())),
        imag_leak=leak, method=method, rank=rank, rho=rho, eigenvalue=complex(lam),
        flags=tuple(flags),
    )


def solve_dense_2d(B: BivariateOffspring, n: int, radii=None, *,
                   compute_residual: bool = True) -> QsdGrid:
    """Bivariate quasi-stationary coefficients from the dense ``n^2 x n^2`` eigenproblem."""
    _check_dense_2d(n)
    rho = _require_subcritical(B)
    r1, r2 = _resolve_radii(B, radii)
    x1, x2, y1, y2 = _torus_nodes(B, n, r1, r2)
    A = _assemble_2d(x1, x2, y1, y2, rho)
    lam, v = nk.smallest_eigenpair(A, overwrite_a=True)
    del A
    G, leak = _grid_from_values(v, n, r1, r2)
    return _finish(B, G, leak, n, r1, r2, rho, "dense", lam, compute_residual=compute_residual)


def solve_lowrank_2d(B: BivariateOffspring, n: int, tau: float = DEFAULT_TAU, radii=None,
                     max_rank: int | None = None, *, compute_residual: bool = True) -> QsdGrid:
    """Bivariate quasi-stationary coefficients with the Hadamard-Cauchy matrix compressed by ACA."""
    if not nk.is_power_of_two(n):
        raise ConfigurationError(f"n must be a power of two, got {n}")
    rho = _require_subcritical(B)
    r1, r2 = _resolve_radii(B, radii)
    x1, x2, y1, y2 = _torus_nodes(B, n, r1, r2)
    factors = aca(HadamardCauchyOracle(x1, x2, y1, y2), tau, max_rank)
    factors.Vh *= np.outer(x2, x1).ravel() / (n * n)
    lam, v = _eigs_reduced(factors.U, factors.Vh, rho)
    rank, truncated = factors.rank, factors.truncated
    del factors
    G, leak = _grid_from_values(v, n, r1, r2)
    return _finish(B, G, leak, n, r1, r2, rho, "lowrank", lam, rank=rank,
                   flags=("truncated",) if truncated else (), compute_residual=compute_residual)


class _HadamardCauchyOperator:
    """Matrix-free product with the unshifted discretization matrix.

    Row ``i`` applied to ``v`` is ``sum_{h,k} W1[i, h] W2[i, k] V[k, h]`` with
    ``V = v.reshape(n, n)``, so each block of rows costs two ``n``-wide
    weight panels and one matrix product.
    """

    def __init__(self, x1, x2, y1, y2):
        self.n = x1.size
        self.N = self.n * self.n
        self.a1, self.x1, self.y1 = x1 / self.n, x1, y1
        self.a2, self.x2, self.y2 = x2 / self.n, x2, y2
        self.chunk = max(1, KRYLOV_CHUNK_ENTRIES // self.n)
        self.matvecs = 0

    def __call__(self, v):
        self.matvecs += 1
        V = np.asarray(v, dtype=complex).reshape(self.n, self.n)
        out = np.empty(self.N, dtype=complex)
        for lo in range(0, self.N, self.chunk):
            hi = min(lo + self.chunk, self.N)
            W1 = self.a1[None, :] / (self.x1[None, :] - self.y1[lo:hi, None])
            W2 = self.a2[None, :] / (self.x2[None, :] - self.y2[lo:hi, None])
            out[lo:hi] = np.einsum("ih,ih->i", W2 @ V, W1)
        return out


def solve_krylov_2d(B: BivariateOffspring, n: int, radii=None, *, tol: float = KRYLOV_TOL,
                    compute_residual: bool = True) -> QsdGrid:
    """Bivariate quasi-stationary coefficients from a matrix-free Arnoldi iteration.

    Solves the same discretized eigenproblem as :func:`solve_dense_2d` without
    forming or compressing the matrix, in ``O(n^2)`` memory. The eigenvalue
    ``rho`` of the unshifted matrix sits next to the eigenvalue ``1`` of the
    constant function at the top of the spectrum, so a few dominant
    eigenpairs suffice.
    """
    if not nk.is_power_of_two(n) or n < 4:
        raise ConfigurationError(f"n must be a power of two >= 4, got {n}")
    rho = _require_subcritical(B)
    r1, r2 = _resolve_radii(B, radii)
    x1, x2, y1, y2 = _torus_nodes(B, n, r1, r2)
    apply = _HadamardCauchyOperator(x1, x2, y1, y2)
    op = LinearOperator((apply.N, apply.N), matvec=apply, dtype=complex)
    start = np.random.default_rng(_KRYLOV_SEED).standard_normal(apply.N).astype(complex)
    k = min(4, apply.N - 2)
    try:
        vals, vecs = eigs(op, k=k, which="LM", tol=tol, ncv=min(20, apply.N - 1), v0=start)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"Arnoldi iteration did not converge: {exc}") from None
    except ArpackError as exc:
        raise ConvergenceError(f"Arnoldi iteration failed: {exc}") from None
    gaps = np.abs(vals - rho)
    order = np.argsort(gaps)
    j = int(order[0])
    if k > 1 and gaps[order[1]] <= gaps[j] + 1e-8:
        raise AmbiguousEigenvalueError(
            f"two eigenvalues are equally close to rho: {vals[j]:.6g}, {vals[order[1]]:.6g}"
        )
    G, leak = _grid_from_values(vecs[:, j], n, r1, r2)
    return _finish(B, G, leak, n, r1, r2, rho, "krylov", vals[j] - rho,
                   compute_residual=compute_residual)
