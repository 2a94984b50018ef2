"""Evaluation-interpolation solver for the one-type quasi-stationary distribution.

The Yaglom generating function ``G`` satisfies ``G(P(z)) = m G(z) + 1 - m``
with ``G(0) = 0``. Writing ``G = 1 + t f`` turns this into the eigenproblem
``f(P(z)) = m f(z)``, which is discretized by the trapezoidal rule for the
Cauchy integral on the circle ``|z| = r``. The values of ``f`` at the nodes
``r * xi_h`` form the eigenvector for the smallest eigenvalue of

    A[j, h] = (r xi_h / n) / (r xi_h - P(r xi_j)) - m delta_{jh}.

An inverse FFT and a rescaling by ``r**-j`` turn those values into Taylor
coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from .errors import (
    ConfigurationError,
    DegenerateContourError,
    NormalizationError,
    UnsupportedRegimeError,
)
from .genfun import OffspringGF, choose_radius, require_subcritical

__all__ = [
    "DENSE_MAX_N",
    "ContourConfig",
    "QsdCoefficients",
    "assemble_cauchy",
    "coefficients_from_values",
    "residual",
    "resolve_radius",
    "solve_dense",
]

DENSE_MAX_N = 16384
NORMALIZATION_FLOOR = 1e-14
_ASSEMBLY_BLOCK = 512


@dataclass(frozen=True)
class ContourConfig:
    """Discretization of the contour: ``n`` nodes on the circle of radius ``r``.

    Leave ``r`` as ``None`` to pick the radius automatically with
    :func:`yaglom.genfun.choose_radius`.
    """

    n: int
    r: float | None = None

    def __post_init__(self):
        if not nk.is_power_of_two(self.n):
            raise ConfigurationError(f"n must be a power of two, got {self.n}")
        if self.r is not None and not (math.isfinite(self.r) and self.r > 1.0):
            raise ConfigurationError(f"contour radius must be finite and > 1, got {self.r}")

    @property
    def auto_r(self) -> bool:
        return self.r is None


@dataclass
class QsdCoefficients:
    """Approximate quasi-stationary distribution ``g[0..n-1]`` with ``g[0] = 0``."""

    g: np.ndarray
    n: int
    r: float
    residual: float
    sum: float
    imag_leak: float
    method: str
    rank: int | None = None
    eigenvalue: complex | None = None
    flags: tuple = field(default_factory=tuple)

    @property
    def min_coefficient(self) -> float:
        return float(self.g[1:].min())

    def metadata(self) -> dict:
        out = {
            "method": self.method,
            "n": self.n,
            "r": self.r,
            "residual": self.residual,
            "sum": self.sum,
            "imag_leak": self.imag_leak,
            "rank": self.rank,
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def resolve_radius(P: OffspringGF, cfg: ContourConfig) -> float:
    """Radius to use for ``cfg``, checking ``1 < r`` and ``P(r) < r``."""
    r = choose_radius(P) if cfg.auto_r else float(cfg.r)
    if not float(np.real(P(r))) < r:
        raise UnsupportedRegimeError(f"contour radius r={r} violates P(r) < r")
    return r


def _nodes(n: int, r: float):
    x = r * nk.roots_of_unity(n)
    return x, x


def _image_gap(x, y, r):
    # |x_h - y_j| >= r - max|y_j|, so one check bounds every denominator
    gap = r - float(np.max(np.abs(y)))
    if not gap > 1e-300:
        raise DegenerateContourError(
            f"contour image touches the contour (r - max|P(r xi)| = {gap:.3g})"
        )
    return gap


def assemble_cauchy(P: OffspringGF, cfg: ContourConfig, m: float | None = None) -> np.ndarray:
    """Dense shifted Cauchy matrix ``A`` (Fortran-ordered ``complex128``)."""
    if cfg.n > DENSE_MAX_N:
        raise ConfigurationError(
            f"dense path limited to n <= {DENSE_MAX_N}; use the low-rank solver"
        )
    if m is None:
        m = require_subcritical(P)
    r = resolve_radius(P, cfg)
    n = cfg.n
    x = r * nk.roots_of_unity(n)
    y = np.asarray(P(x), dtype=complex)
    _image_gap(x, y, r)
    scale = x / n
    # B[h, j] = scale_h / (x_h - y_j) in C order, so B.T is A in Fortran order
    B = np.empty((n, n), dtype=complex)
    for h0 in range(0, n, _ASSEMBLY_BLOCK):
        blk = B[h0:h0 + _ASSEMBLY_BLOCK]
        np.subtract(x[h0:h0 + _ASSEMBLY_BLOCK, None], y[None, :], out=blk)
        np.reciprocal(blk, out=blk)
        blk *= scale[h0:h0 + _ASSEMBLY_BLOCK, None]
    A = B.T
    A[np.diag_indices(n)] -= m
    return A


def coefficients_from_values(values: np.ndarray, r: float):
    """Normalized coefficients from the contour values of an eigenfunction.

    Returns ``(g, imag_leak)`` with ``g`` real, ``g[0] = 0`` and
    ``g_j = -f_j / f_0``.
    """
    v = np.asarray(values, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    if v[k] == 0:
        raise NormalizationError("eigenvector is identically zero")
    v = v * (np.conj(v[k]) / abs(v[k]))
    f = nk.ifft(v)
    f *= np.exp(-np.arange(f.size) * math.log(r))
    f0 = f[0]
    if not abs(f0) >= NORMALIZATION_FLOOR * np.linalg.norm(f):
        raise NormalizationError(
            f"constant coefficient of the eigenfunction vanishes (|f_0| = {abs(f0):.3g})"
        )
    g = -f / f0
    g[0] = 0.0
    leak = float(np.max(np.abs(g.imag)))
    return np.ascontiguousarray(g.real), leak


def _effective_length(g, floor=1e-20):
    """Index after which the remaining ``|g_j|`` add up to less than ``floor``."""
    tail = np.cumsum(np.abs(g[::-1]))[::-1]
    keep = np.nonzero(tail >= floor)[0]
    return int(keep[-1]) + 1 if keep.size else 1


def residual(P: OffspringGF, g, m: float | None = None) -> float:
    """Functional-equation defect on the unit roots of unity.

    ``max_j |G(P(xi_j)) - m G(xi_j) - 1 + m|`` where ``G`` is the truncated
    series with coefficients ``g`` (array or :class:`QsdCoefficients`).
    """
    coeffs = np.asarray(g.g if isinstance(g, QsdCoefficients) else g, dtype=float)
    if m is None:
        m = P.mean
    n = coeffs.size
    xi = nk.roots_of_unity(n) if nk.is_power_of_two(n) else np.exp(2j * np.pi * np.arange(n) / n)
    length = _effective_length(coeffs)
    c = coeffs[:length]
    g_xi = nk.polyval(c, xi)
    g_pxi = nk.polyval(c, np.asarray(P(xi), dtype=complex))
    return float(np.max(np.abs(g_pxi - m * g_xi - 1.0 + m)))


def solve_dense(P: OffspringGF, cfg: ContourConfig, *, compute_residual: bool = True) -> QsdCoefficients:
    """Quasi-stationary coefficients from the dense ``n x n`` eigenproblem."""
    m = require_subcritical(P)
    r = resolve_radius(P, cfg)
    A = assemble_cauchy(P, ContourConfig(cfg.n, r), m)
    lam, v = nk.smallest_eigenpair(A, overwrite_a=True)
    del A
    g, leak = coefficients_from_values(v, r)
    res = residual(P, g, m) if compute_residual else math.nan
    return QsdCoefficients(
        g=g,
        n=cfg.n,
        r=r,
        residual=res,
        sum=float(math.fsum(g)),
        imag_leak=leak,
        method="dense",
        eigenvalue=complex(lam),
    )
