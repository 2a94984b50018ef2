"""Reference methods the contour solver is compared against.

* :func:`simulate_returned_process` runs the Galton-Watson chain and, at
  each extinction, restarts it from a state drawn from its own past. The
  empirical occupation measure estimates the quasi-stationary law.
* :func:`interpolation_baseline` fits a polynomial to the exact values
  ``G(z_k) = 1 - m^k`` along the extinction-probability iterates
  ``z_{k+1} = P(z_k)``.

Random numbers come from splitmix64: ``state += 0x9E3779B97F4A7C15``, then
``z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9``,
``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``, output ``z ^ (z >> 31)``; a
uniform double is the top 53 bits times ``2**-53``. Results are therefore
identical on every platform for a given seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import numkernel as nk
from .dense import QsdCoefficients, residual
from .errors import ConfigurationError, ModelError
from .genfun import LinearFractional, OffspringGF, Polynomial, require_subcritical

__all__ = [
    "EmpiricalDistribution",
    "SimulationConfig",
    "extinction_sequence",
    "interpolation_baseline",
    "simulate_returned_process",
    "total_variation",
]

_TWO_M53 = 1.0 / 9007199254740992.0

_KIND_TABLE = 0
_KIND_LINFRAC = 1


@dataclass(frozen=True)
class SimulationConfig:
    generations: int = 1_000_000
    initial_state: int = 1
    seed: int = 0
    max_state_tracked: int = 1024

    def __post_init__(self):
        if self.generations < 1:
            raise ConfigurationError("generations must be >= 1")
        if self.initial_state < 1:
            raise ConfigurationError("initial_state must be >= 1")
        if self.max_state_tracked < 1:
            raise ConfigurationError("max_state_tracked must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")


@dataclass
class EmpiricalDistribution:
    """Visit counts of states ``1..W`` (``counts[j - 1]``) plus an overflow bucket."""

    counts: np.ndarray
    overflow: int
    total: int

    @property
    def width(self) -> int:
        return self.counts.size

    def probabilities(self) -> np.ndarray:
        """Estimated ``g_j`` for ``j = 1..W``."""
        return self.counts / self.total

    def as_coefficients(self) -> np.ndarray:
        """Estimates laid out like solver output: index ``j`` holds ``g_j``, ``g_0 = 0``."""
        return np.concatenate(([0.0], self.probabilities()))


@njit(cache=True)
def _next_uniform(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, float(z >> np.uint64(11)) * _TWO_M53


@njit(cache=True)
def _run_chain(kind, cdf, p0, p, generations, initial_state, seed):
    history = np.empty(generations + 1, dtype=np.int64)
    history[0] = initial_state
    state = np.uint64(seed)
    z = initial_state
    log_p = math.log(p) if p > 0.0 else 0.0
    dmax = cdf.size
    for t in range(1, generations + 1):
        total = 0
        for _ in range(z):
            state, u = _next_uniform(state)
            if kind == 0:
                k = 0
                while k < dmax - 1 and u >= cdf[k]:
                    k += 1
                total += k
            else:
                if u < p0:
                    continue
                if p == 0.0:
                    total += 1
                else:
                    state, u2 = _next_uniform(state)
                    # 1 - u2 lies in (0, 1], so the log is finite
                    total += 1 + int(math.floor(math.log(1.0 - u2) / log_p))  # noqa: RUF046 (numba floor may return float)
        if total == 0:
            state, u = _next_uniform(state)
            total = history[int(u * t)]
        history[t] = total
        z = total
    return history


def _sampler(P: OffspringGF):
    if isinstance(P, Polynomial):
        cdf = np.cumsum(P.coeffs)
        cdf[-1] = 1.0
        return _KIND_TABLE, cdf, 0.0, 0.0
    if isinstance(P, LinearFractional):
        return _KIND_LINFRAC, np.ones(1), float(P.p0), float(P.p)
    raise ModelError(f"no offspring sampler for {type(P).__name__}")


def simulate_returned_process(P: OffspringGF, cfg: SimulationConfig) -> EmpiricalDistribution:
    """Occupation measure of the returned process over ``cfg.generations`` steps.

    The initial state counts as a visit at time 0 and every generation
    records one state, so ``total = generations + 1``. On extinction the
    chain jumps to a state drawn uniformly from its own history, which is
    the same as sampling from the empirical distribution so far.
    """
    require_subcritical(P)
    kind, cdf, p0, p = _sampler(P)
    history = _run_chain(kind, cdf, p0, p, cfg.generations, cfg.initial_state,
                         np.uint64(cfg.seed))
    W = cfg.max_state_tracked
    counts = np.bincount(np.minimum(history, W + 1), minlength=W + 2)
    return EmpiricalDistribution(
        counts=counts[1: W + 1].astype(np.int64),
        overflow=int(counts[W + 1]),
        total=int(history.size),
    )


def total_variation(emp: EmpiricalDistribution, reference) -> float:
    """Total-variation distance to ``reference[j] = g_j`` (index 0 ignored).

    Mass beyond the tracked width is compared as one aggregated bucket.
    """
    ref = np.asarray(reference, dtype=float)
    W = emp.width
    ref_w = np.zeros(W)
    upto = min(W, ref.size - 1)
    ref_w[:upto] = ref[1: upto + 1]
    ref_tail = max(0.0, 1.0 - math.fsum(ref_w))
    diff = np.abs(emp.probabilities() - ref_w).sum()
    diff += abs(emp.overflow / emp.total - ref_tail)
    return 0.5 * float(diff)


def extinction_sequence(P: OffspringGF, K: int):
    """Pairs ``(z_k, 1 - m^k)`` for ``k = 0..K-1`` with ``z_0 = 0`` and ``z_{k+1} = P(z_k)``."""
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    m = P.mean
    z = np.empty(K)
    z[0] = 0.0
    for k in range(1, K):
        z[k] = float(np.real(P(z[k - 1])))
    targets = 1.0 - m ** np.arange(K, dtype=float)
    return z, targets


def interpolation_baseline(P: OffspringGF, K: int = 200, degree: int = 12) -> QsdCoefficients:
    """Least-squares polynomial fit of degree ``degree`` to the extinction data.

    The point ``(0, 0)`` is part of the data rather than a hard
    constraint, so the fitted constant term is generally nonzero; it is
    dropped from the returned coefficients. The fit is exponentially
    ill-conditioned because the nodes ``z_k`` cluster at 1.
    """
    if K < degree + 1:
        raise ConfigurationError("need K >= degree + 1 data points")
    m = require_subcritical(P)
    z, targets = extinction_sequence(P, K)
    fit = nk.polyfit_real(z, targets, degree)
    g = np.array(fit.coef, dtype=float)
    g[0] = 0.0
    return QsdCoefficients(
        g=g,
        n=degree + 1,
        r=math.nan,
        residual=residual(P, g, m),
        sum=float(math.fsum(g)),
        imag_leak=0.0,
        method="interp",
        flags=("rank_deficient",) if fit.rank_deficient else (),
    )
