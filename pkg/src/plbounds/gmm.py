"""Gaussian mixtures over position errors and their probability bounds.

A protection level is the statistical bound on one component of the
position error: the magnitude the error exceeds only with the configured
integrity risk.  It is computed from the weighted mixture of per-candidate
error distributions by solving the mixture CDF for both tail quantiles at
half the risk each and taking the larger magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import BracketingFailure, LengthMismatch, NonConvergence, WeightSumViolation

_WEIGHT_TOL = 1e-12
_SQRT2 = math.sqrt(2.0)


def std_normal_cdf(z):
    """Standard normal CDF via the error function, ``0.5 (1 + erf(z / sqrt 2))``.

    The underlying erf is the C library implementation, accurate to a few
    ulp; reference values are pinned in the test suite.
    """
    return 0.5 * (1.0 + erf(np.asarray(z, dtype=float) / _SQRT2))


@dataclass(frozen=True)
class GaussianMixture:
    """A one-dimensional mixture: component means, variances and weights."""

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.means, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (m.shape == v.shape == w.shape) or m.ndim != 1 or m.size == 0:
            raise LengthMismatch(
                f"means, variances and weights must be equal-length 1-d arrays, "
                f"got {m.shape}, {v.shape}, {w.shape}"
            )
        if not np.all(np.isfinite(m)) or not np.all(np.isfinite(v)) or not np.all(np.isfinite(w)):
            raise ValueError("mixture parameters must be finite")
        if np.any(v <= 0.0):
            raise ValueError("variances must be strictly positive")
        if np.any(w < 0.0):
            raise ValueError("weights must be non-negative")
        total = float(w.sum())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise WeightSumViolation(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)
        object.__setattr__(self, "weights", w)

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(self.variances)


def build_gmm(means: np.ndarray, variances: np.ndarray, weights: np.ndarray) -> GaussianMixture:
    return GaussianMixture(means, variances, weights)


def gmm_cdf(mixture: GaussianMixture, x) -> np.ndarray | float:
    """Mixture CDF: the weighted sum of component normal CDFs."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    z = (xs[:, None] - mixture.means[None, :]) / mixture.sigmas[None, :]
    vals = std_normal_cdf(z) @ mixture.weights
    return float(vals[0]) if np.isscalar(x) or np.ndim(x) == 0 else vals


@dataclass(frozen=True)
class ProtectionLevelQuery:
    """Integrity risk and solver controls for a protection-level request."""

    integrity_risk: float = 0.01
    tolerance: float = 1e-4
    max_iterations: int = 200

    def __post_init__(self) -> None:
        if not 1e-9 <= self.integrity_risk < 1.0:
            raise ValueError("integrity_risk must lie in [1e-9, 1)")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class ProtectionLevels:
    """Statistical error bounds per vehicle axis, in meters."""

    lateral: float
    longitudinal: float
    vertical: float

    def __post_init__(self) -> None:
        for name, value in (("lateral", self.lateral), ("longitudinal", self.longitudinal), ("vertical", self.vertical)):
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} protection level must be finite and non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.lateral, self.longitudinal, self.vertical])


def _initial_bracket(mixture: GaussianMixture) -> tuple[float, float]:
    sig = mixture.sigmas
    return float(np.min(mixture.means - 10.0 * sig)), float(np.max(mixture.means + 10.0 * sig))


def gmm_quantile(
    mixture: GaussianMixture,
    probability: float,
    tolerance: float = 1e-4,
    max_iterations: int = 200,
) -> float:
    """Solve ``cdf(x) = probability`` for x by bisection.

    The initial bracket spans all components by ten standard deviations and
    is doubled outward up to five times if the target lies outside; the
    search stops when the bracket half-width falls below ``tolerance``.
    """
    if not 0.0 < probability < 1.0:
        raise ValueError("probability must lie strictly between 0 and 1")
    lo, hi = _initial_bracket(mixture)
    expansions = 0
    while not gmm_cdf(mixture, lo) <= probability <= gmm_cdf(mixture, hi):
        if expansions >= 5:
            raise BracketingFailure(f"could not bracket probability {probability}")
        width = hi - lo
        lo -= width
        hi += width
        expansions += 1
    iterations = 0
    while 0.5 * (hi - lo) > tolerance:
        if iterations >= max_iterations:
            raise NonConvergence(f"no convergence within {max_iterations} bisection steps")
        mid = 0.5 * (lo + hi)
        if gmm_cdf(mixture, mid) >= probability:
            hi = mid
        else:
            lo = mid
        iterations += 1
    return 0.5 * (lo + hi)


def protection_level(mixture: GaussianMixture, query: ProtectionLevelQuery = ProtectionLevelQuery()) -> float:
    """Two-sided error bound at the queried integrity risk.

    Each tail gets half the risk: the bound is the larger magnitude of the
    ``risk/2`` and ``1 - risk/2`` mixture quantiles.
    """
    half = 0.5 * query.integrity_risk
    rho_hi = gmm_quantile(mixture, 1.0 - half, query.tolerance, query.max_iterations)
    rho_lo = gmm_quantile(mixture, half, query.tolerance, query.max_iterations)
    return max(abs(rho_hi), abs(rho_lo))


def protection_levels_all(
    means: np.ndarray,
    variances: np.ndarray,
    weights: np.ndarray,
    query: ProtectionLevelQuery = ProtectionLevelQuery(),
) -> ProtectionLevels:
    """Per-axis protection levels from (N, 3) mixture ingredients.

    Columns are the lateral, longitudinal and vertical sample sets; each
    column forms its own mixture and is solved independently.
    """
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if not (means.shape == variances.shape == weights.shape) or means.ndim != 2 or means.shape[1] != 3:
        raise LengthMismatch("per-axis inputs must share shape (N, 3)")
    values = [
        protection_level(build_gmm(means[:, d], variances[:, d], weights[:, d]), query)
        for d in range(3)
    ]
    return ProtectionLevels(*values)
