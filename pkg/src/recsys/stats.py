"""Statistical filters.

Multivariate-normal prior weighting (density, marginal and Monte Carlo
joint CDF, per-component weights) and distribution-free quantile
estimation with order-statistic confidence intervals.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DataError, DimensionError, SingularModelError, UnattainableConfidenceError
from .preference import PreferenceVector, _stack

MC_GENERATOR = "numpy.random.PCG64"
_MC_CHUNK = 1 << 16
_LOG_2PI = math.log(2.0 * math.pi)
_DIRECT_PMF_MAX_N = 1000
_TINY = 1e-290


@dataclass(frozen=True, eq=False)
class MvnModel:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise DimensionError(f"covariance shape {cov.shape} does not match mean of length {mean.shape[0]}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            w = np.linalg.eigvalsh(self.covariance)
            raise SingularModelError(
                f"covariance is not positive definite (smallest eigenvalue {w[0]!r})"
            ) from None

    @cached_property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.cholesky))))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MvnModel":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["covariance"], dtype=float))


@dataclass(frozen=True)
class WeightVector:
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not 0.0 <= w <= 1.0 for w in self.weights):
            raise ValueError("weights must lie in [0, 1]")


@dataclass(frozen=True)
class QuantileInterval:
    r: int
    s: int
    coverage: float
    lower: float
    upper: float
    n: int
    p: float

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "s": self.s,
            "coverage": self.coverage,
            "lower": self.lower,
            "upper": self.upper,
            "n": self.n,
            "p": self.p,
        }


# -- multivariate normal -----------------------------------------------------


def fit_mvn(samples: Sequence[PreferenceVector]) -> MvnModel:
    """Moment estimates of an m-dimensional normal; needs at least m + 1 samples."""
    if not samples:
        raise DataError("no samples")
    X = _stack(samples)
    n, m = X.shape
    if n < m + 1:
        raise DataError(f"need at least {m + 1} samples for dimension {m}, got {n}")
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= max(eig[-1], 0.0) * m * np.finfo(float).eps:
        raise SingularModelError(f"sample covariance is singular (smallest eigenvalue {eig[0]!r})")
    model = MvnModel(X.mean(axis=0), cov)
    model.cholesky  # fail early if the factorization does
    return model


def _as_point(model: MvnModel, x) -> np.ndarray:
    arr = x.as_array() if isinstance(x, PreferenceVector) else np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (model.dimension,):
        raise DimensionError(f"point has shape {arr.shape}, model dimension is {model.dimension}")
    return arr


def mvn_logpdf(model: MvnModel, x) -> float:
    L = model.cholesky
    z = solve_triangular(L, _as_point(model, x) - model.mean, lower=True)
    return -0.5 * (float(z @ z) + model.dimension * _LOG_2PI + model.log_det)


def mvn_pdf(model: MvnModel, x) -> float:
    """Normal density at ``x``, evaluated in log space then exponentiated."""
    return math.exp(mvn_logpdf(model, x))


def std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def mvn_cdf_monte_carlo(model: MvnModel, x, n_samples: int, seed: int) -> float:
    """Fraction of ``n_samples`` seeded draws from the model that are <= x in every component.

    Draws come from a PCG64 stream consumed in fixed-size chunks, so the
    result depends only on (model, x, n_samples, seed).
    """
    if n_samples < 1000:
        raise ValueError(f"n_samples must be >= 1000, got {n_samples}")
    point = _as_point(model, x)
    L = model.cholesky
    rng = np.random.Generator(np.random.PCG64(seed))
    hits = 0
    remaining = n_samples
    while remaining:
        size = min(remaining, _MC_CHUNK)
        draws = model.mean + rng.standard_normal((size, model.dimension)) @ L.T
        hits += int(np.count_nonzero(np.all(draws <= point, axis=1)))
        remaining -= size
    return hits / n_samples


def assign_weights(model: MvnModel, x, theta: float) -> WeightVector:
    """Per-component importance weights from the marginal normal CDFs.

    A component whose marginal CDF value reaches ``theta`` gets weight 1;
    below that the weight falls off linearly as ``F / theta``.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    point = _as_point(model, x)
    var = np.diag(model.covariance)
    if np.any(var <= 0):
        raise SingularModelError(f"component {int(np.argmin(var))} has zero variance")
    weights = []
    for xj, mu, v in zip(point, model.mean, var):
        F = std_normal_cdf((xj - mu) / math.sqrt(v))
        weights.append(1.0 if F >= theta else F / theta)
    return WeightVector(tuple(weights))


# -- quantiles ---------------------------------------------------------------


def quantile_index(n: int, p: float) -> int:
    """1-based order-statistic index ceil(n*p), clamped to [1, n]."""
    x = n * p
    nearest = round(x)
    # n*p that lands within rounding error of an integer is that integer
    idx = nearest if abs(x - nearest) <= 1e-9 * max(1.0, x) else math.ceil(x)
    return min(max(idx, 1), n)


def empirical_quantile(sample: Sequence[float], p: float) -> float:
    if len(sample) == 0:
        raise DataError("empty sample")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    ordered = sorted(sample)
    return ordered[quantile_index(len(ordered), p) - 1]


def _log_binom_pmf(n: int, i: int, p: float) -> float:
    return (
        math.lgamma(n + 1)
        - math.lgamma(i + 1)
        - math.lgamma(n - i + 1)
        + i * math.log(p)
        + (n - i) * math.log1p(-p)
    )


def _binom_pmf(n: int, i: int, p: float) -> float:
    # Direct product with the exact binomial keeps terms within a few ulps,
    # which matters when coverage sits exactly on a requested confidence.
    # Log-gamma takes over once C(n, i) or the powers leave double range.
    if n <= _DIRECT_PMF_MAX_N:
        c = float(math.comb(n, i))
        a = p**i
        b = (1.0 - p) ** (n - i)
        if math.isfinite(c) and a >= _TINY and b >= _TINY:
            return c * a * b
    return math.exp(_log_binom_pmf(n, i, p))


def ci_coverage(n: int, p: float, r: int, s: int) -> float:
    """P(X_(r) <= xi_p < X_(s)) for an i.i.d. sample of size n.

    The binomial terms for i = r .. s-1 are summed smallest first.
    """
    if not (1 <= r < s <= n):
        raise ValueError(f"need 1 <= r < s <= n, got r={r}, s={s}, n={n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    terms = sorted(_binom_pmf(n, i, p) for i in range(r, s))
    return min(math.fsum(terms), 1.0)


@functools.lru_cache(maxsize=256)
def ci_indices(n: int, p: float, confidence: float) -> tuple[int, int, float]:
    """Narrowest (r, s) with coverage >= confidence; ties go to the smaller r.

    Widths are tried outward from 1, so the search stops at the first width
    that reaches the requested confidence.
    """
    if n < 2:
        raise DataError(f"confidence interval needs n >= 2, got {n}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    best = ci_coverage(n, p, 1, n)
    if best < confidence:
        raise UnattainableConfidenceError(confidence, best, n)

    pmf = np.array([_binom_pmf(n, i, p) for i in range(n + 1)])
    cum = np.concatenate(([0.0], np.cumsum(pmf)))
    # fast screen with prefix sums, exact check with ci_coverage
    slack = 1e-9
    for width in range(1, n):
        r = np.arange(1, n - width + 1)
        approx = cum[r + width] - cum[r]
        for ri in r[approx >= confidence - slack].tolist():
            cov = ci_coverage(n, p, ri, ri + width)
            if cov >= confidence:
                return ri, ri + width, cov
    return 1, n, best


def quantile_ci(sample: Sequence[float], p: float, confidence: float) -> QuantileInterval:
    n = len(sample)
    if n < 2:
        raise DataError(f"confidence interval needs at least 2 values, got {n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    r, s, cov = ci_indices(n, float(p), float(confidence))
    ordered = sorted(sample)
    return QuantileInterval(r, s, cov, float(ordered[r - 1]), float(ordered[s - 1]), n, float(p))
