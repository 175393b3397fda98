"""Euclidean and Mahalanobis distances and the distance-to-similarity map."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, SingularModelError
from .preference import PreferenceVector, StandardizationStats, _stack, standardize

DEFAULT_CONDITION_LIMIT = 1e12
RIDGE_SCALE = 1e-6


class MetricKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MAHALANOBIS = "mahalanobis"


@dataclass(frozen=True)
class MetricChoice:
    kind: MetricKind = MetricKind.EUCLIDEAN
    standardize_first: bool = False

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", MetricKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown metric kind {self.kind!r}") from None


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Sample mean, covariance and the (possibly ridge-regularized) inverse."""

    mean: np.ndarray
    covariance: np.ndarray
    inverse: np.ndarray
    regularization_lambda: float = 0.0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "inverse": self.inverse.tolist(),
            "lambda": float(self.regularization_lambda),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CovarianceModel":
        mean = np.asarray(data["mean"], dtype=float)
        cov = np.asarray(data["covariance"], dtype=float)
        inv = np.asarray(data["inverse"], dtype=float)
        m = mean.shape[0]
        if cov.shape != (m, m) or inv.shape != (m, m):
            raise DimensionError("covariance artifact has inconsistent shapes")
        return cls(mean, cov, inv, float(data["lambda"]))


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def euclidean_many(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances from one point ``a`` to each row of ``B``."""
    _check_dims(a, B)
    diff = B - a
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def mahalanobis_many(a: np.ndarray, B: np.ndarray, inverse: np.ndarray) -> np.ndarray:
    _check_dims(a, B)
    _check_dims(a, inverse)
    diff = B - a
    q = np.einsum("ij,jk,ik->i", diff, inverse, diff)
    return np.sqrt(np.maximum(q, 0.0))


def euclidean_distance(a: PreferenceVector, b: PreferenceVector) -> float:
    return float(euclidean_many(a.as_array(), b.as_array()[None, :])[0])


def mahalanobis_distance(a: PreferenceVector, b: PreferenceVector, model: CovarianceModel) -> float:
    if a.dim != model.dim:
        raise DimensionError(f"vector has {a.dim} components, model expects {model.dim}")
    return float(mahalanobis_many(a.as_array(), b.as_array()[None, :], model.inverse)[0])


def fit_covariance(
    vectors: Sequence[PreferenceVector],
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> CovarianceModel:
    """Estimate mean and covariance, inverting through a Cholesky factor.

    When the factorization fails or the condition number exceeds
    ``condition_limit`` the inverse is taken of ``S + lam*I`` with
    ``lam = 1e-6 * trace(S) / m``.
    """
    if len(vectors) < 2:
        raise SingularModelError(f"covariance needs at least 2 vectors, got {len(vectors)}")
    X = _stack(vectors)
    m = X.shape[1]
    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)

    trace = float(np.trace(cov))
    if not trace > 0.0:
        raise SingularModelError("sample covariance is zero: all vectors are identical")

    lam = 0.0
    inverse = _cholesky_inverse(cov, condition_limit)
    if inverse is None:
        lam = RIDGE_SCALE * trace / m
        inverse = _cholesky_inverse(cov + lam * np.eye(m), condition_limit)
        if inverse is None:
            raise SingularModelError(f"covariance remains singular after ridge lambda={lam!r}")
    return CovarianceModel(mean, cov, inverse, lam)


def _cholesky_inverse(S: np.ndarray, condition_limit: float) -> Optional[np.ndarray]:
    try:
        factor = linalg.cho_factor(S, lower=True, check_finite=True)
    except linalg.LinAlgError:
        return None
    if np.linalg.cond(S) > condition_limit:
        return None
    inv = linalg.cho_solve(factor, np.eye(S.shape[0]))
    return 0.5 * (inv + inv.T)


def similarity_from_distance(d: float) -> float:
    return 1.0 / (1.0 + d)


def _require(metric: MetricChoice, model, stats) -> None:
    if metric.kind is MetricKind.MAHALANOBIS and model is None:
        raise ConfigError("mahalanobis metric needs a fitted covariance model")
    if metric.standardize_first and stats is None:
        raise ConfigError("standardize_first needs standardization statistics")


def distance(
    a: PreferenceVector,
    b: PreferenceVector,
    metric: MetricChoice,
    model: Optional[CovarianceModel] = None,
    stats: Optional[StandardizationStats] = None,
) -> float:
    _require(metric, model, stats)
    if metric.standardize_first:
        a, b = standardize(a, stats), standardize(b, stats)
    if metric.kind is MetricKind.MAHALANOBIS:
        return mahalanobis_distance(a, b, model)
    return euclidean_distance(a, b)


def similarity(
    a: PreferenceVector,
    b: PreferenceVector,
    metric: MetricChoice,
    model: Optional[CovarianceModel] = None,
    stats: Optional[StandardizationStats] = None,
) -> float:
    """``1 / (1 + d(a, b))`` under the chosen metric; 1 exactly when d is 0."""
    return similarity_from_distance(distance(a, b, metric, model, stats))
