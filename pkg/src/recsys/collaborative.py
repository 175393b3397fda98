"""User-based k-nearest-neighbour collaborative filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, UnknownIdError
from .metrics import (
    CovarianceModel,
    MetricChoice,
    MetricKind,
    _require,
    euclidean_many,
    mahalanobis_many,
)
from .preference import PreferenceVector, RatingRecord, StandardizationStats, standardize

DEFAULT_K = 20
DEFAULT_MIN_SUPPORT = 1

RatingIndex = Mapping[str, Mapping[str, float]]


@dataclass(frozen=True)
class NeighborSet:
    user_id: str
    neighbors: tuple[tuple[str, float], ...]

    def __iter__(self):
        return iter(self.neighbors)

    def __len__(self) -> int:
        return len(self.neighbors)


@dataclass(frozen=True)
class Recommendation:
    item_id: str
    predicted_score: float
    support: int

    def to_json(self, user_id: str) -> dict:
        return {
            "user_id": user_id,
            "item_id": self.item_id,
            "score": self.predicted_score,
            "support": self.support,
        }


def index_ratings(records: Iterable[RatingRecord]) -> dict[str, dict[str, float]]:
    """Group ratings as ``{user_id: {item_id: rating}}``; later records win."""
    index: dict[str, dict[str, float]] = {}
    for rec in records:
        index.setdefault(rec.user_id, {})[rec.item_id] = rec.rating
    return index


def top_k_neighbors(
    user_id: str,
    vectors: Sequence[PreferenceVector],
    k: int,
    metric: MetricChoice,
    model: Optional[CovarianceModel] = None,
    stats: Optional[StandardizationStats] = None,
) -> NeighborSet:
    """The ``k`` most similar users, ordered by (similarity desc, user_id asc)."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    _require(metric, model, stats)
    target = next((v for v in vectors if v.user_id == user_id), None)
    if target is None:
        raise UnknownIdError("user", user_id)
    others = [v for v in vectors if v.user_id != user_id]
    if not others:
        return NeighborSet(user_id, ())

    if metric.standardize_first:
        target = standardize(target, stats)
        others = [standardize(v, stats) for v in others]
    a = target.as_array()
    B = np.array([v.components for v in others], dtype=float)
    if metric.kind is MetricKind.MAHALANOBIS:
        d = mahalanobis_many(a, B, model.inverse)
    else:
        d = euclidean_many(a, B)
    sims = 1.0 / (1.0 + d)

    ranked = sorted(zip((v.user_id for v in others), sims.tolist()), key=lambda t: (-t[1], t[0]))
    return NeighborSet(user_id, tuple(ranked[:k]))


def predict_rating(
    user_id: str,
    item_id: str,
    neighbors: NeighborSet,
    ratings: RatingIndex,
) -> Optional[float]:
    """Similarity-weighted mean of the neighbours' ratings of ``item_id``.

    Returns None when no neighbour rated the item.
    """
    pred = _predict(item_id, neighbors, ratings)
    return None if pred is None else pred[0]


def _predict(item_id: str, neighbors: NeighborSet, ratings: RatingIndex) -> Optional[tuple[float, int]]:
    weights: list[float] = []
    values: list[float] = []
    for other, sim in neighbors:
        r = ratings.get(other, {}).get(item_id)
        if r is not None:
            weights.append(sim)
            values.append(r)
    if not values:
        return None
    num = math.fsum(w * r for w, r in zip(weights, values))
    den = math.fsum(weights)
    # clamp rounding so the result stays a convex combination
    pred = min(max(num / den, min(values)), max(values))
    return pred, len(values)


def recommend(
    user_id: str,
    n: int,
    neighbors: NeighborSet,
    ratings: RatingIndex,
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> list[Recommendation]:
    """Top ``n`` items the user has not rated, by predicted rating.

    Ties fall back to higher support, then ascending item id.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if min_support < 1:
        raise ConfigError(f"min_support must be >= 1, got {min_support}")
    if neighbors.user_id != user_id:
        raise DataError(f"neighbour set belongs to {neighbors.user_id!r}, not {user_id!r}")
    if user_id not in ratings:
        raise UnknownIdError("user", user_id)

    seen = ratings[user_id]
    candidates = sorted(
        {item for other, _ in neighbors for item in ratings.get(other, {})} - set(seen)
    )
    recs = []
    for item in candidates:
        pred = _predict(item, neighbors, ratings)
        if pred is not None and pred[1] >= min_support:
            recs.append(Recommendation(item, pred[0], pred[1]))
    recs.sort(key=lambda r: (-r.predicted_score, -r.support, r.item_id))
    return recs[:n]
