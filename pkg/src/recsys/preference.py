"""Preference vectors, rating and label records, ingestion and standardization."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DataError, DimensionError

log = logging.getLogger(__name__)

RATINGS_HEADER = ("user_id", "item_id", "rating")

# Rows rejected above this fraction make ingestion fail outright.
MAX_REJECT_FRACTION = 0.5


@dataclass(frozen=True)
class PreferenceVector:
    user_id: str
    components: tuple[float, ...]

    def __post_init__(self) -> None:
        comps = tuple(float(c) for c in self.components)
        if not comps:
            raise DimensionError(f"preference vector for {self.user_id!r} is empty")
        if not all(math.isfinite(c) for c in comps):
            raise DataError(f"preference vector for {self.user_id!r} has non-finite components")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float)


@dataclass(frozen=True)
class RatingRecord:
    user_id: str
    item_id: str
    rating: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.rating):
            raise DataError(f"rating for ({self.user_id!r}, {self.item_id!r}) is not finite")


@dataclass(frozen=True)
class LabeledObject:
    object_id: str
    labels: Counter = field(default_factory=Counter)

    def __post_init__(self) -> None:
        if not isinstance(self.labels, Counter):
            object.__setattr__(self, "labels", Counter(self.labels))


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class RatingsIngest:
    records: tuple[RatingRecord, ...]
    overwrites: int
    rejected: tuple[Diagnostic, ...]


@dataclass(frozen=True)
class LabelsIngest:
    objects: tuple[LabeledObject, ...]
    rejected: tuple[Diagnostic, ...]


@dataclass(frozen=True)
class StandardizationStats:
    means: tuple[float, ...]
    std_devs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.means) != len(self.std_devs):
            raise DimensionError("means and std_devs differ in length")
        if any(s < 0 or not math.isfinite(s) for s in self.std_devs):
            raise DataError("std_devs must be finite and non-negative")

    @property
    def dim(self) -> int:
        return len(self.means)

    @classmethod
    def identity(cls, m: int) -> "StandardizationStats":
        return cls((0.0,) * m, (1.0,) * m)

    def to_dict(self) -> dict:
        return {"means": list(self.means), "std_devs": list(self.std_devs)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "StandardizationStats":
        return cls(tuple(map(float, data["means"])), tuple(map(float, data["std_devs"])))


def ingest_ratings(path: Union[str, Path]) -> RatingsIngest:
    """Read a ``user_id,item_id,rating`` CSV file.

    Duplicate (user, item) pairs resolve last-wins and are counted in
    ``overwrites``. Malformed rows are skipped and reported with their line
    number; ingestion fails only when more than half of the data rows are
    rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"ratings file not found: {path}")

    latest: dict[tuple[str, str], RatingRecord] = {}
    rejected: list[Diagnostic] = []
    overwrites = 0
    rows = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return RatingsIngest((), 0, ())
        if tuple(h.strip() for h in header) != RATINGS_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(RATINGS_HEADER)}, got {','.join(header)}")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            rows += 1
            if len(row) != 3:
                rejected.append(Diagnostic(lineno, f"expected 3 fields, got {len(row)}"))
                continue
            user, item, raw = (cell.strip() for cell in row)
            if not user or not item:
                rejected.append(Diagnostic(lineno, "empty user_id or item_id"))
                continue
            try:
                rating = float(raw)
            except ValueError:
                rejected.append(Diagnostic(lineno, f"non-numeric rating {raw!r}"))
                continue
            if not math.isfinite(rating):
                rejected.append(Diagnostic(lineno, f"non-finite rating {raw!r}"))
                continue
            key = (user, item)
            if key in latest:
                overwrites += 1
                # re-insert so iteration order reflects the winning row
                del latest[key]
            latest[key] = RatingRecord(user, item, rating)

    for diag in rejected:
        log.warning("%s:%s", path, diag)
    if rows and len(rejected) > MAX_REJECT_FRACTION * rows:
        raise DataError(f"{path}: {len(rejected)} of {rows} rows rejected (first: {rejected[0]})")
    if overwrites:
        log.info("%s: %d duplicate (user, item) rows overwritten", path, overwrites)
    return RatingsIngest(tuple(latest.values()), overwrites, tuple(rejected))


def ingest_labels(path: Union[str, Path]) -> LabelsIngest:
    """Read JSON-lines records of the form ``{"object_id": ..., "labels": [...]}``."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"labels file not found: {path}")

    objects: dict[str, LabeledObject] = {}
    rejected: list[Diagnostic] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or not isinstance(rec.get("object_id"), str):
                raise DataError(f"{path}:{lineno}: record needs a string 'object_id'")
            labels = rec.get("labels")
            if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
                raise DataError(f"{path}:{lineno}: 'labels' must be an array of strings")
            oid = rec["object_id"]
            if oid in objects:
                raise DataError(f"{path}:{lineno}: duplicate object_id {oid!r}")
            if not labels:
                rejected.append(Diagnostic(lineno, f"object {oid!r} has no labels"))
                continue
            objects[oid] = LabeledObject(oid, Counter(labels))

    for diag in rejected:
        log.warning("%s:%s", path, diag)
    return LabelsIngest(tuple(objects.values()), tuple(rejected))


def build_vectors(
    ratings: Iterable[RatingRecord],
    aspects: Sequence[str],
    fill: Union[float, str] = 0.0,
) -> list[PreferenceVector]:
    """One vector per user, component j holding the rating of ``aspects[j]``.

    ``fill`` is used for unrated aspects. Pass ``"mean"`` to fill with the
    mean observed rating of that aspect, so that missing entries standardize
    to 0. Users are returned sorted by id.
    """
    if not aspects:
        raise DataError("aspect list is empty")
    if len(set(aspects)) != len(aspects):
        raise DataError("aspect ids must be distinct")
    position = {a: j for j, a in enumerate(aspects)}
    m = len(aspects)

    table: dict[str, dict[int, float]] = {}
    for rec in ratings:
        row = table.setdefault(rec.user_id, {})
        j = position.get(rec.item_id)
        if j is not None:
            row[j] = rec.rating

    if fill == "mean":
        observed: list[list[float]] = [[] for _ in range(m)]
        for user in sorted(table):
            for j, r in table[user].items():
                observed[j].append(r)
        fills = [math.fsum(col) / len(col) if col else 0.0 for col in observed]
    elif isinstance(fill, str):
        raise ValueError(f"fill must be a number or 'mean', got {fill!r}")
    else:
        fills = [float(fill)] * m

    return [
        PreferenceVector(user, tuple(table[user].get(j, fills[j]) for j in range(m)))
        for user in sorted(table)
    ]


def _stack(vectors: Sequence[PreferenceVector]) -> np.ndarray:
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise DimensionError(f"vectors have mixed dimensions {sorted(dims)}")
    return np.array([v.components for v in vectors], dtype=float)


def fit_standardization(vectors: Sequence[PreferenceVector]) -> StandardizationStats:
    if len(vectors) < 2:
        raise DataError(f"standardization needs at least 2 vectors, got {len(vectors)}")
    X = _stack(vectors)
    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=1)
    # constant columns can leave rounding residue in the std
    constant = np.all(X == X[0], axis=0)
    stds[constant] = 0.0
    means[constant] = X[0, constant]
    return StandardizationStats(tuple(means.tolist()), tuple(stds.tolist()))


def standardize(v: PreferenceVector, stats: StandardizationStats) -> PreferenceVector:
    """Z-score each component; zero-variance components map to 0."""
    if v.dim != stats.dim:
        raise DimensionError(f"vector has {v.dim} components, stats expect {stats.dim}")
    out = tuple(
        (x - mu) / sd if sd > 0 else 0.0
        for x, mu, sd in zip(v.components, stats.means, stats.std_devs)
    )
    return PreferenceVector(v.user_id, out)
