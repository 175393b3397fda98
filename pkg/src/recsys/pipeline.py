"""Offline training, persisted model artifacts and the query-time model.

``train`` runs the offline phase in memory and returns a :class:`Model`;
``save_model`` / ``load_model`` move it to and from a directory of JSON
files described by a hashed manifest. The real-time commands only ever see
a :class:`Model`, whether it was just trained or loaded from disk.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from . import bm25, collaborative, metrics, stats
from .errors import ConfigError, DataError, UnknownIdError
from .preference import (
    LabeledObject,
    PreferenceVector,
    RatingRecord,
    StandardizationStats,
    build_vectors,
    fit_standardization,
    ingest_labels,
    ingest_ratings,
    standardize,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"
MANIFEST = "manifest.json"

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Config:
    aspects: tuple[str, ...]
    metric: str = "euclidean"
    standardize: bool = False
    k: int = collaborative.DEFAULT_K
    min_support: int = collaborative.DEFAULT_MIN_SUPPORT
    top_n: int = 10
    k1: float = bm25.DEFAULT_K1
    b: float = bm25.DEFAULT_B
    theta: float = 0.5
    quantile_p: float = 0.9
    confidence: float = 0.95
    regularization_threshold: float = metrics.DEFAULT_CONDITION_LIMIT
    seed: int = 0
    mvn_filter: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "aspects", tuple(self.aspects))
        if not self.aspects or not all(isinstance(a, str) and a for a in self.aspects):
            raise ConfigError("aspects must be a non-empty list of item ids")
        if len(set(self.aspects)) != len(self.aspects):
            raise ConfigError("aspects must be distinct")
        if self.metric not in {m.value for m in metrics.MetricKind}:
            raise ConfigError(f"metric must be one of euclidean, mahalanobis; got {self.metric!r}")
        for name in ("standardize", "mvn_filter"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be a boolean")
        for name in ("k", "min_support", "top_n"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        for name in ("theta", "quantile_p", "confidence"):
            value = getattr(self, name)
            if not _is_real(value) or not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value!r}")
        if not _is_real(self.regularization_threshold) or self.regularization_threshold <= 1.0:
            raise ConfigError("regularization_threshold must be a real number > 1")
        if not _is_real(self.k1) or not _is_real(self.b):
            raise ConfigError("k1 and b must be real numbers")
        bm25.Bm25Params(self.k1, self.b)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Config":
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "aspects" not in data:
            raise ConfigError("config is missing required key 'aspects'")
        return cls(**data)

    @classmethod
    def load(cls, path: PathLike) -> "Config":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["aspects"] = list(self.aspects)
        return out

    @property
    def metric_choice(self) -> metrics.MetricChoice:
        return metrics.MetricChoice(metrics.MetricKind(self.metric), self.standardize)

    @property
    def bm25_params(self) -> bm25.Bm25Params:
        return bm25.Bm25Params(self.k1, self.b)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


@dataclass
class Model:
    """Everything the real-time commands need, frozen after training."""

    config: Config
    vectors: tuple[PreferenceVector, ...]
    ratings: dict[str, dict[str, float]]
    standardization: StandardizationStats
    covariance: Optional[metrics.CovarianceModel] = None
    mvn: Optional[stats.MvnModel] = None
    corpus: Optional[bm25.LabelCorpus] = None
    _by_user: dict[str, PreferenceVector] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_user = {v.user_id: v for v in self.vectors}

    @property
    def params(self) -> bm25.Bm25Params:
        return self.config.bm25_params

    def vector(self, user_id: str) -> PreferenceVector:
        try:
            return self._by_user[user_id]
        except KeyError:
            raise UnknownIdError("user", user_id) from None

    def _metric_inputs(self):
        choice = self.config.metric_choice
        if choice.kind is metrics.MetricKind.MAHALANOBIS and self.covariance is None:
            raise ConfigError(
                "metric is mahalanobis but the model has no covariance artifact; "
                "retrain with this config to fit one"
            )
        return choice, self.covariance, (self.standardization if choice.standardize_first else None)

    def neighbors(self, user_id: str) -> collaborative.NeighborSet:
        self.vector(user_id)
        choice, cov, st = self._metric_inputs()
        return collaborative.top_k_neighbors(user_id, self.vectors, self.config.k, choice, cov, st)

    def recommend(self, user_id: str, top_n: Optional[int] = None) -> list[collaborative.Recommendation]:
        hood = self.neighbors(user_id)
        return collaborative.recommend(
            user_id, top_n or self.config.top_n, hood, self.ratings, self.config.min_support
        )

    def similar(self, user_a: str, user_b: str) -> dict:
        a, b = self.vector(user_a), self.vector(user_b)
        choice, cov, st = self._metric_inputs()
        d = metrics.distance(a, b, choice, cov, st)
        report = {
            "user_a": user_a,
            "user_b": user_b,
            "metric": choice.kind.value,
            "standardized": choice.standardize_first,
            "distance": d,
            "similarity": metrics.similarity_from_distance(d),
        }
        if self.mvn is not None:
            report["weights_a"] = list(stats.assign_weights(self.mvn, a, self.config.theta).weights)
            report["weights_b"] = list(stats.assign_weights(self.mvn, b, self.config.theta).weights)
        return report

    def labels(self, object_id: str, p: Optional[float] = None) -> list[bm25.ScoredObject]:
        if self.corpus is None:
            raise ConfigError("model has no label corpus; retrain with --labels")
        return bm25.recommend_by_labels(
            self.corpus, object_id, self.params, self.config.quantile_p if p is None else p
        )


def train(
    ratings: Sequence[RatingRecord],
    config: Config,
    objects: Optional[Sequence[LabeledObject]] = None,
    synonyms: Optional[bm25.SynonymTable] = None,
) -> Model:
    fill = "mean" if config.standardize else 0.0
    vectors = tuple(build_vectors(ratings, config.aspects, fill=fill))
    standardization = fit_standardization(vectors)

    covariance = None
    if config.metric == metrics.MetricKind.MAHALANOBIS.value:
        basis = vectors
        if config.standardize:
            basis = tuple(standardize(v, standardization) for v in vectors)
        covariance = metrics.fit_covariance(basis, config.regularization_threshold)
        if covariance.regularization_lambda:
            log.warning("covariance regularized with lambda=%r", covariance.regularization_lambda)

    mvn = stats.fit_mvn(vectors) if config.mvn_filter else None
    corpus = None
    if objects is not None:
        corpus = bm25.build_corpus(objects, synonyms or bm25.SynonymTable())
    return Model(
        config=config,
        vectors=vectors,
        ratings=collaborative.index_ratings(ratings),
        standardization=standardization,
        covariance=covariance,
        mvn=mvn,
        corpus=corpus,
    )


# -- persistence -------------------------------------------------------------


def _dumps(obj: Any) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=1, allow_nan=False, ensure_ascii=False) + "\n").encode("utf-8")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_sha256(path: PathLike) -> str:
    return _sha256(Path(path).read_bytes())


def _payloads(model: Model) -> dict[str, bytes]:
    files = {
        "config.json": _dumps(model.config.to_dict()),
        "params.json": _dumps(dataclasses.asdict(model.params)),
        "standardization.json": _dumps(model.standardization.to_dict()),
        "vectors.json": _dumps(
            {
                "aspects": list(model.config.aspects),
                "vectors": {v.user_id: list(v.components) for v in model.vectors},
            }
        ),
        "ratings.json": _dumps(model.ratings),
    }
    if model.covariance is not None:
        files["covariance.json"] = _dumps(model.covariance.to_dict())
    if model.mvn is not None:
        files["mvn.json"] = _dumps(model.mvn.to_dict())
    if model.corpus is not None:
        files["corpus.json"] = _dumps(model.corpus.to_dict())
    return files


def save_model(model: Model, out_dir: PathLike, inputs: Optional[Mapping[str, Optional[str]]] = None) -> Path:
    """Write the model atomically: build in a sibling temp dir, then rename.

    An existing ``out_dir`` is replaced only if it is empty or holds a
    previous model (has a manifest).
    """
    out = Path(out_dir)
    if out.exists():
        if not out.is_dir() or (any(out.iterdir()) and not (out / MANIFEST).is_file()):
            raise ConfigError(f"refusing to overwrite {out}: not an empty directory or a model directory")
    out.parent.mkdir(parents=True, exist_ok=True)

    files = _payloads(model)
    manifest = {
        "format_version": FORMAT_VERSION,
        "files": {name: _sha256(data) for name, data in sorted(files.items())},
        "inputs": dict(sorted((inputs or {}).items())),
    }
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        for name, data in files.items():
            (tmp / name).write_bytes(data)
        (tmp / MANIFEST).write_bytes(_dumps(manifest))
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out


def load_model(model_dir: PathLike) -> Model:
    root = Path(model_dir)
    manifest_path = root / MANIFEST
    if not manifest_path.is_file():
        raise DataError(f"no model found in {root} (missing {MANIFEST})")
    manifest = _read_json(manifest_path)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"model format version {version!r} is not supported (expected {FORMAT_VERSION!r})")

    raw: dict[str, Any] = {}
    for name, digest in manifest["files"].items():
        path = root / name
        if not path.is_file():
            raise DataError(f"model file missing: {path}")
        data = path.read_bytes()
        if _sha256(data) != digest:
            raise DataError(f"model file {path} does not match its manifest hash")
        raw[name] = json.loads(data)

    config = Config.from_dict(raw["config.json"])
    vecs = raw["vectors.json"]
    if tuple(vecs["aspects"]) != config.aspects:
        raise DataError("vectors artifact aspects differ from the config")
    model = Model(
        config=config,
        vectors=tuple(PreferenceVector(u, tuple(c)) for u, c in vecs["vectors"].items()),
        ratings={u: dict(items) for u, items in raw["ratings.json"].items()},
        standardization=StandardizationStats.from_dict(raw["standardization.json"]),
        covariance=metrics.CovarianceModel.from_dict(raw["covariance.json"]) if "covariance.json" in raw else None,
        mvn=stats.MvnModel.from_dict(raw["mvn.json"]) if "mvn.json" in raw else None,
        corpus=bm25.LabelCorpus.from_dict(raw["corpus.json"]) if "corpus.json" in raw else None,
    )
    if dataclasses.asdict(model.params) != raw["params.json"]:
        raise DataError("params artifact differs from the config")
    return model


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def train_from_files(
    ratings_path: PathLike,
    config: Config,
    out_dir: PathLike,
    labels_path: Optional[PathLike] = None,
    synonyms_path: Optional[PathLike] = None,
    config_path: Optional[PathLike] = None,
) -> Model:
    """Ingest input files, train, and persist the artifacts with input hashes."""
    ratings = ingest_ratings(ratings_path)
    objects = ingest_labels(labels_path).objects if labels_path is not None else None
    synonyms = bm25.SynonymTable.load(synonyms_path) if synonyms_path is not None else None
    model = train(list(ratings.records), config, objects, synonyms)
    inputs = {
        "ratings": file_sha256(ratings_path),
        "labels": file_sha256(labels_path) if labels_path is not None else None,
        "synonyms": file_sha256(synonyms_path) if synonyms_path is not None else None,
        "config": file_sha256(config_path) if config_path is not None else None,
    }
    save_model(model, out_dir, inputs)
    return model
