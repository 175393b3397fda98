"""Label corpus, BM25 scoring, TF-IDF keywords and quantile-thresholded label recommendation."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

from .errors import ConfigError, DataError, UnknownIdError
from .preference import LabeledObject
from .stats import empirical_quantile

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_WORD = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split free text on anything that is not a letter or digit."""
    return _WORD.findall(text.lower())


def _normalize(label: str) -> str:
    return label.strip().lower()


@dataclass(frozen=True)
class SynonymTable:
    groups: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        groups = {_normalize(k): _normalize(v) for k, v in self.groups.items()}
        for surface, canon in groups.items():
            if groups.get(canon, canon) != canon:
                raise ConfigError(
                    f"synonym chain {surface!r} -> {canon!r} -> {groups[canon]!r}; "
                    "canonical labels must map to themselves"
                )
        object.__setattr__(self, "groups", groups)

    def canon(self, label: str) -> str:
        key = _normalize(label)
        return self.groups.get(key, key)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SynonymTable":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"synonyms file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in data.items()
        ):
            raise DataError(f"{path}: synonyms must be a JSON object of string -> string")
        return cls(data)


@dataclass(frozen=True)
class Bm25Params:
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k1) and self.k1 >= 0):
            raise ConfigError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigError(f"b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class ScoredObject:
    object_id: str
    score: float

    def to_dict(self) -> dict:
        return {"object_id": self.object_id, "score": self.score}


class LabelCorpus:
    """Canonical label multisets per object plus the statistics BM25 needs.

    ``postings`` maps each label to ``[(object_id, count), ...]`` in object id
    order. Treat instances as read-only once built.
    """

    def __init__(self, documents: Mapping[str, Counter]) -> None:
        if not documents:
            raise DataError("corpus needs at least one document")
        self.documents: dict[str, Counter] = {
            oid: Counter(dict(sorted(Counter(doc).items()))) for oid, doc in sorted(documents.items())
        }
        self.lengths = {oid: sum(doc.values()) for oid, doc in self.documents.items()}
        self.doc_count = len(self.documents)
        self.avgdl = sum(self.lengths.values()) / self.doc_count
        postings: dict[str, list[tuple[str, int]]] = {}
        for oid, doc in self.documents.items():
            for term, f in doc.items():
                postings.setdefault(term, []).append((oid, f))
        self.postings = dict(sorted(postings.items()))
        self.doc_freq = {t: len(p) for t, p in self.postings.items()}

    def __contains__(self, object_id: str) -> bool:
        return object_id in self.documents

    def document(self, object_id: str) -> Counter:
        try:
            return self.documents[object_id]
        except KeyError:
            raise UnknownIdError("object", object_id) from None

    def to_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "avgdl": self.avgdl,
            "documents": {oid: dict(doc) for oid, doc in self.documents.items()},
            "doc_freq": self.doc_freq,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LabelCorpus":
        corpus = cls({oid: Counter(doc) for oid, doc in data["documents"].items()})
        if corpus.doc_count != data["doc_count"] or corpus.doc_freq != data["doc_freq"] or corpus.avgdl != data["avgdl"]:
            raise DataError("corpus artifact statistics do not match its documents")
        return corpus


def canonicalize(labels: Iterable[str], table: SynonymTable) -> Counter:
    """Map labels through the synonym table, merging multiplicities."""
    items = labels.elements() if isinstance(labels, Counter) else labels
    return Counter(table.canon(label) for label in items)


def build_corpus(objects: Iterable[LabeledObject], table: SynonymTable) -> LabelCorpus:
    docs: dict[str, Counter] = {}
    for obj in objects:
        if obj.object_id in docs:
            raise DataError(f"duplicate object_id {obj.object_id!r}")
        canon = canonicalize(obj.labels, table)
        if not canon:
            raise DataError(f"object {obj.object_id!r} has no labels")
        docs[obj.object_id] = canon
    if not docs:
        raise DataError("corpus needs at least one labeled object")
    return LabelCorpus(docs)


def idf(corpus: LabelCorpus, term: str) -> float:
    N = corpus.doc_count
    n = corpus.doc_freq.get(term, 0)
    return math.log((N - n + 0.5) / (n + 0.5) + 1.0)


def _term_score(idf_value: float, f: int, doc_len: int, avgdl: float, params: Bm25Params) -> float:
    norm = params.k1 * (1.0 - params.b + params.b * doc_len / avgdl)
    return idf_value * (params.k1 + 1.0) * f / (f + norm)


def bm25_score(corpus: LabelCorpus, query: Iterable[str], doc_id: str, params: Bm25Params) -> float:
    """BM25 score of one document; each distinct query term counts once."""
    doc = corpus.document(doc_id)
    length = corpus.lengths[doc_id]
    score = 0.0
    for term in sorted(set(query)):
        f = doc.get(term, 0)
        if f:
            score += _term_score(idf(corpus, term), f, length, corpus.avgdl, params)
    return score


def score_all(corpus: LabelCorpus, query: Iterable[str], params: Bm25Params) -> dict[str, float]:
    """Scores for every document, accumulated through the postings lists.

    Terms are visited in the same order as :func:`bm25_score`, so the two
    agree bit for bit.
    """
    scores = dict.fromkeys(corpus.documents, 0.0)
    for term in sorted(set(query)):
        posting = corpus.postings.get(term)
        if not posting:
            continue
        w = idf(corpus, term)
        for oid, f in posting:
            scores[oid] += _term_score(w, f, corpus.lengths[oid], corpus.avgdl, params)
    return scores


def tfidf_keywords(corpus: LabelCorpus, doc_id: str, top_k: int) -> list[tuple[str, float]]:
    if top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {top_k}")
    doc = corpus.document(doc_id)
    length = corpus.lengths[doc_id]
    weighted = [(t, f / length * idf(corpus, t)) for t, f in doc.items()]
    weighted.sort(key=lambda tw: (-tw[1], tw[0]))
    return weighted[:top_k]


def recommend_by_labels(
    corpus: LabelCorpus,
    seed_object: str,
    params: Bm25Params,
    p: float,
) -> list[ScoredObject]:
    """Objects whose BM25 score against the seed's labels beats the p-quantile.

    The seed's canonical labels form the query, every other object is
    scored, and only scores strictly above the empirical p-quantile of those
    scores are kept.
    """
    query = corpus.document(seed_object)
    if corpus.doc_count < 2:
        raise DataError("label recommendation needs at least 2 objects in the corpus")
    scores = score_all(corpus, query, params)
    del scores[seed_object]
    threshold = empirical_quantile(list(scores.values()), p)
    hits = [ScoredObject(oid, s) for oid, s in scores.items() if s > threshold]
    hits.sort(key=lambda so: (-so.score, so.object_id))
    return hits
