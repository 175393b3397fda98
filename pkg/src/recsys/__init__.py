"""Similarity-based collaborative filtering, statistical filters and BM25 label ranking."""

from .bm25 import (
    Bm25Params,
    LabelCorpus,
    ScoredObject,
    SynonymTable,
    bm25_score,
    build_corpus,
    canonicalize,
    idf,
    recommend_by_labels,
    tfidf_keywords,
    tokenize,
)
from .collaborative import NeighborSet, Recommendation, predict_rating, recommend, top_k_neighbors
from .errors import ConfigError, DataError, NumericError, RecsysError, SingularModelError
from .metrics import (
    CovarianceModel,
    MetricChoice,
    MetricKind,
    euclidean_distance,
    fit_covariance,
    mahalanobis_distance,
    similarity,
)
from .pipeline import Config, Model, load_model, save_model, train
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
from .stats import (
    MvnModel,
    QuantileInterval,
    WeightVector,
    assign_weights,
    ci_coverage,
    empirical_quantile,
    fit_mvn,
    mvn_cdf_monte_carlo,
    mvn_pdf,
    quantile_ci,
    std_normal_cdf,
)

__version__ = "0.1.0"
