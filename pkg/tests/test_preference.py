import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recsys.errors import DataError, DimensionError
from recsys.preference import (
    PreferenceVector,
    RatingRecord,
    StandardizationStats,
    build_vectors,
    fit_standardization,
    ingest_labels,
    ingest_ratings,
    standardize,
)


def _csv(tmp_path, body):
    path = tmp_path / "r.csv"
    path.write_text("user_id,item_id,rating\n" + body, encoding="utf-8")
    return path


class TestIngestRatings:
    def test_last_wins(self, tmp_path):
        result = ingest_ratings(_csv(tmp_path, "u1,i1,4.0\nu1,i1,5.0\n"))
        assert result.records == (RatingRecord("u1", "i1", 5.0),)
        assert result.overwrites == 1

    def test_header_only(self, tmp_path):
        result = ingest_ratings(_csv(tmp_path, ""))
        assert result.records == ()
        assert result.rejected == ()

    def test_bad_row_is_rejected_not_fatal(self, tmp_path):
        good = "".join(f"u{i},i1,{i}.5\n" for i in range(10))
        result = ingest_ratings(_csv(tmp_path, good[:30] + "u1,i1,abc\n" + good[30:]))
        assert len(result.records) == 10
        assert len(result.rejected) == 1
        assert result.rejected[0].line == 5
        assert "abc" in result.rejected[0].message

    def test_majority_rejected_is_fatal(self, tmp_path):
        with pytest.raises(DataError, match="2 of 3 rows rejected"):
            ingest_ratings(_csv(tmp_path, "u1,i1,x\nu2,i1,y\nu3,i1,1\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            ingest_ratings(tmp_path / "nope.csv")

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("user,item,score\nu1,i1,1\n")
        with pytest.raises(DataError, match="header"):
            ingest_ratings(path)

    def test_non_finite_rejected(self, tmp_path):
        result = ingest_ratings(_csv(tmp_path, "u1,i1,nan\nu1,i2,1\nu2,i1,2\n"))
        assert len(result.records) == 2
        assert result.rejected[0].line == 2

    @given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("xyz"), st.integers(-5, 5)), max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_never_fabricates(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("r") / "r.csv"
        path.write_text("user_id,item_id,rating\n" + "".join(f"{u},{i},{r}\n" for u, i, r in rows))
        result = ingest_ratings(path)
        assert len(result.records) <= len(rows)
        assert len(result.records) + result.overwrites == len(rows)


class TestIngestLabels:
    def test_multiset(self, tmp_path):
        path = tmp_path / "l.jsonl"
        path.write_text('{"object_id":"v1","labels":["cat","pet","cat"]}\n')
        (obj,) = ingest_labels(path).objects
        assert obj.object_id == "v1"
        assert obj.labels == {"cat": 2, "pet": 1}

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "l.jsonl"
        path.write_text('{"object_id":"v1","labels":["a"]}\n{"object_id":"v1","labels":["b"]}\n')
        with pytest.raises(DataError, match="duplicate object_id 'v1'"):
            ingest_labels(path)

    def test_empty_labels_rejected(self, tmp_path):
        path = tmp_path / "l.jsonl"
        path.write_text('{"object_id":"v2","labels":[]}\n{"object_id":"v3","labels":["x"]}\n')
        result = ingest_labels(path)
        assert [o.object_id for o in result.objects] == ["v3"]
        assert result.rejected[0].line == 1

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "l.jsonl"
        path.write_text('{"object_id":"v3","labels":["x"]}\n{oops\n')
        with pytest.raises(DataError, match=":2:"):
            ingest_labels(path)


class TestBuildVectors:
    def test_full(self):
        recs = [RatingRecord("u1", "i1", 3), RatingRecord("u1", "i2", 5)]
        (v,) = build_vectors(recs, ["i1", "i2"])
        assert v == PreferenceVector("u1", (3.0, 5.0))

    def test_fill_zero(self):
        (v,) = build_vectors([RatingRecord("u1", "i1", 3)], ["i1", "i2"], fill=0)
        assert v.components == (3.0, 0.0)

    def test_two_by_two(self):
        recs = [RatingRecord(u, i, 1.0) for u in ("u1", "u2") for i in ("i1", "i2")]
        vecs = build_vectors(recs, ["i1", "i2"])
        assert [v.user_id for v in vecs] == ["u1", "u2"]
        assert all(v.dim == 2 for v in vecs)

    def test_empty_aspects(self):
        with pytest.raises(DataError):
            build_vectors([], [])

    def test_mean_fill_standardizes_to_zero(self):
        recs = [RatingRecord("u1", "i1", 1), RatingRecord("u2", "i1", 4), RatingRecord("u3", "i2", 2),
                RatingRecord("u1", "i2", 6)]
        vecs = build_vectors(recs, ["i1", "i2"], fill="mean")
        stats = fit_standardization(vecs)
        z = standardize(vecs[2], stats)  # u3 never rated i1
        assert abs(z.components[0]) < 1e-12

    def test_permutation_invariant(self):
        rng = random.Random(3)
        recs = [RatingRecord(f"u{u}", f"i{i}", rng.uniform(0, 5)) for u in range(6) for i in range(4) if rng.random() < 0.7]
        base = build_vectors(recs, ["i0", "i1", "i2", "i3"])
        for _ in range(5):
            rng.shuffle(recs)
            assert build_vectors(recs, ["i0", "i1", "i2", "i3"]) == base


class TestStandardization:
    def test_hand_moments(self):
        s = fit_standardization([PreferenceVector("a", (0, 10)), PreferenceVector("b", (2, 10))])
        assert s.means == (1.0, 10.0)
        assert s.std_devs[0] == pytest.approx(math.sqrt(2), abs=1e-15)
        assert s.std_devs[1] == 0.0

    def test_identical_vectors(self):
        v = (0.1, 0.7, 3.3)
        s = fit_standardization([PreferenceVector(str(i), v) for i in range(5)])
        assert s.means == v
        assert s.std_devs == (0.0, 0.0, 0.0)

    def test_one_dimensional(self):
        s = fit_standardization([PreferenceVector("a", (-1,)), PreferenceVector("b", (1,))])
        assert s.means == (0.0,)
        assert s.std_devs[0] == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_needs_two(self):
        with pytest.raises(DataError):
            fit_standardization([PreferenceVector("a", (1,))])

    def test_standardize_examples(self):
        stats = StandardizationStats((1.0, 10.0), (math.sqrt(2), 0.0))
        assert standardize(PreferenceVector("u", (1, 10)), stats).components == (0.0, 0.0)
        out = standardize(PreferenceVector("u", (1 + math.sqrt(2), 10)), stats).components
        assert out[0] == pytest.approx(1.0, abs=1e-15) and out[1] == 0.0
        v = PreferenceVector("u", (3.5, -2.0))
        assert standardize(v, StandardizationStats.identity(2)) == v

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            standardize(PreferenceVector("u", (1, 2, 3)), StandardizationStats.identity(2))

    @given(
        st.integers(2, 30).flatmap(
            lambda n: st.lists(
                st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3), min_size=n, max_size=n
            )
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_zero_mean_unit_std(self, rows):
        vecs = [PreferenceVector(str(i), tuple(r)) for i, r in enumerate(rows)]
        stats = fit_standardization(vecs)
        Z = np.array([standardize(v, stats).components for v in vecs])
        X = np.array(rows)
        for j in range(3):
            if stats.std_devs[j] == 0:
                assert np.all(Z[:, j] == 0)
            elif np.ptp(X[:, j]) > 1e-6 * max(1.0, np.abs(X[:, j]).max()):
                assert abs(Z[:, j].mean()) < 1e-9
                assert abs(Z[:, j].std(ddof=1) - 1) < 1e-9


def test_vector_rejects_non_finite():
    with pytest.raises(DataError):
        PreferenceVector("u", (1.0, math.inf))
    with pytest.raises(DimensionError):
        PreferenceVector("u", ())
