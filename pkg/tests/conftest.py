import json
from pathlib import Path

import numpy as np
import pytest

from recsys.preference import RatingRecord

ASPECTS = ["a1", "a2", "a3", "a4"]
BASE_A = np.array([5.0, 5.0, 1.0, 1.0])
BASE_B = np.array([1.0, 1.0, 5.0, 5.0])
ITEMS_A = [f"i{j}" for j in range(1, 6)]  # items group A likes
ITEMS_B = [f"i{j}" for j in range(6, 11)]  # items group B likes


def planted_clusters(seed=7, group_size=50, noise=0.3):
    """Two well-separated user groups with opposite tastes.

    Users ``a*`` sit near BASE_A on the aspects and rate ITEMS_A high and
    ITEMS_B low; ``b*`` users are the mirror image. Each user rates a random
    subset of 6 of the 10 catalogue items, except ``a00``, who rated only
    ITEMS_B, and ``full``, who rated every item.
    """
    rng = np.random.default_rng(seed)
    records = []
    groups = {}
    for tag, base, liked, disliked in (("a", BASE_A, ITEMS_A, ITEMS_B), ("b", BASE_B, ITEMS_B, ITEMS_A)):
        for u in range(group_size):
            user = f"{tag}{u:02d}"
            groups[user] = tag
            vec = base + rng.normal(0.0, noise, size=base.size)
            for aspect, value in zip(ASPECTS, vec):
                records.append(RatingRecord(user, aspect, float(np.round(value, 6))))
            catalogue = liked + disliked
            if user == "a00":
                chosen = list(ITEMS_B)
            else:
                chosen = sorted(rng.choice(catalogue, size=6, replace=False).tolist())
            for item in chosen:
                centre = 5.0 if item in liked else 1.0
                records.append(RatingRecord(user, item, float(np.round(centre + rng.normal(0, 0.3), 6))))
    for aspect, value in zip(ASPECTS, BASE_A):
        records.append(RatingRecord("full", aspect, float(value)))
    for item in ITEMS_A + ITEMS_B:
        records.append(RatingRecord("full", item, 3.0))
    groups["full"] = "a"
    return records, groups


def write_ratings(path: Path, records):
    lines = ["user_id,item_id,rating"] + [f"{r.user_id},{r.item_id},{r.rating!r}" for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_jsonl(path: Path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


LABELS = [
    {"object_id": "v1", "labels": ["cat", "pet", "Kitty"]},
    {"object_id": "v2", "labels": ["cat", "pet", "kitty"]},
    {"object_id": "v3", "labels": ["dog", "pet"]},
    {"object_id": "v4", "labels": ["car", "road"]},
    {"object_id": "v5", "labels": ["dog", "park", "ball"]},
]
SYNONYMS = {"kitty": "cat", "puppy": "dog"}


@pytest.fixture
def planted():
    return planted_clusters()


@pytest.fixture
def input_files(tmp_path, planted):
    records, _ = planted
    ratings = write_ratings(tmp_path / "ratings.csv", records)
    labels = write_jsonl(tmp_path / "labels.jsonl", LABELS)
    synonyms = tmp_path / "synonyms.json"
    synonyms.write_text(json.dumps(SYNONYMS), encoding="utf-8")
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"aspects": ASPECTS, "k": 10, "top_n": 3, "seed": 11}), encoding="utf-8")
    return {"ratings": ratings, "labels": labels, "synonyms": synonyms, "config": config}


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid and rep.when in ("call", "setup"):
                if outcome == "passed" and rep.when != "call":
                    continue
                rows.append((nodeid.split("::")[-1], outcome))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(rows):
        label = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{label}] {name.removeprefix('test_')}")
