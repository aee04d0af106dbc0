import json

import pytest

from toolrec.dataset import (
    DatasetRecord,
    SplitSpec,
    load_catalog,
    load_dataset,
    save_catalog,
    save_dataset,
    scan_catalog,
    scan_dataset,
    split,
)
from toolrec.domain import Query, ToolSet, ValidationError


def write_catalog(path, entries):
    path.write_text(json.dumps({"tools": entries}), encoding="utf-8")


def write_dataset(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


CATALOG_ENTRIES = [
    {"id": f"t{i}", "name": f"Tool {i}", "description": f"does thing {i}"} for i in range(12)
]


@pytest.fixture
def catalog_path(tmp_path):
    path = tmp_path / "catalog.json"
    write_catalog(path, CATALOG_ENTRIES)
    return path


class TestCatalog:
    def test_load_small_catalog(self, catalog_path):
        corpus = load_catalog(catalog_path)
        assert len(corpus) == 12
        assert corpus.get("t3").name == "Tool 3"

    def test_duplicate_id_names_the_id(self, tmp_path):
        path = tmp_path / "catalog.json"
        write_catalog(
            path,
            [
                {"id": "dup", "name": "A", "description": "a"},
                {"id": "dup", "name": "B", "description": "b"},
            ],
        )
        with pytest.raises(ValidationError, match="dup"):
            load_catalog(path)

    def test_empty_catalog_rejected(self, tmp_path):
        path = tmp_path / "catalog.json"
        write_catalog(path, [])
        with pytest.raises(ValidationError, match="empty"):
            load_catalog(path)

    def test_parse_error_carries_locus(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text("{not json", encoding="utf-8")
        _, violations = scan_catalog(path)
        assert violations and "invalid JSON" in violations[0]

    def test_round_trip(self, catalog_path, tmp_path):
        corpus = load_catalog(catalog_path)
        out = tmp_path / "copy.json"
        save_catalog(corpus, out)
        again = load_catalog(out)
        assert again == corpus
        assert again.ids == corpus.ids  # member order preserved


class TestDataset:
    def test_load_and_validate(self, catalog_path, tmp_path):
        corpus = load_catalog(catalog_path)
        data = tmp_path / "data.jsonl"
        write_dataset(
            data,
            [
                {"query": "do thing one", "tools": ["t1"]},
                {"query": "both things", "tools": ["t1", "t2"]},
            ],
        )
        records = load_dataset(data, corpus)
        assert len(records) == 2
        assert records[1].tools.members == frozenset({"t1", "t2"})

    def test_metatool_style_enforces_exactly_two(self, catalog_path, tmp_path):
        corpus = load_catalog(catalog_path)
        data = tmp_path / "data.jsonl"
        write_dataset(data, [{"query": "two tools", "tools": ["t1", "t2"]}])
        assert len(load_dataset(data, corpus, style="metatool")) == 1

        write_dataset(data, [{"query": "three tools", "tools": ["t1", "t2", "t3"]}])
        with pytest.raises(ValidationError, match="2-2"):
            load_dataset(data, corpus, style="metatool")

    def test_rectools_style_caps_at_ten(self, catalog_path, tmp_path):
        corpus = load_catalog(catalog_path)
        data = tmp_path / "data.jsonl"
        write_dataset(
            data, [{"query": "too many", "tools": [f"t{i}" for i in range(11)]}]
        )
        with pytest.raises(ValidationError, match="1-10"):
            load_dataset(data, corpus, style="rectools")

    def test_unknown_tool_rejected(self, catalog_path, tmp_path):
        corpus = load_catalog(catalog_path)
        data = tmp_path / "data.jsonl"
        write_dataset(data, [{"query": "bad", "tools": ["ghost"]}])
        with pytest.raises(ValidationError, match="ghost"):
            load_dataset(data, corpus)

    def test_scan_collects_every_violation(self, catalog_path, tmp_path):
        corpus = load_catalog(catalog_path)
        data = tmp_path / "data.jsonl"
        write_dataset(
            data,
            [
                {"query": "ok", "tools": ["t1"]},
                {"query": "bad one", "tools": ["ghost"]},
                {"query": "", "tools": ["t2"]},
            ],
        )
        records, violations = scan_dataset(data, corpus)
        assert len(records) == 1
        assert len(violations) == 2

    def test_round_trip(self, catalog_path, tmp_path):
        corpus = load_catalog(catalog_path)
        records = [
            DatasetRecord(Query("first"), ToolSet.of("t1")),
            DatasetRecord(Query("second"), ToolSet.of("t2", "t3")),
        ]
        path = tmp_path / "data.jsonl"
        save_dataset(records, path)
        assert load_dataset(path, corpus) == records


def make_records(n):
    return [DatasetRecord(Query(f"query {i}"), ToolSet.of(f"t{i % 5}")) for i in range(n)]


class TestSplit:
    def test_deterministic_membership(self):
        records = make_records(10)
        spec = SplitSpec(test_fraction=0.2, seed=11)
        history_a, test_a = split(records, spec)
        history_b, test_b = split(records, spec)
        assert test_a == test_b
        assert history_a == history_b
        assert len(test_a) == 2
        assert len(history_a) == 8

    def test_partition_is_exact(self):
        records = make_records(10)
        history, test = split(records, SplitSpec(test_fraction=0.3, seed=5))
        train_queries = {r.query.text for r in history}
        test_queries = {r.query.text for r in test}
        assert train_queries | test_queries == {r.query.text for r in records}
        assert train_queries & test_queries == set()

    def test_half_split_of_four(self):
        history, test = split(make_records(4), SplitSpec(test_fraction=0.5, seed=0))
        assert len(history) == 2 and len(test) == 2

    def test_degenerate_fractions_rejected(self):
        with pytest.raises(ValidationError, match="empty test"):
            split(make_records(2), SplitSpec(test_fraction=0.2, seed=0))
        with pytest.raises(ValidationError):
            SplitSpec(test_fraction=1.0, seed=0)
        with pytest.raises(ValidationError):
            SplitSpec(test_fraction=0.0, seed=0)

    def test_train_side_becomes_history(self):
        records = make_records(5)
        history, test = split(records, SplitSpec(test_fraction=0.2, seed=3))
        test_texts = {r.query.text for r in test}
        for record in history:
            assert record.query.text not in test_texts
            assert record.bundle
