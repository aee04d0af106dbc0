"""Catalog and dataset loading, validation, and train/test splitting.

On-disk formats:

* catalog: one JSON document, ``{"tools": [{"id", "name", "description"}, ...]}``
* dataset: line-delimited JSON, one record per line,
  ``{"query": "...", "tools": ["id", ...]}``

Dataset styles bound the ground-truth bundle size per record: ``toollens``
allows 1-3 tools, ``metatool`` exactly 2, ``rectools`` 1-10, and ``free``
any positive count.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from toolrec.domain import (
    HistoricalRecord,
    History,
    Query,
    Tool,
    ToolCorpus,
    ToolSet,
    ValidationError,
)

DATASET_STYLES: dict[str, tuple[int, int | None]] = {
    "toollens": (1, 3),
    "metatool": (2, 2),
    "rectools": (1, 10),
    "free": (1, None),
}

DEFAULT_STYLE = "rectools"


@dataclass(frozen=True)
class DatasetRecord:
    """One (query, ground-truth toolset) pair."""

    query: Query
    tools: ToolSet


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/test split taking ``floor(test_fraction * N)`` test records."""

    test_fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError(
                f"test fraction must be in (0, 1), got {self.test_fraction}"
            )


def scan_catalog(path: str | Path) -> tuple[ToolCorpus | None, list[str]]:
    """Parse a catalog file, collecting every violation instead of stopping
    at the first. Returns (corpus, violations); corpus is None if any."""
    path = Path(path)
    violations: list[str] = []
    if not path.exists():
        return None, [f"{path}: no such file"]
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        return None, [f"{path}:{exc.lineno}: invalid JSON: {exc.msg}"]
    entries = payload.get("tools") if isinstance(payload, dict) else None
    if not isinstance(entries, list):
        return None, [f"{path}: expected an object with a 'tools' list"]
    if not entries:
        return None, [f"{path}: catalog is empty"]
    tools: list[Tool] = []
    seen: set[str] = set()
    for pos, entry in enumerate(entries):
        locus = f"{path}: tool record {pos}"
        if not isinstance(entry, dict):
            violations.append(f"{locus}: expected an object")
            continue
        try:
            tool = Tool(
                id=str(entry.get("id", "")),
                name=str(entry.get("name", "")),
                description=str(entry.get("description", "")),
            )
        except ValidationError as exc:
            violations.append(f"{locus}: {exc}")
            continue
        if tool.id in seen:
            violations.append(f"{locus}: duplicate tool id {tool.id!r}")
            continue
        seen.add(tool.id)
        tools.append(tool)
    if violations:
        return None, violations
    return ToolCorpus(tools), []


def load_catalog(path: str | Path) -> ToolCorpus:
    corpus, violations = scan_catalog(path)
    if corpus is None:
        raise ValidationError("; ".join(violations))
    return corpus


def save_catalog(corpus: ToolCorpus, path: str | Path) -> None:
    payload = {
        "tools": [
            {"id": t.id, "name": t.name, "description": t.description} for t in corpus
        ]
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _check_record(
    entry: object, catalog: ToolCorpus, bounds: tuple[int, int | None], locus: str
) -> tuple[DatasetRecord | None, list[str]]:
    if not isinstance(entry, dict):
        return None, [f"{locus}: expected an object"]
    problems: list[str] = []
    query_text = entry.get("query")
    if not isinstance(query_text, str) or not query_text.strip():
        problems.append(f"{locus}: 'query' must be a non-empty string")
    tool_ids = entry.get("tools")
    if not isinstance(tool_ids, list) or not all(isinstance(t, str) for t in tool_ids):
        problems.append(f"{locus}: 'tools' must be a list of tool ids")
        return None, problems
    unknown = sorted(t for t in tool_ids if t not in catalog)
    if unknown:
        problems.append(f"{locus}: unknown tool ids: {', '.join(unknown)}")
    low, high = bounds
    count = len(set(tool_ids))
    if count < low or (high is not None and count > high):
        bound_text = f"{low}-{high}" if high is not None else f">={low}"
        problems.append(
            f"{locus}: {count} tools violates the {bound_text} tools-per-query bound"
        )
    if problems:
        return None, problems
    return DatasetRecord(Query(query_text), ToolSet.from_ids(tool_ids)), []


def scan_dataset(
    path: str | Path, catalog: ToolCorpus, style: str = DEFAULT_STYLE
) -> tuple[list[DatasetRecord], list[str]]:
    """Parse a dataset file, collecting every violation."""
    path = Path(path)
    if style not in DATASET_STYLES:
        raise ValidationError(
            f"unknown dataset style {style!r}; expected one of {sorted(DATASET_STYLES)}"
        )
    if not path.exists():
        return [], [f"{path}: no such file"]
    bounds = DATASET_STYLES[style]
    records: list[DatasetRecord] = []
    violations: list[str] = []
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        locus = f"{path}:{lineno}"
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            violations.append(f"{locus}: invalid JSON: {exc.msg}")
            continue
        record, problems = _check_record(entry, catalog, bounds, locus)
        violations.extend(problems)
        if record is not None:
            records.append(record)
    if not records and not violations:
        violations.append(f"{path}: dataset is empty")
    return records, violations


def load_dataset(
    path: str | Path, catalog: ToolCorpus, style: str = DEFAULT_STYLE
) -> list[DatasetRecord]:
    records, violations = scan_dataset(path, catalog, style)
    if violations:
        raise ValidationError("; ".join(violations))
    return records


def save_dataset(records: list[DatasetRecord], path: str | Path) -> None:
    lines = [
        json.dumps({"query": r.query.text, "tools": list(r.tools)}, sort_keys=True)
        for r in records
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split(
    records: list[DatasetRecord], spec: SplitSpec
) -> tuple[History, list[DatasetRecord]]:
    """Seeded split into (train as History, test records).

    The test side gets ``floor(test_fraction * N)`` records chosen by a
    seeded shuffle; both sides keep original record order. Each train
    record's ground truth becomes its historical bundle.
    """
    n = len(records)
    n_test = math.floor(spec.test_fraction * n)
    if n_test == 0:
        raise ValidationError(
            f"test fraction {spec.test_fraction} of {n} records yields an empty test set"
        )
    if n_test == n:
        raise ValidationError(
            f"test fraction {spec.test_fraction} of {n} records yields an empty train set"
        )
    indices = list(range(n))
    random.Random(spec.seed).shuffle(indices)
    test_indices = set(indices[:n_test])
    train = [records[i] for i in range(n) if i not in test_indices]
    test = [records[i] for i in range(n) if i in test_indices]
    history = History(
        tuple(HistoricalRecord(query=r.query, bundle=r.tools) for r in train)
    )
    return history, test
