"""Shared domain types: tools, corpora, queries, toolsets, and usage history.

Everything here is immutable after construction and safe to share across
concurrent readers. Behavior is limited to construction, validation, and
set algebra; serialization lives in :mod:`toolrec.dataset`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

ToolId = str


class ValidationError(ValueError):
    """Input data violates a structural invariant."""


@dataclass(frozen=True)
class Tool:
    """A catalog entry: opaque id, short name, and the natural-language
    description that all matching is driven by."""

    id: ToolId
    name: str
    description: str

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise ValidationError("tool id must be a non-empty string")
        if not self.description.strip():
            raise ValidationError(f"tool {self.id!r} has an empty description")

    @property
    def document_text(self) -> str:
        """Text used when the tool is indexed as a retrievable document."""
        if self.name.strip():
            return f"{self.name}\n{self.description}"
        return self.description


class ToolCorpus:
    """Ordered collection of tools with unique ids.

    Insertion order is the canonical tool order used for deterministic
    tie-breaking throughout the pipeline.
    """

    def __init__(self, tools: Iterable[Tool]):
        self._tools = tuple(tools)
        positions: dict[ToolId, int] = {}
        for pos, tool in enumerate(self._tools):
            if tool.id in positions:
                raise ValidationError(f"duplicate tool id {tool.id!r}")
            positions[tool.id] = pos
        self._positions = positions

    def __len__(self) -> int:
        return len(self._tools)

    def __iter__(self) -> Iterator[Tool]:
        return iter(self._tools)

    def __contains__(self, tool_id: object) -> bool:
        return tool_id in self._positions

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ToolCorpus):
            return NotImplemented
        return self._tools == other._tools

    def __repr__(self) -> str:
        return f"ToolCorpus({len(self._tools)} tools)"

    @property
    def tools(self) -> tuple[Tool, ...]:
        return self._tools

    @property
    def ids(self) -> tuple[ToolId, ...]:
        return tuple(t.id for t in self._tools)

    def get(self, tool_id: ToolId) -> Tool:
        try:
            return self._tools[self._positions[tool_id]]
        except KeyError:
            raise ValidationError(f"unknown tool id {tool_id!r}") from None

    def position(self, tool_id: ToolId) -> int:
        """Dense index of the tool within the corpus; used for canonical order."""
        try:
            return self._positions[tool_id]
        except KeyError:
            raise ValidationError(f"unknown tool id {tool_id!r}") from None

    def canonical_order(self, tool_ids: Iterable[ToolId]) -> list[ToolId]:
        """Sort the given ids by corpus insertion order."""
        return sorted(tool_ids, key=self.position)


@dataclass(frozen=True)
class Query:
    """A natural-language request; non-empty after whitespace trimming."""

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValidationError("query text must be non-empty")


@dataclass(frozen=True)
class ToolSet:
    """Unordered set of tool ids.

    Iteration yields members in lexicographic order so that any derived
    output is reproducible across processes.
    """

    members: frozenset[ToolId] = frozenset()

    @classmethod
    def of(cls, *tool_ids: ToolId) -> "ToolSet":
        return cls(frozenset(tool_ids))

    @classmethod
    def from_ids(cls, tool_ids: Iterable[ToolId]) -> "ToolSet":
        return cls(frozenset(tool_ids))

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, tool_id: object) -> bool:
        return tool_id in self.members

    def __iter__(self) -> Iterator[ToolId]:
        return iter(sorted(self.members))

    def __bool__(self) -> bool:
        return bool(self.members)

    def union(self, other: "ToolSet") -> "ToolSet":
        return ToolSet(self.members | other.members)

    def intersection(self, other: "ToolSet") -> "ToolSet":
        return ToolSet(self.members & other.members)

    def difference(self, other: "ToolSet") -> "ToolSet":
        return ToolSet(self.members - other.members)

    def validate_against(self, corpus: ToolCorpus) -> None:
        unknown = sorted(m for m in self.members if m not in corpus)
        if unknown:
            raise ValidationError(f"tool ids not in corpus: {', '.join(unknown)}")


def toolset_union_size(a: ToolSet, b: ToolSet) -> int:
    return len(a.members | b.members)


def toolset_intersection_size(a: ToolSet, b: ToolSet) -> int:
    return len(a.members & b.members)


@dataclass(frozen=True)
class HistoricalRecord:
    """One past (query, tool bundle) usage pair."""

    query: Query
    bundle: ToolSet

    def __post_init__(self) -> None:
        if not self.bundle:
            raise ValidationError(f"historical record for {self.query.text!r} has an empty bundle")


@dataclass(frozen=True)
class History:
    """Ordered past usage records.

    Records keep their original order; two records may share a bundle. The
    unique-bundle view deduplicates by set equality, keeping first appearance.
    """

    records: tuple[HistoricalRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[HistoricalRecord]:
        return iter(self.records)

    def validate_against(self, corpus: ToolCorpus) -> None:
        for pos, record in enumerate(self.records):
            try:
                record.bundle.validate_against(corpus)
            except ValidationError as exc:
                raise ValidationError(f"history record {pos}: {exc}") from None

    def unique_bundles(self) -> list[tuple[ToolSet, tuple[Query, ...]]]:
        """Distinct bundles in first-appearance order, each with every
        historical query that used it (in record order)."""
        order: list[frozenset[ToolId]] = []
        queries: dict[frozenset[ToolId], list[Query]] = {}
        for record in self.records:
            key = record.bundle.members
            if key not in queries:
                order.append(key)
                queries[key] = []
            queries[key].append(record.query)
        return [(ToolSet(key), tuple(queries[key])) for key in order]


class Provenance(str, Enum):
    """How a recommended tool entered the final set."""

    BUNDLE_RETAINED = "bundle-retained"
    RERANKED_ADDITION = "reranked-addition"


@dataclass(frozen=True)
class RecommendationResult:
    """Final recommended toolset with a ranked order for @K metrics."""

    recommended: ToolSet
    ranked_order: tuple[ToolId, ...]
    provenance: dict[ToolId, Provenance] = field(default_factory=dict)
    unsolved_remaining: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ranked = self.ranked_order
        if len(ranked) != len(set(ranked)) or set(ranked) != self.recommended.members:
            raise ValidationError("ranked_order must be a permutation of the recommended set")
        if set(self.provenance) != self.recommended.members:
            raise ValidationError("every recommended tool needs exactly one provenance tag")
