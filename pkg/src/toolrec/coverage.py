"""Functional coverage mapping (stage 2).

Decompose a query into actionable functionalities, map tools from the
acquired bundle onto them, classify completeness into one of three
scenarios, retain/discard tools, and emit unsolved problems for stage 3.

The scenario classification is computed mechanically from the coverage
relation, never asked of a language model: exact solving means every
functionality is assigned and every bundle tool is used; oversolving means
full coverage with idle tools; partial solving means at least one
functionality is unmet.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Protocol, Sequence

from toolrec.domain import Query, Tool, ToolCorpus, ToolId, ToolSet


@dataclass(frozen=True)
class Functionality:
    """One discrete, actionable requirement extracted from a query."""

    index: int
    text: str
    undecomposed: bool = False

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("functionality text must be non-empty")


@dataclass(frozen=True)
class UnsolvedProblem:
    """An unmet functionality restated in the context of the original query."""

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("unsolved problem text must be non-empty")


@dataclass(frozen=True)
class CoverageMap:
    """Many-to-many relation between functionalities (by index) and tools."""

    assignments: tuple[tuple[int, ToolId], ...] = ()
    warnings: tuple[str, ...] = ()

    def assigned_indices(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.assignments)

    def assigned_tools(self) -> frozenset[ToolId]:
        return frozenset(t for _, t in self.assignments)


class CompletenessScenario(str, Enum):
    EXACT_SOLVING = "exact-solving"
    OVERSOLVING = "oversolving"
    PARTIAL_SOLVING = "partial-solving"


@dataclass(frozen=True)
class CoverageAssessment:
    """Outcome of stage 2 for one (query, bundle) pair."""

    functionalities: tuple[Functionality, ...]
    coverage: CoverageMap
    scenario: CompletenessScenario
    retained: ToolSet
    discarded: ToolSet
    unsolved: tuple[UnsolvedProblem, ...]

    def __post_init__(self) -> None:
        if self.retained.members & self.discarded.members:
            raise ValueError("retained and discarded toolsets must be disjoint")
        has_unsolved = bool(self.unsolved)
        if has_unsolved != (self.scenario is CompletenessScenario.PARTIAL_SOLVING):
            raise ValueError("unsolved problems are non-empty iff the scenario is partial solving")

    @property
    def bundle(self) -> ToolSet:
        return self.retained.union(self.discarded)

    @property
    def unmet(self) -> tuple[Functionality, ...]:
        assigned = self.coverage.assigned_indices()
        return tuple(f for f in self.functionalities if f.index not in assigned)


class CoverageMapper(Protocol):
    """Natural-language steps of stage 2, LLM-backed or rule-based.

    Implementations are total: they always return, possibly empty lists.
    ``restate`` returns one entry per unmet functionality, using None where
    no restatement is available.
    """

    def extract(self, query: Query) -> list[str]: ...

    def match(
        self, functionalities: Sequence[Functionality], tools: Sequence[Tool]
    ) -> list[tuple[int, ToolId]]: ...

    def restate(
        self, query: Query, unmet: Sequence[Functionality]
    ) -> list[str | None]: ...


def extract_functionalities(query: Query, mapper: CoverageMapper) -> list[Functionality]:
    """Decompose the query into functionalities, preserving mapper order.

    An empty mapper result falls back to a single undecomposed
    functionality spanning the whole query.
    """
    texts = [t for t in mapper.extract(query) if t.strip()]
    if not texts:
        return [Functionality(index=0, text=query.text, undecomposed=True)]
    return [Functionality(index=i, text=t) for i, t in enumerate(texts)]


def match_tools(
    functionalities: Sequence[Functionality],
    bundle: ToolSet,
    corpus: ToolCorpus,
    mapper: CoverageMapper,
) -> CoverageMap:
    """Map each functionality to suitable bundle tools.

    Assignments naming tools outside the bundle, or unknown functionality
    indices, are dropped with a validation warning.
    """
    bundle.validate_against(corpus)
    tools = [corpus.get(tid) for tid in corpus.canonical_order(bundle.members)]
    valid_indices = {f.index for f in functionalities}
    kept: list[tuple[int, ToolId]] = []
    warnings: list[str] = []
    seen: set[tuple[int, ToolId]] = set()
    for index, tool_id in mapper.match(functionalities, tools):
        if index not in valid_indices:
            warnings.append(f"dropped assignment to unknown functionality index {index}")
            continue
        if tool_id not in bundle:
            warnings.append(f"dropped assignment to tool {tool_id!r} outside the bundle")
            continue
        if (index, tool_id) in seen:
            continue
        seen.add((index, tool_id))
        kept.append((index, tool_id))
    return CoverageMap(assignments=tuple(kept), warnings=tuple(warnings))


def assess_completeness(
    functionalities: Sequence[Functionality],
    coverage: CoverageMap,
    bundle: ToolSet,
) -> CoverageAssessment:
    """Classify the bundle against the functionalities and partition it.

    Retained tools are exactly those appearing in the coverage relation;
    everything else in the bundle is discarded. Unsolved problems are the
    unmet functionality texts verbatim; ``identify_unsolved`` upgrades them
    to query-context restatements.
    """
    assigned = coverage.assigned_indices()
    unmet = [f for f in functionalities if f.index not in assigned]
    retained = ToolSet(coverage.assigned_tools())
    discarded = bundle.difference(retained)
    if unmet:
        scenario = CompletenessScenario.PARTIAL_SOLVING
    elif discarded:
        scenario = CompletenessScenario.OVERSOLVING
    else:
        scenario = CompletenessScenario.EXACT_SOLVING
    return CoverageAssessment(
        functionalities=tuple(functionalities),
        coverage=coverage,
        scenario=scenario,
        retained=retained,
        discarded=discarded,
        unsolved=tuple(UnsolvedProblem(f.text) for f in unmet),
    )


def identify_unsolved(
    query: Query, unmet: Sequence[Functionality], mapper: CoverageMapper
) -> list[UnsolvedProblem]:
    """Restate each unmet functionality as a standalone sub-query.

    A mapper result that is misaligned with the unmet list counts as a
    mapper failure; the fallback is the unmet functionality text verbatim,
    per entry.
    """
    if not unmet:
        raise ValueError("identify_unsolved requires at least one unmet functionality")
    restated = mapper.restate(query, unmet)
    if len(restated) != len(unmet):
        restated = [None] * len(unmet)
    problems: list[UnsolvedProblem] = []
    for functionality, text in zip(unmet, restated):
        if text is None or not text.strip():
            problems.append(UnsolvedProblem(functionality.text))
        else:
            problems.append(UnsolvedProblem(text))
    return problems


def map_functional_coverage(
    query: Query, bundle: ToolSet, corpus: ToolCorpus, mapper: CoverageMapper
) -> CoverageAssessment:
    """Run all four stage-2 steps for one query and bundle."""
    functionalities = extract_functionalities(query, mapper)
    coverage = match_tools(functionalities, bundle, corpus, mapper)
    assessment = assess_completeness(functionalities, coverage, bundle)
    if assessment.scenario is CompletenessScenario.PARTIAL_SOLVING:
        problems = identify_unsolved(query, assessment.unmet, mapper)
        assessment = replace(assessment, unsolved=tuple(problems))
    return assessment
