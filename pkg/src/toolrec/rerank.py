"""Multi-view re-ranking (stage 3).

For each unsolved problem, build three candidate lists and aggregate them
by frequency:

* DSA (direct semantic alignment): tools most similar to the problem text;
* HQC (historical query correlation): tools from the bundles of the most
  similar past queries, deduplicated keeping first occurrence;
* CTE (contextual tool expansion): tools most similar to the top DSA
  tool's description.

The most frequent tool across the concatenated lists wins; frequency ties
break by first occurrence in the dsa + hqc + cte concatenation, which
privileges direct alignment. One tool at most is added per problem, and a
tool already recommended is ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from toolrec.coverage import UnsolvedProblem
from toolrec.domain import History, ToolCorpus, ToolId, ToolSet, ValidationError
from toolrec.similarity import Document, SimilarityScorer, select_k


@dataclass(frozen=True)
class RerankConfig:
    """Per-view top-K and optional per-view scorer kind overrides."""

    k_per_view: int = 5
    dsa_scorer: str | None = None
    hqc_scorer: str | None = None
    cte_scorer: str | None = None

    def __post_init__(self) -> None:
        if self.k_per_view < 1:
            raise ValidationError(f"k_per_view must be >= 1, got {self.k_per_view}")


@dataclass(frozen=True)
class ViewLists:
    """The three candidate lists for one unsolved problem."""

    dsa: tuple[ToolId, ...]
    hqc: tuple[ToolId, ...]
    cte: tuple[ToolId, ...]

    def __post_init__(self) -> None:
        if len(self.hqc) != len(set(self.hqc)):
            raise ValidationError("hqc list must be duplicate-free")

    def concatenated(self) -> tuple[ToolId, ...]:
        return self.dsa + self.hqc + self.cte


@dataclass(frozen=True)
class FrequencyRanking:
    """(tool, occurrence count) pairs, counts non-increasing."""

    entries: tuple[tuple[ToolId, int], ...]


class ProblemDisposition(str, Enum):
    ADDED = "added"
    COVERED_BY_EXISTING = "covered-by-existing"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class ProblemRerank:
    """Trace of stage 3 for a single problem."""

    problem: UnsolvedProblem
    views: ViewLists
    selection: ToolId | None
    disposition: ProblemDisposition


@dataclass(frozen=True)
class RerankOutcome:
    additions: tuple[ToolId, ...]
    still_unsolved: tuple[UnsolvedProblem, ...]
    steps: tuple[ProblemRerank, ...]


class RerankContext:
    """Shared read-only state for stage 3: the corpus and history plus their
    scorer indexes. Build once, use for every problem."""

    def __init__(
        self,
        corpus: ToolCorpus,
        history: History,
        dsa_scorer: SimilarityScorer | None,
        hqc_scorer: SimilarityScorer | None,
        cte_scorer: SimilarityScorer | None,
    ):
        self.corpus = corpus
        self.history = history
        self.dsa_index = dsa_scorer
        self.cte_index = cte_scorer
        self.hqc_index = hqc_scorer
        if len(corpus):
            tool_docs = [Document(t.id, t.document_text) for t in corpus]
            if self.dsa_index is not None:
                self.dsa_index.index(tool_docs)
            if self.cte_index is not None:
                self.cte_index.index(tool_docs)
        else:
            self.dsa_index = None
            self.cte_index = None
        if len(history) and self.hqc_index is not None:
            self.hqc_index.index(
                [Document(f"record-{i:05d}", r.query.text) for i, r in enumerate(history)]
            )
        else:
            self.hqc_index = None


def build_dsa(
    problem: UnsolvedProblem, context: RerankContext, config: RerankConfig
) -> list[ToolId]:
    """Top-K tools by similarity between the problem and tool descriptions."""
    if context.dsa_index is None:
        return []
    return select_k(context.dsa_index.score(problem.text), config.k_per_view)


def build_hqc(
    problem: UnsolvedProblem, context: RerankContext, config: RerankConfig
) -> list[ToolId]:
    """Tools of the top-K most similar past queries, expanded in
    (query rank, canonical bundle member) order, deduplicated keep-first."""
    if context.hqc_index is None:
        return []
    top_records = select_k(context.hqc_index.score(problem.text), config.k_per_view)
    expanded: list[ToolId] = []
    seen: set[ToolId] = set()
    for record_key in top_records:
        record = context.history.records[int(record_key.split("-")[1])]
        for tool_id in context.corpus.canonical_order(record.bundle.members):
            if tool_id not in seen:
                seen.add(tool_id)
                expanded.append(tool_id)
    return expanded


def build_cte(
    dsa: list[ToolId], context: RerankContext, config: RerankConfig
) -> list[ToolId]:
    """Top-K tools most similar to the primary (top DSA) tool's description.

    Empty when DSA is empty; the primary tool itself may appear."""
    if not dsa or context.cte_index is None:
        return []
    primary = context.corpus.get(dsa[0])
    return select_k(context.cte_index.score(primary.description), config.k_per_view)


def rank_by_frequency(views: ViewLists) -> FrequencyRanking:
    combined = views.concatenated()
    counts: dict[ToolId, int] = {}
    first_seen: dict[ToolId, int] = {}
    for pos, tool_id in enumerate(combined):
        counts[tool_id] = counts.get(tool_id, 0) + 1
        first_seen.setdefault(tool_id, pos)
    ordered = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return FrequencyRanking(tuple((t, counts[t]) for t in ordered))


def aggregate_and_select(views: ViewLists) -> ToolId | None:
    """The most frequent tool across the three lists, ties broken by first
    occurrence in the concatenation; None when all views are empty."""
    ranking = rank_by_frequency(views)
    if not ranking.entries:
        return None
    return ranking.entries[0][0]


def build_views(
    problem: UnsolvedProblem, context: RerankContext, config: RerankConfig
) -> ViewLists:
    dsa = build_dsa(problem, context, config)
    hqc = build_hqc(problem, context, config)
    cte = build_cte(dsa, context, config)
    assert len(dsa) <= config.k_per_view and len(cte) <= config.k_per_view
    return ViewLists(dsa=tuple(dsa), hqc=tuple(hqc), cte=tuple(cte))


def rerank_for_problems(
    problems: list[UnsolvedProblem],
    current: ToolSet,
    context: RerankContext,
    config: RerankConfig,
) -> RerankOutcome:
    """Select at most one additional tool per problem, in problem order.

    A selection already in the current set or among prior additions is
    ignored (the problem counts as covered by an existing tool); a problem
    whose views are all empty stays unsolved.
    """
    additions: list[ToolId] = []
    still_unsolved: list[UnsolvedProblem] = []
    steps: list[ProblemRerank] = []
    have = set(current.members)
    for problem in problems:
        views = build_views(problem, context, config)
        selection = aggregate_and_select(views)
        if selection is None:
            disposition = ProblemDisposition.UNRESOLVED
            still_unsolved.append(problem)
        elif selection in have:
            disposition = ProblemDisposition.COVERED_BY_EXISTING
        else:
            disposition = ProblemDisposition.ADDED
            additions.append(selection)
            have.add(selection)
        steps.append(ProblemRerank(problem, views, selection, disposition))
    return RerankOutcome(
        additions=tuple(additions),
        still_unsolved=tuple(still_unsolved),
        steps=tuple(steps),
    )
