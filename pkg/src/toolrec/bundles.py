"""Tool bundle acquisition (stage 1).

Retrieve the single historical tool bundle most relevant to a query. Each
unique bundle becomes one retrievable document; the composite text is
configurable to carry the source query texts, the member tool texts, or
both (the default), so the representation itself can be ablated.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

from toolrec.domain import History, Query, ToolCorpus, ToolSet, ValidationError
from toolrec.similarity import (
    Document,
    SimilarityScorer,
    make_scorer,
    select_k,
)


class BundleRepresentation(str, Enum):
    QUERY_ONLY = "query-only"
    TOOLS_ONLY = "tools-only"
    QUERY_PLUS_TOOLS = "query-plus-tools"


@dataclass(frozen=True)
class AcquisitionConfig:
    """Stage-1 settings; ``scorer`` is bm25, dense, or random (the baseline
    that picks a uniformly random bundle)."""

    representation: BundleRepresentation = BundleRepresentation.QUERY_PLUS_TOOLS
    scorer: str = "bm25"
    random_seed: int | None = None

    def __post_init__(self) -> None:
        if self.scorer not in ("bm25", "dense", "random"):
            raise ValidationError(f"unknown acquisition scorer {self.scorer!r}")


@dataclass(frozen=True)
class BundleDocument:
    """Retrievable representation of one unique historical bundle."""

    key: str
    bundle: ToolSet
    source_queries: tuple[Query, ...]
    text: str


@dataclass(frozen=True)
class AcquiredBundle:
    """Stage-1 outcome: the chosen bundle plus retrieval metadata."""

    bundle: ToolSet
    source_key: str
    low_confidence: bool = False


class BundleIndex:
    """Immutable index over the unique bundles of a history."""

    def __init__(
        self,
        documents: tuple[BundleDocument, ...],
        scorer: SimilarityScorer | None,
        config: AcquisitionConfig,
    ):
        self.documents = documents
        self._by_key = {doc.key: doc for doc in documents}
        self._scorer = scorer
        self.config = config

    def document(self, key: str) -> BundleDocument:
        return self._by_key[key]

    def score_documents(self, query: Query):
        if self._scorer is None:
            raise ValidationError("random acquisition has no similarity scorer")
        return self._scorer.score(query.text)


def _composite_text(
    bundle: ToolSet,
    source_queries: tuple[Query, ...],
    corpus: ToolCorpus,
    representation: BundleRepresentation,
) -> str:
    query_block = "\n".join(q.text for q in source_queries)
    tool_block = "\n".join(
        corpus.get(tool_id).document_text
        for tool_id in corpus.canonical_order(bundle.members)
    )
    if representation is BundleRepresentation.QUERY_ONLY:
        return query_block
    if representation is BundleRepresentation.TOOLS_ONLY:
        return tool_block
    return f"{query_block}\n{tool_block}"


def build_bundle_index(
    history: History,
    corpus: ToolCorpus,
    config: AcquisitionConfig,
    scorer: SimilarityScorer | None = None,
) -> BundleIndex:
    """Index one document per unique historical bundle.

    Bundles deduplicate by set equality, first appearance winning, so a
    tie in retrieval scores resolves to the bundle whose first source
    record appears earliest in history. An empty history is a cold start
    and is rejected; run with bundle acquisition disabled instead.
    """
    if not len(history):
        raise ValidationError(
            "history is empty (cold start); disable bundle acquisition for this run"
        )
    history.validate_against(corpus)
    documents = []
    for pos, (bundle, queries) in enumerate(history.unique_bundles()):
        documents.append(
            BundleDocument(
                key=f"bundle-{pos:04d}",
                bundle=bundle,
                source_queries=queries,
                text=_composite_text(bundle, queries, corpus, config.representation),
            )
        )
    if config.scorer == "random":
        return BundleIndex(tuple(documents), None, config)
    if scorer is None:
        scorer = make_scorer(config.scorer)
    scorer.index([Document(doc.key, doc.text) for doc in documents])
    return BundleIndex(tuple(documents), scorer, config)


def _stable_choice(seed: int, query_text: str, n: int) -> int:
    digest = hashlib.sha256(f"{seed}:{query_text}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % n


def acquire_bundle(query: Query, index: BundleIndex) -> AcquiredBundle:
    """Pick exactly one historical bundle for the query.

    The top-1 document by the configured scorer wins; an all-zero sparse
    score vector still returns the tie-break winner but flags the result
    low-confidence. The random baseline picks a bundle uniformly,
    reproducibly for a fixed (seed, query) pair.
    """
    if index.config.scorer == "random":
        seed = index.config.random_seed or 0
        chosen = index.documents[_stable_choice(seed, query.text, len(index.documents))]
        return AcquiredBundle(bundle=chosen.bundle, source_key=chosen.key)
    scored = index.score_documents(query)
    top = select_k(scored, 1)
    chosen = index.document(top[0])
    low_confidence = index.config.scorer == "bm25" and all(c.score == 0.0 for c in scored)
    return AcquiredBundle(
        bundle=chosen.bundle, source_key=chosen.key, low_confidence=low_confidence
    )
