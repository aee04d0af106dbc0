"""Three-stage recommendation pipeline.

``recommend`` runs bundle acquisition, functional coverage mapping, and
multi-view re-ranking, returning the recommended toolset together with a
run trace. Disabling bundle acquisition reproduces the ablation mode in
which the whole query maps to unsolved problems and every recommended tool
is a re-ranked addition.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from toolrec import adapters
from toolrec.adapters import ChatClient, EndpointConfig, MockRuleTable, RuleBasedMapper, RemoteMapper
from toolrec.bundles import (
    AcquiredBundle,
    AcquisitionConfig,
    BundleIndex,
    BundleRepresentation,
    acquire_bundle,
    build_bundle_index,
)
from toolrec.coverage import (
    CompletenessScenario,
    CoverageAssessment,
    CoverageMapper,
    UnsolvedProblem,
    extract_functionalities,
    map_functional_coverage,
)
from toolrec.domain import (
    History,
    Provenance,
    Query,
    RecommendationResult,
    ToolCorpus,
    ToolId,
    ToolSet,
    ValidationError,
)
from toolrec.rerank import (
    RerankConfig,
    RerankContext,
    RerankOutcome,
    rerank_for_problems,
)
from toolrec.similarity import EmbeddingTable, make_scorer


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of a run; serializable for the run manifest."""

    enable_bundle_acquisition: bool = True
    scorer: str = "bm25"
    representation: str = BundleRepresentation.QUERY_PLUS_TOOLS.value
    mapper: str = "mock"
    seed: int = 0
    k_per_view: int = 5
    jobs: int = 1
    rules_path: str | None = None
    embeddings_path: str | None = None
    templates_path: str | None = None
    model: str | None = None
    temperature: float = 0.0
    max_tokens: int = 1024
    dsa_scorer: str | None = None
    hqc_scorer: str | None = None
    cte_scorer: str | None = None

    def __post_init__(self) -> None:
        if self.scorer not in ("bm25", "dense", "random"):
            raise ValidationError(f"unknown scorer {self.scorer!r}")
        if self.mapper not in ("mock", "remote"):
            raise ValidationError(f"unknown mapper {self.mapper!r}")
        if self.jobs < 1:
            raise ValidationError(f"jobs must be >= 1, got {self.jobs}")
        BundleRepresentation(self.representation)

    def view_scorer_kind(self, override: str | None) -> str:
        # random is an acquisition baseline, not a similarity measure
        kind = override or self.scorer
        return "bm25" if kind == "random" else kind

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a config file: JSON when it starts with '{', flat key=value
    lines otherwise. Relative paths resolve against the file's directory."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    values: dict[str, Any]
    if text.lstrip().startswith("{"):
        values = json.loads(text)
    else:
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip()] = _coerce(value.strip())
    for key in ("rules_path", "embeddings_path", "templates_path"):
        if values.get(key):
            values[key] = str((path.parent / values[key]).resolve())
    return values


def _coerce(value: str) -> Any:
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def make_config(values: dict[str, Any]) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return PipelineConfig(**values)


@dataclass(frozen=True)
class RunTrace:
    """Observability record for one recommendation; append-only during a run
    and exportable as JSON."""

    query: str
    bundle_acquisition_enabled: bool
    acquired_bundle: tuple[ToolId, ...] | None
    bundle_source_key: str | None
    low_confidence: bool
    functionalities: tuple[str, ...]
    scenario: str | None
    assignments: tuple[tuple[int, ToolId], ...]
    coverage_warnings: tuple[str, ...]
    retained: tuple[ToolId, ...]
    discarded: tuple[ToolId, ...]
    problems: tuple[str, ...]
    rerank_steps: tuple[dict[str, Any], ...]
    additions: tuple[ToolId, ...]
    still_unsolved: tuple[str, ...]
    timings: dict[str, float]
    mapper_usage: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "query": self.query,
            "bundle_acquisition_enabled": self.bundle_acquisition_enabled,
            "acquired_bundle": list(self.acquired_bundle) if self.acquired_bundle is not None else None,
            "bundle_source_key": self.bundle_source_key,
            "low_confidence": self.low_confidence,
            "functionalities": list(self.functionalities),
            "scenario": self.scenario,
            "assignments": [list(a) for a in self.assignments],
            "coverage_warnings": list(self.coverage_warnings),
            "retained": list(self.retained),
            "discarded": list(self.discarded),
            "problems": list(self.problems),
            "rerank_steps": list(self.rerank_steps),
            "additions": list(self.additions),
            "still_unsolved": list(self.still_unsolved),
            "timings": self.timings,
            "mapper_usage": self.mapper_usage,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass
class BatchItem:
    query: Query
    result: RecommendationResult | None
    trace: RunTrace | None
    error: str | None


class Pipeline:
    """A configured recommender over one (corpus, history) pair.

    Indexes are built once at construction and shared read-only; with the
    rule-based mapper, ``recommend`` is a pure function of its inputs.
    """

    def __init__(
        self,
        corpus: ToolCorpus,
        history: History,
        config: PipelineConfig,
        mapper: CoverageMapper,
        embeddings: EmbeddingTable | None = None,
    ):
        if not len(corpus):
            raise ValidationError("tool corpus is empty")
        if config.enable_bundle_acquisition and not len(history):
            raise ValidationError(
                "history is empty; run with bundle acquisition disabled (ablation mode)"
            )
        history.validate_against(corpus)
        self.corpus = corpus
        self.history = history
        self.config = config
        self.mapper = mapper
        self._embeddings = embeddings

        self.bundle_index: BundleIndex | None = None
        if config.enable_bundle_acquisition:
            acquisition = AcquisitionConfig(
                representation=BundleRepresentation(config.representation),
                scorer=config.scorer,
                random_seed=config.seed,
            )
            acquisition_scorer = (
                None
                if config.scorer == "random"
                else make_scorer(config.scorer, self._embeddings)
            )
            self.bundle_index = build_bundle_index(
                history, corpus, acquisition, scorer=acquisition_scorer
            )

        self.rerank_config = RerankConfig(
            k_per_view=config.k_per_view,
            dsa_scorer=config.dsa_scorer,
            hqc_scorer=config.hqc_scorer,
            cte_scorer=config.cte_scorer,
        )
        self.context = RerankContext(
            corpus,
            history,
            dsa_scorer=self._view_scorer(config.dsa_scorer),
            hqc_scorer=self._view_scorer(config.hqc_scorer),
            cte_scorer=self._view_scorer(config.cte_scorer),
        )

    def _view_scorer(self, override: str | None):
        kind = self.config.view_scorer_kind(override)
        return make_scorer(kind, self._embeddings)

    def recommend(self, query: Query) -> tuple[RecommendationResult, RunTrace]:
        timings: dict[str, float] = {}
        acquired: AcquiredBundle | None = None
        assessment: CoverageAssessment | None = None

        if self.config.enable_bundle_acquisition:
            assert self.bundle_index is not None
            started = time.perf_counter()
            acquired = acquire_bundle(query, self.bundle_index)
            timings["bundle_acquisition"] = time.perf_counter() - started

            started = time.perf_counter()
            assessment = map_functional_coverage(
                query, acquired.bundle, self.corpus, self.mapper
            )
            timings["coverage_mapping"] = time.perf_counter() - started
            retained = assessment.retained
            problems = list(assessment.unsolved)
            functionality_texts = tuple(f.text for f in assessment.functionalities)
        else:
            # ablation: the whole query maps to unsolved problems
            started = time.perf_counter()
            functionalities = extract_functionalities(query, self.mapper)
            timings["coverage_mapping"] = time.perf_counter() - started
            retained = ToolSet()
            problems = [UnsolvedProblem(f.text) for f in functionalities]
            functionality_texts = tuple(f.text for f in functionalities)

        started = time.perf_counter()
        outcome = rerank_for_problems(problems, retained, self.context, self.rerank_config)
        timings["rerank"] = time.perf_counter() - started

        recommended = retained.union(ToolSet.from_ids(outcome.additions))
        provenance = {tool_id: Provenance.BUNDLE_RETAINED for tool_id in retained}
        provenance.update(
            {tool_id: Provenance.RERANKED_ADDITION for tool_id in outcome.additions}
        )
        ranked_order = self._ranked_order(query, retained, outcome)
        result = RecommendationResult(
            recommended=recommended,
            ranked_order=ranked_order,
            provenance=provenance,
            unsolved_remaining=tuple(p.text for p in outcome.still_unsolved),
        )
        trace = self._build_trace(
            query, acquired, assessment, functionality_texts, problems, outcome, timings
        )
        return result, trace

    def _ranked_order(
        self, query: Query, retained: ToolSet, outcome: RerankOutcome
    ) -> tuple[ToolId, ...]:
        """Retained tools by descending query similarity, then additions in
        problem order. Retained tools carry the stronger evidence."""
        ranked_retained: list[ToolId] = []
        if retained:
            assert self.context.dsa_index is not None
            scores = {c.key: c.score for c in self.context.dsa_index.score(query.text)}
            ranked_retained = sorted(
                retained.members,
                key=lambda t: (-scores[t], self.corpus.position(t)),
            )
        return tuple(ranked_retained) + outcome.additions

    def _build_trace(
        self,
        query: Query,
        acquired: AcquiredBundle | None,
        assessment: CoverageAssessment | None,
        functionality_texts: tuple[str, ...],
        problems: list[UnsolvedProblem],
        outcome: RerankOutcome,
        timings: dict[str, float],
    ) -> RunTrace:
        steps = tuple(
            {
                "problem": step.problem.text,
                "dsa": list(step.views.dsa),
                "hqc": list(step.views.hqc),
                "cte": list(step.views.cte),
                "selection": step.selection,
                "disposition": step.disposition.value,
            }
            for step in outcome.steps
        )
        usage: dict[str, int] = {}
        client = getattr(self.mapper, "client", None)
        if isinstance(client, ChatClient):
            usage = client.usage
        return RunTrace(
            query=query.text,
            bundle_acquisition_enabled=self.config.enable_bundle_acquisition,
            acquired_bundle=tuple(acquired.bundle) if acquired else None,
            bundle_source_key=acquired.source_key if acquired else None,
            low_confidence=acquired.low_confidence if acquired else False,
            functionalities=functionality_texts,
            scenario=assessment.scenario.value if assessment else None,
            assignments=assessment.coverage.assignments if assessment else (),
            coverage_warnings=assessment.coverage.warnings if assessment else (),
            retained=tuple(assessment.retained) if assessment else (),
            discarded=tuple(assessment.discarded) if assessment else (),
            problems=tuple(p.text for p in problems),
            rerank_steps=steps,
            additions=outcome.additions,
            still_unsolved=tuple(p.text for p in outcome.still_unsolved),
            timings=timings,
            mapper_usage=usage,
        )

    def recommend_batch(
        self, queries: Sequence[Query], jobs: int | None = None
    ) -> list[BatchItem]:
        """Element-wise recommend; output order matches input order and
        per-query failures are recorded without aborting the batch."""
        workers = jobs if jobs is not None else self.config.jobs

        def run_one(query: Query) -> BatchItem:
            try:
                result, trace = self.recommend(query)
                return BatchItem(query=query, result=result, trace=trace, error=None)
            except Exception as exc:  # recorded per element
                return BatchItem(
                    query=query,
                    result=None,
                    trace=None,
                    error=f"{type(exc).__name__}: {exc}",
                )

        if workers == 1 or len(queries) <= 1:
            return [run_one(q) for q in queries]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_one, queries))


def build_mapper(config: PipelineConfig) -> CoverageMapper:
    if config.mapper == "mock":
        if not config.rules_path:
            raise ValidationError("the mock mapper needs a rule file (rules_path / --rules)")
        return RuleBasedMapper(MockRuleTable.from_file(config.rules_path))
    endpoint = EndpointConfig.from_env()
    templates = (
        adapters.load_templates(config.templates_path) if config.templates_path else None
    )
    model = config.model or os.environ.get(adapters.ENV_MODEL, "").strip() or adapters.DEFAULT_MODEL
    return RemoteMapper(
        ChatClient(endpoint),
        model_name=model,
        templates=templates,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
    )


def build_pipeline(
    corpus: ToolCorpus,
    history: History,
    config: PipelineConfig,
    mapper: CoverageMapper | None = None,
    embeddings: EmbeddingTable | None = None,
) -> Pipeline:
    """Resolve the mapper and embeddings from the config and assemble a
    ready-to-use pipeline."""
    if mapper is None:
        mapper = build_mapper(config)
    needs_dense = "dense" in (
        config.scorer,
        config.view_scorer_kind(config.dsa_scorer),
        config.view_scorer_kind(config.hqc_scorer),
        config.view_scorer_kind(config.cte_scorer),
    )
    if embeddings is None and needs_dense:
        if not config.embeddings_path:
            raise ValidationError(
                "the dense scorer needs an embedding table (embeddings_path / --embeddings)"
            )
        embeddings = EmbeddingTable.from_file(config.embeddings_path)
    return Pipeline(corpus, history, config, mapper=mapper, embeddings=embeddings)
