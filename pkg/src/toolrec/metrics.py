"""Evaluation metrics: TRACC, Recall@K, NDCG@K, and average length difference.

TRACC jointly penalizes wrong membership and wrong cardinality:

    TRACC(A, B) = (1 - |n2 - n1| / |A u B|) * (|A n B| / n1)

where A is the non-empty ground-truth toolset (n1 = |A|) and B the
recommended toolset (n2 = |B|). The @K metrics use binary relevance and,
in the evaluation protocol, K equal to the ground-truth set size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from toolrec.domain import RecommendationResult, ToolId, ToolSet, ValidationError


def tracc(ground: ToolSet, recommended: ToolSet) -> float:
    """Set-precision score in [0, 1]; 1.0 iff the sets are equal."""
    n1 = len(ground)
    if n1 == 0:
        raise ValidationError("TRACC is undefined for an empty ground-truth toolset")
    n2 = len(recommended)
    union = len(ground.members | recommended.members)
    inter = len(ground.members & recommended.members)
    return (1.0 - abs(n2 - n1) / union) * (inter / n1)


def recall_at_k(ground: ToolSet, ranked: Sequence[ToolId], k: int) -> float:
    """Fraction of the ground truth captured in the top-k of the ranking."""
    if len(ground) == 0:
        raise ValidationError("recall@k is undefined for an empty ground-truth toolset")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    hits = len(set(ranked[:k]) & ground.members)
    return hits / len(ground)


def ndcg_at_k(ground: ToolSet, ranked: Sequence[ToolId], k: int) -> float:
    """Binary-gain NDCG with the log2(position + 1) discount."""
    if len(ground) == 0:
        raise ValidationError("ndcg@k is undefined for an empty ground-truth toolset")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    dcg = sum(
        1.0 / math.log2(position + 1)
        for position, tool_id in enumerate(ranked[:k], start=1)
        if tool_id in ground
    )
    ideal_hits = min(k, len(ground))
    idcg = sum(1.0 / math.log2(position + 1) for position in range(1, ideal_hits + 1))
    return dcg / idcg


def avg_length_diff(pairs: Sequence[tuple[ToolSet, ToolSet]]) -> float:
    """Mean absolute size difference over (ground, recommended) pairs."""
    if not pairs:
        raise ValidationError("average length difference needs at least one pair")
    return sum(abs(len(rec) - len(gnd)) for gnd, rec in pairs) / len(pairs)


@dataclass(frozen=True)
class QueryEvaluation:
    """Per-query metric values; k is the ground-truth set size."""

    tracc: float
    recall_at_k: float
    ndcg_at_k: float
    length_diff: int
    k: int
    error: str | None = None


@dataclass(frozen=True)
class EvaluationReport:
    per_query: tuple[QueryEvaluation, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def aggregate_tracc(self) -> float:
        return _mean([q.tracc for q in self.per_query])

    @property
    def aggregate_recall(self) -> float:
        return _mean([q.recall_at_k for q in self.per_query])

    @property
    def aggregate_ndcg(self) -> float:
        return _mean([q.ndcg_at_k for q in self.per_query])

    @property
    def aggregate_length_diff(self) -> float:
        return _mean([float(q.length_diff) for q in self.per_query])


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def evaluate(
    results: Sequence[RecommendationResult | None],
    grounds: Sequence[ToolSet],
    metadata: dict[str, str] | None = None,
    errors: Sequence[str | None] | None = None,
) -> EvaluationReport:
    """Score a batch of recommendations against aligned ground truths.

    K is set per query to the ground-truth size. A None result (a failed
    recommendation) scores as an empty recommendation and carries its error
    string through to the per-query row.
    """
    if len(results) != len(grounds):
        raise ValidationError(
            f"{len(results)} results do not align with {len(grounds)} ground truths"
        )
    if errors is not None and len(errors) != len(results):
        raise ValidationError("errors must align with results")
    rows: list[QueryEvaluation] = []
    for position, (result, ground) in enumerate(zip(results, grounds)):
        if len(ground) == 0:
            raise ValidationError(f"ground truth {position} is empty")
        k = len(ground)
        if result is None:
            recommended, ranked = ToolSet(), ()
        else:
            recommended, ranked = result.recommended, result.ranked_order
        rows.append(
            QueryEvaluation(
                tracc=tracc(ground, recommended),
                recall_at_k=recall_at_k(ground, ranked, k),
                ndcg_at_k=ndcg_at_k(ground, ranked, k),
                length_diff=abs(len(recommended) - len(ground)),
                k=k,
                error=errors[position] if errors is not None else None,
            )
        )
    return EvaluationReport(per_query=tuple(rows), metadata=dict(metadata or {}))


def render_table(report: EvaluationReport) -> str:
    """Aligned aggregate table in the Recall@K / NDCG@K / TRACC layout."""
    headers = ("Recall@K", "NDCG@K", "TRACC", "AvgLenDiff")
    values = (
        f"{report.aggregate_recall:.4f}",
        f"{report.aggregate_ndcg:.4f}",
        f"{report.aggregate_tracc:.4f}",
        f"{report.aggregate_length_diff:.4f}",
    )
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    lines = [head, "-" * len(head), row]
    if report.metadata:
        meta = ", ".join(f"{k}={v}" for k, v in sorted(report.metadata.items()))
        lines.append(f"({meta}, queries={len(report.per_query)})")
    return "\n".join(lines)


def report_to_json(report: EvaluationReport) -> str:
    payload = {
        "aggregates": {
            "recall_at_k": report.aggregate_recall,
            "ndcg_at_k": report.aggregate_ndcg,
            "tracc": report.aggregate_tracc,
            "avg_length_diff": report.aggregate_length_diff,
        },
        "per_query": [
            {
                "tracc": q.tracc,
                "recall_at_k": q.recall_at_k,
                "ndcg_at_k": q.ndcg_at_k,
                "length_diff": q.length_diff,
                "k": q.k,
                "error": q.error,
            }
            for q in report.per_query
        ],
        "metadata": report.metadata,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
