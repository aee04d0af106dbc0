"""Precision-driven tool recommendation.

Given a user query, a tool catalog, and historical (query, tool-bundle)
usage records, produce an exact recommended toolset in three stages:

1. bundle acquisition: retrieve the single most relevant historical bundle,
2. functional coverage mapping: decompose the query into functionalities,
   map bundle tools onto them, retain/discard, and surface unsolved problems,
3. multi-view re-ranking: add one tool per unsolved problem by aggregating
   direct-alignment, historical-correlation, and tool-expansion candidate
   lists by frequency.

Evaluation utilities compute TRACC, Recall@K, NDCG@K, and the average
length difference between recommended and ground-truth toolsets.
"""

from toolrec.domain import (
    History,
    HistoricalRecord,
    Provenance,
    Query,
    RecommendationResult,
    Tool,
    ToolCorpus,
    ToolSet,
    ValidationError,
)
from toolrec.pipeline import Pipeline, PipelineConfig, RunTrace, build_pipeline

__version__ = "0.1.0"

__all__ = [
    "History",
    "HistoricalRecord",
    "Pipeline",
    "PipelineConfig",
    "Provenance",
    "Query",
    "RecommendationResult",
    "RunTrace",
    "Tool",
    "ToolCorpus",
    "ToolSet",
    "ValidationError",
    "build_pipeline",
    "__version__",
]
