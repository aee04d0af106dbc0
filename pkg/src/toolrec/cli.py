"""Command-line surface.

Subcommands:

* ``validate``: check a catalog and dataset, reporting every violation;
* ``recommend``: run one query through the pipeline and print the result;
* ``evaluate``: split a dataset, recommend for the test side against the
  train-side history, and write metric reports plus a run manifest.

Exit codes: 0 success, 1 runtime failure, 2 input or validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from toolrec import __version__, dataset, metrics
from toolrec.domain import HistoricalRecord, History, Query, ValidationError
from toolrec.pipeline import (
    PipelineConfig,
    build_pipeline,
    load_config_file,
    make_config,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2

_CONFIG_ONLY_KEYS = ("test_fraction", "dataset_style")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--catalog", required=True, help="tool catalog JSON file")
    parser.add_argument("--dataset", required=True, help="dataset JSONL file")
    parser.add_argument("--config", help="pipeline config file (JSON or key=value)")
    parser.add_argument("--scorer", choices=["random", "bm25", "dense"])
    parser.add_argument("--mapper", choices=["remote", "mock"])
    parser.add_argument("--rules", help="rule file for the mock mapper")
    parser.add_argument("--embeddings", help="embedding table for the dense scorer")
    parser.add_argument("--seed", type=int, help="seed for all randomness in the run")
    parser.add_argument("--k-per-view", type=int, dest="k_per_view")
    parser.add_argument(
        "--ablation-no-bundle",
        action="store_true",
        help="disable bundle acquisition; the query maps directly to unsolved problems",
    )
    parser.add_argument(
        "--dataset-style",
        choices=sorted(dataset.DATASET_STYLES),
        help=f"tools-per-query bound to enforce (default {dataset.DEFAULT_STYLE})",
    )
    parser.add_argument("--out", help="output directory (default toolrec-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolrec",
        description="Precision-driven tool recommendation over a catalog and usage history.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a catalog and dataset")
    p_validate.add_argument("--catalog", required=True)
    p_validate.add_argument("--dataset", required=True)
    p_validate.add_argument(
        "--dataset-style", choices=sorted(dataset.DATASET_STYLES), default=None
    )

    p_recommend = sub.add_parser("recommend", help="recommend a toolset for one query")
    p_recommend.add_argument("--query", required=True, help="query text")
    _add_common_flags(p_recommend)

    p_evaluate = sub.add_parser("evaluate", help="run a split evaluation and write reports")
    p_evaluate.add_argument("--test-fraction", type=float, dest="test_fraction")
    p_evaluate.add_argument("--jobs", type=int, help="parallel batch workers")
    _add_common_flags(p_evaluate)

    return parser


def _resolve_config(args: argparse.Namespace) -> tuple[PipelineConfig, dict[str, Any]]:
    """Merge defaults, the config file, and explicit CLI flags (in that
    order of increasing precedence). Returns the pipeline config plus the
    evaluate-level settings."""
    values: dict[str, Any] = {}
    if args.config:
        values = load_config_file(args.config)
    extra = {key: values.pop(key) for key in _CONFIG_ONLY_KEYS if key in values}

    overrides = {
        "scorer": args.scorer,
        "mapper": args.mapper,
        "rules_path": args.rules,
        "embeddings_path": args.embeddings,
        "seed": args.seed,
        "k_per_view": args.k_per_view,
    }
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.ablation_no_bundle:
        values["enable_bundle_acquisition"] = False
    config = make_config(values)

    if getattr(args, "test_fraction", None) is not None:
        extra["test_fraction"] = args.test_fraction
    if args.dataset_style is not None:
        extra["dataset_style"] = args.dataset_style
    extra.setdefault("test_fraction", 0.2)
    extra.setdefault("dataset_style", dataset.DEFAULT_STYLE)
    return config, extra


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or "toolrec-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _file_stamp(path: str | Path) -> dict[str, str]:
    path = Path(path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    modified = datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc)
    return {
        "path": str(path),
        "sha256": digest,
        "modified": modified.isoformat(timespec="seconds"),
    }


def cmd_validate(args: argparse.Namespace) -> int:
    violations: list[str] = []
    corpus, catalog_violations = dataset.scan_catalog(args.catalog)
    violations.extend(catalog_violations)
    if corpus is not None:
        style = args.dataset_style or dataset.DEFAULT_STYLE
        _, dataset_violations = dataset.scan_dataset(args.dataset, corpus, style)
        violations.extend(dataset_violations)
    else:
        violations.append(f"{args.dataset}: skipped (catalog failed to load)")
    for violation in violations:
        print(violation)
    print(f"{len(violations)} violations")
    return EXIT_INVALID if violations else EXIT_OK


def cmd_recommend(args: argparse.Namespace) -> int:
    config, extra = _resolve_config(args)
    corpus = dataset.load_catalog(args.catalog)
    records = dataset.load_dataset(args.dataset, corpus, extra["dataset_style"])
    # the full dataset serves as history for single-query runs
    history = History(
        tuple(HistoricalRecord(query=r.query, bundle=r.tools) for r in records)
    )
    pipeline = build_pipeline(corpus, history, config)
    result, trace = pipeline.recommend(Query(args.query))

    print(f"recommended tools ({len(result.recommended)}):")
    for tool_id in result.ranked_order:
        print(f"  {tool_id}  {result.provenance[tool_id].value}")
    print("ranked order: " + ", ".join(result.ranked_order))
    if result.unsolved_remaining:
        print("unsolved problems remaining:")
        for text in result.unsolved_remaining:
            print(f"  {text}")
    out = _out_dir(args)
    trace_path = out / "trace.json"
    trace_path.write_text(trace.to_json() + "\n", encoding="utf-8")
    print(f"trace written to {trace_path}")
    return EXIT_OK


def _per_query_rows(report: metrics.EvaluationReport, items, grounds) -> list[str]:
    rows = []
    for item, ground, evaluation in zip(items, grounds, report.per_query):
        rows.append(
            json.dumps(
                {
                    "query": item.query.text,
                    "ground": list(ground),
                    "recommended": list(item.result.recommended) if item.result else [],
                    "ranked_order": list(item.result.ranked_order) if item.result else [],
                    "provenance": {
                        t: p.value for t, p in sorted(item.result.provenance.items())
                    }
                    if item.result
                    else {},
                    "tracc": evaluation.tracc,
                    "recall_at_k": evaluation.recall_at_k,
                    "ndcg_at_k": evaluation.ndcg_at_k,
                    "length_diff": evaluation.length_diff,
                    "k": evaluation.k,
                    "error": item.error,
                },
                sort_keys=True,
            )
        )
    return rows


def cmd_evaluate(args: argparse.Namespace) -> int:
    config, extra = _resolve_config(args)
    corpus = dataset.load_catalog(args.catalog)
    records = dataset.load_dataset(args.dataset, corpus, extra["dataset_style"])
    spec = dataset.SplitSpec(test_fraction=extra["test_fraction"], seed=config.seed)
    history, test_records = dataset.split(records, spec)

    pipeline = build_pipeline(corpus, history, config)
    items = pipeline.recommend_batch([r.query for r in test_records])
    grounds = [r.tools for r in test_records]
    report = metrics.evaluate(
        results=[item.result for item in items],
        grounds=grounds,
        metadata={"dataset_style": extra["dataset_style"]},
        errors=[item.error for item in items],
    )

    out = _out_dir(args)
    (out / "per_query.jsonl").write_text(
        "\n".join(_per_query_rows(report, items, grounds)) + "\n", encoding="utf-8"
    )
    (out / "report.txt").write_text(metrics.render_table(report) + "\n", encoding="utf-8")
    (out / "report.json").write_text(metrics.report_to_json(report) + "\n", encoding="utf-8")

    manifest = {
        "implementation": {"package": "toolrec", "version": __version__},
        "config": config.to_dict(),
        "inputs": {
            "catalog": _file_stamp(args.catalog),
            "dataset": _file_stamp(args.dataset),
            **(
                {"rules": _file_stamp(config.rules_path)}
                if config.rules_path
                else {}
            ),
        },
        "split": {
            "seed": config.seed,
            "test_fraction": extra["test_fraction"],
            "train_records": len(history),
            "test_records": len(test_records),
        },
        "dataset_style": extra["dataset_style"],
        "aggregates": {
            "recall_at_k": report.aggregate_recall,
            "ndcg_at_k": report.aggregate_ndcg,
            "tracc": report.aggregate_tracc,
            "avg_length_diff": report.aggregate_length_diff,
        },
        "failed_queries": sum(1 for item in items if item.error),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    print(metrics.render_table(report))
    print(f"reports written to {out}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "recommend": cmd_recommend,
        "evaluate": cmd_evaluate,
    }
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime failures map to exit code 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
