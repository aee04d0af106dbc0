import pytest
from hypothesis import given
from hypothesis import strategies as st

from toolrec.domain import (
    HistoricalRecord,
    History,
    Provenance,
    Query,
    RecommendationResult,
    Tool,
    ToolCorpus,
    ToolSet,
    ValidationError,
    toolset_intersection_size,
    toolset_union_size,
)


def test_tool_requires_id_and_description():
    with pytest.raises(ValidationError):
        Tool("", "Name", "desc")
    with pytest.raises(ValidationError):
        Tool("t1", "Name", "   ")


def test_corpus_rejects_duplicate_ids():
    tools = [Tool("t1", "A", "first"), Tool("t1", "B", "second")]
    with pytest.raises(ValidationError, match="t1"):
        ToolCorpus(tools)


def test_corpus_lookup_and_canonical_order():
    corpus = ToolCorpus([Tool("b", "B", "b tool"), Tool("a", "A", "a tool")])
    assert corpus.get("a").name == "A"
    assert corpus.position("b") == 0
    assert corpus.canonical_order({"a", "b"}) == ["b", "a"]
    with pytest.raises(ValidationError):
        corpus.get("missing")


def test_query_requires_text():
    with pytest.raises(ValidationError):
        Query("   ")


def test_toolset_set_algebra():
    assert toolset_union_size(ToolSet.of("t1", "t2"), ToolSet.of("t2", "t3")) == 3
    assert toolset_union_size(ToolSet(), ToolSet()) == 0
    assert toolset_union_size(ToolSet.of("t1"), ToolSet.of("t1")) == 1
    assert toolset_intersection_size(ToolSet.of("t1", "t2"), ToolSet.of("t2", "t3")) == 1
    assert toolset_intersection_size(ToolSet.of("t1"), ToolSet.of("t2")) == 0
    assert toolset_intersection_size(ToolSet.of("t1", "t2"), ToolSet.of("t1", "t2")) == 2


@given(
    st.frozensets(st.sampled_from("abcdefgh"), max_size=8),
    st.frozensets(st.sampled_from("abcdefgh"), max_size=8),
)
def test_inclusion_exclusion(a, b):
    sa, sb = ToolSet(a), ToolSet(b)
    assert toolset_union_size(sa, sb) + toolset_intersection_size(sa, sb) == len(sa) + len(sb)


def test_toolset_iterates_sorted():
    assert list(ToolSet.of("zebra", "apple", "mango")) == ["apple", "mango", "zebra"]


def test_toolset_validate_against_corpus(corpus):
    ToolSet.of("tool_email").validate_against(corpus)
    with pytest.raises(ValidationError, match="tool_ghost"):
        ToolSet.of("tool_email", "tool_ghost").validate_against(corpus)


def test_historical_record_rejects_empty_bundle():
    with pytest.raises(ValidationError):
        HistoricalRecord(Query("anything"), ToolSet())


def test_history_unique_bundles_dedup_keep_first(history):
    bundles = history.unique_bundles()
    assert len(bundles) == 3
    first_bundle, first_queries = bundles[0]
    assert first_bundle.members == frozenset({"tool_translate", "tool_email"})
    assert [q.text for q in first_queries] == [
        "translate this letter and email it",
        "translate my notes and email them to anna",
    ]


def test_history_validates_membership(corpus):
    bad = History((HistoricalRecord(Query("q"), ToolSet.of("tool_ghost")),))
    with pytest.raises(ValidationError, match="record 0"):
        bad.validate_against(corpus)


def test_recommendation_result_invariants():
    result = RecommendationResult(
        recommended=ToolSet.of("a", "b"),
        ranked_order=("b", "a"),
        provenance={"a": Provenance.BUNDLE_RETAINED, "b": Provenance.RERANKED_ADDITION},
    )
    assert result.ranked_order == ("b", "a")

    with pytest.raises(ValidationError):
        RecommendationResult(
            recommended=ToolSet.of("a", "b"),
            ranked_order=("a",),
            provenance={"a": Provenance.BUNDLE_RETAINED, "b": Provenance.BUNDLE_RETAINED},
        )
    with pytest.raises(ValidationError):
        RecommendationResult(
            recommended=ToolSet.of("a"),
            ranked_order=("a",),
            provenance={},
        )
