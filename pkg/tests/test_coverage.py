import random

import pytest

from toolrec.coverage import (
    CompletenessScenario,
    CoverageMap,
    Functionality,
    assess_completeness,
    extract_functionalities,
    identify_unsolved,
    map_functional_coverage,
    match_tools,
)
from toolrec.domain import Query, ToolSet


class FailingMapper:
    """Mapper whose every stage returns nothing."""

    def extract(self, query):
        return []

    def match(self, functionalities, tools):
        return []

    def restate(self, query, unmet):
        return [None] * len(unmet)


class TestExtract:
    def test_two_intents(self, mock_mapper):
        out = extract_functionalities(Query("translate this text and email it"), mock_mapper)
        assert [f.text for f in out] == ["translate this text", "email it"]
        assert [f.index for f in out] == [0, 1]
        assert not any(f.undecomposed for f in out)

    def test_single_intent(self, mock_mapper):
        out = extract_functionalities(Query("what is the weather today"), mock_mapper)
        assert [f.text for f in out] == ["check the weather"]

    def test_fallback_is_the_whole_query(self):
        query = Query("do something nobody has rules for")
        out = extract_functionalities(query, FailingMapper())
        assert len(out) == 1
        assert out[0].text == query.text
        assert out[0].undecomposed


class TestMatch:
    def test_partial_match_leaves_gaps(self, corpus, mock_mapper):
        functionalities = [
            Functionality(0, "translate this text"),
            Functionality(1, "email it"),
        ]
        bundle = ToolSet.of("tool_translate", "tool_weather")
        cmap = match_tools(functionalities, bundle, corpus, mock_mapper)
        # the email tool is not in the bundle, so that assignment is dropped
        assert cmap.assignments == ((0, "tool_translate"),)
        assert any("tool_email" in w for w in cmap.warnings)

    def test_exact_cover(self, corpus, mock_mapper):
        functionalities = [
            Functionality(0, "translate this text"),
            Functionality(1, "email it"),
        ]
        bundle = ToolSet.of("tool_translate", "tool_email")
        cmap = match_tools(functionalities, bundle, corpus, mock_mapper)
        assert cmap.assignments == ((0, "tool_translate"), (1, "tool_email"))
        assert cmap.warnings == ()

    def test_empty_bundle_empty_relation(self, corpus, mock_mapper):
        cmap = match_tools([Functionality(0, "email it")], ToolSet(), corpus, mock_mapper)
        assert cmap.assignments == ()


class TestAssess:
    def test_exact_solving(self):
        fs = [Functionality(0, "a"), Functionality(1, "b")]
        cmap = CoverageMap(assignments=((0, "ta"), (1, "tb")))
        out = assess_completeness(fs, cmap, ToolSet.of("ta", "tb"))
        assert out.scenario is CompletenessScenario.EXACT_SOLVING
        assert not out.discarded and not out.unsolved

    def test_oversolving_discards_idle_tool(self):
        fs = [Functionality(0, "a")]
        cmap = CoverageMap(assignments=((0, "ta"),))
        out = assess_completeness(fs, cmap, ToolSet.of("ta", "tb"))
        assert out.scenario is CompletenessScenario.OVERSOLVING
        assert out.discarded.members == {"tb"}
        assert out.retained.members == {"ta"}

    def test_partial_solving(self):
        fs = [Functionality(0, "f1"), Functionality(1, "f2")]
        cmap = CoverageMap(assignments=((0, "a"),))
        out = assess_completeness(fs, cmap, ToolSet.of("a", "b"))
        assert out.scenario is CompletenessScenario.PARTIAL_SOLVING
        assert out.retained.members == {"a"}
        assert out.discarded.members == {"b"}
        assert [p.text for p in out.unsolved] == ["f2"]

    def test_trichotomy_and_partition_on_random_instances(self):
        rng = random.Random(20240817)
        universe = [f"t{i}" for i in range(8)]
        for _ in range(1000):
            n_f = rng.randint(1, 5)
            fs = [Functionality(i, f"req {i}") for i in range(n_f)]
            bundle = ToolSet.from_ids(rng.sample(universe, rng.randint(0, 6)))
            pairs = []
            for f in fs:
                for tool in bundle:
                    if rng.random() < 0.4:
                        pairs.append((f.index, tool))
            out = assess_completeness(fs, CoverageMap(assignments=tuple(pairs)), bundle)
            assert out.retained.union(out.discarded).members == bundle.members
            assert not (out.retained.members & out.discarded.members)
            flags = [
                out.scenario is CompletenessScenario.EXACT_SOLVING,
                out.scenario is CompletenessScenario.OVERSOLVING,
                out.scenario is CompletenessScenario.PARTIAL_SOLVING,
            ]
            assert sum(flags) == 1
            unassigned = n_f - len({i for i, _ in pairs})
            assert len(out.unsolved) == unassigned
            assert bool(out.unsolved) == (
                out.scenario is CompletenessScenario.PARTIAL_SOLVING
            )


class TestIdentifyUnsolved:
    def test_restatement_keeps_query_context(self, mock_mapper):
        query = Query("translate this text and email it")
        unmet = [Functionality(1, "email it")]
        out = identify_unsolved(query, unmet, mock_mapper)
        assert [p.text for p in out] == ["email the translated text"]

    def test_mapper_failure_falls_back_verbatim(self):
        unmet = [Functionality(1, "email it")]
        out = identify_unsolved(Query("q"), unmet, FailingMapper())
        assert [p.text for p in out] == ["email it"]

    def test_order_preserved_for_two_unmet(self, mock_mapper):
        unmet = [Functionality(0, "check the weather"), Functionality(1, "email it")]
        out = identify_unsolved(Query("q"), unmet, mock_mapper)
        assert [p.text for p in out] == [
            "look up the weather for the trip",
            "email the translated text",
        ]

    def test_requires_unmet(self, mock_mapper):
        with pytest.raises(ValueError):
            identify_unsolved(Query("q"), [], mock_mapper)


class TestWholeStage:
    def test_pure_function_of_inputs(self, corpus, mock_mapper):
        query = Query("translate this text and email it")
        bundle = ToolSet.of("tool_translate", "tool_weather")
        first = map_functional_coverage(query, bundle, corpus, mock_mapper)
        second = map_functional_coverage(query, bundle, corpus, mock_mapper)
        assert first == second
        assert first.scenario is CompletenessScenario.PARTIAL_SOLVING
        assert [p.text for p in first.unsolved] == ["email the translated text"]

    def test_undecomposed_query_flows_through(self, corpus):
        out = map_functional_coverage(
            Query("mystery request"), ToolSet.of("tool_email"), corpus, FailingMapper()
        )
        assert out.scenario is CompletenessScenario.PARTIAL_SOLVING
        assert out.functionalities[0].undecomposed
        assert [p.text for p in out.unsolved] == ["mystery request"]
