import pytest

from toolrec.adapters import MockRule, MockRuleTable, RuleBasedMapper
from toolrec.domain import (
    HistoricalRecord,
    History,
    Query,
    Tool,
    ToolCorpus,
    ToolSet,
)


@pytest.fixture
def corpus() -> ToolCorpus:
    return ToolCorpus(
        [
            Tool("tool_translate", "Translator", "Translate text between languages"),
            Tool("tool_email", "Mailer", "Send an email message to a recipient"),
            Tool("tool_weather", "Weather", "Get the weather forecast for a city"),
            Tool("tool_currency", "Currency", "Convert amounts between currencies"),
            Tool("tool_calendar", "Calendar", "Schedule an event on a calendar"),
        ]
    )


@pytest.fixture
def history(corpus) -> History:
    return History(
        (
            HistoricalRecord(
                Query("translate this letter and email it"),
                ToolSet.of("tool_translate", "tool_email"),
            ),
            HistoricalRecord(
                Query("translate my notes and email them to anna"),
                ToolSet.of("tool_translate", "tool_email"),
            ),
            HistoricalRecord(
                Query("what is the weather in Paris"),
                ToolSet.of("tool_weather"),
            ),
            HistoricalRecord(
                Query("convert 100 dollars to euros"),
                ToolSet.of("tool_currency"),
            ),
        )
    )


@pytest.fixture
def rule_table() -> MockRuleTable:
    return MockRuleTable(
        extract_rules=(
            MockRule("translate", "translate this text"),
            MockRule("email", "email it"),
            MockRule("weather", "check the weather"),
            MockRule("convert", "convert the currency"),
            MockRule("schedule", "schedule the event"),
        ),
        match_rules=(
            MockRule("translate", "tool_translate"),
            MockRule("email", "tool_email"),
            MockRule("weather", "tool_weather"),
            MockRule("currency", "tool_currency"),
            MockRule("schedule", "tool_calendar"),
        ),
        restate_rules=(
            MockRule("email", "email the translated text"),
            MockRule("weather", "look up the weather for the trip"),
        ),
    )


@pytest.fixture
def mock_mapper(rule_table) -> RuleBasedMapper:
    return RuleBasedMapper(rule_table)
