"""Coverage-mapper implementations and the line grammar they speak.

Two mappers satisfy :class:`toolrec.coverage.CoverageMapper`:

* :class:`RuleBasedMapper`, a deterministic mock driven by a rule table,
  for tests and offline evaluation;
* :class:`RemoteMapper`, which prompts a chat-completion endpoint and
  parses its replies strictly, with one re-ask on a parse failure before
  falling back.

Structured record grammar (bit-exact):

* functionality line: ``<index>. <text>``
* assignment line: ``<functionality index> -> <tool id>``
* problem line: ``<index>. <text>``
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from toolrec.coverage import Functionality
from toolrec.domain import Query, Tool, ToolId, ValidationError

# --- structured line records -------------------------------------------------

SCHEMA_FUNCTIONALITIES = "functionalities"
SCHEMA_ASSIGNMENTS = "assignments"
SCHEMA_PROBLEMS = "problems"

_NUMBERED_LINE = re.compile(r"^(\d+)\. (.+)$")
_ASSIGNMENT_LINE = re.compile(r"^(\d+) -> (\S+)$")


class StructuredParseError(ValueError):
    """A response line does not match the expected record grammar."""

    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno


def parse_structured(text: str, schema: str) -> list[str] | list[tuple[int, str]]:
    """Strictly parse numbered/arrow line records.

    Returns texts in line order for the functionality and problem schemas,
    and (1-based functionality index, tool id) pairs for assignments. Blank
    lines are allowed; anything else must match the grammar exactly.
    """
    if schema in (SCHEMA_FUNCTIONALITIES, SCHEMA_PROBLEMS):
        pattern, describe = _NUMBERED_LINE, "'<index>. <text>'"
    elif schema == SCHEMA_ASSIGNMENTS:
        pattern, describe = _ASSIGNMENT_LINE, "'<index> -> <tool id>'"
    else:
        raise ValueError(f"unknown schema {schema!r}")
    out: list = []
    # split on newlines only; splitlines() would also break on form feeds
    # and similar control characters inside record texts
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        match = pattern.match(line)
        if match is None:
            raise StructuredParseError(lineno, f"expected {describe}, got {line!r}")
        if schema == SCHEMA_ASSIGNMENTS:
            out.append((int(match.group(1)), match.group(2)))
        else:
            out.append(match.group(2))
    return out


def render_structured(items: Sequence, schema: str) -> str:
    """Inverse of :func:`parse_structured` for well-formed records."""
    if schema in (SCHEMA_FUNCTIONALITIES, SCHEMA_PROBLEMS):
        return "\n".join(f"{i}. {text}" for i, text in enumerate(items, start=1))
    if schema == SCHEMA_ASSIGNMENTS:
        return "\n".join(f"{index} -> {tool_id}" for index, tool_id in items)
    raise ValueError(f"unknown schema {schema!r}")


# --- rule-based mock ----------------------------------------------------------

@dataclass(frozen=True)
class MockRule:
    """Case-insensitive substring pattern mapped to a fixed output."""

    pattern: str
    output: str

    def matches(self, text: str) -> bool:
        return self.pattern.lower() in text.lower()


@dataclass(frozen=True)
class MockRuleTable:
    """Deterministic stand-in for the language model.

    Rule file grammar, line oriented: section headers ``[extract]``,
    ``[match]``, ``[restate]``; rules ``pattern => output``; blank lines and
    ``#`` comments ignored. Extraction and matching fire every rule whose
    pattern occurs in the probed text, in file order; restatement uses the
    first matching rule.
    """

    extract_rules: tuple[MockRule, ...] = ()
    match_rules: tuple[MockRule, ...] = ()
    restate_rules: tuple[MockRule, ...] = ()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockRuleTable":
        sections: dict[str, list[MockRule]] = {"extract": [], "match": [], "restate": []}
        current: list[MockRule] | None = None
        path = Path(path)
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1]
                if name not in sections:
                    raise ValidationError(f"{path}:{lineno}: unknown section {name!r}")
                current = sections[name]
                continue
            if current is None:
                raise ValidationError(f"{path}:{lineno}: rule outside of any section")
            pattern, sep, output = line.partition(" => ")
            if not sep or not pattern.strip() or not output.strip():
                raise ValidationError(f"{path}:{lineno}: expected 'pattern => output'")
            current.append(MockRule(pattern.strip(), output.strip()))
        return cls(
            extract_rules=tuple(sections["extract"]),
            match_rules=tuple(sections["match"]),
            restate_rules=tuple(sections["restate"]),
        )


def apply_rules(text: str, rules: Sequence[MockRule]) -> list[str]:
    """Every matching rule fires, in rule order."""
    return [rule.output for rule in rules if rule.matches(text)]


def first_match(text: str, rules: Sequence[MockRule]) -> str | None:
    for rule in rules:
        if rule.matches(text):
            return rule.output
    return None


class RuleBasedMapper:
    """CoverageMapper backed by a :class:`MockRuleTable`.

    A pure function of (input, table): identical inputs give identical
    outputs across processes. No rule matching means an empty output, which
    engages the caller's documented fallback.
    """

    def __init__(self, table: MockRuleTable):
        self.table = table

    def extract(self, query: Query) -> list[str]:
        return apply_rules(query.text, self.table.extract_rules)

    def match(
        self, functionalities: Sequence[Functionality], tools: Sequence[Tool]
    ) -> list[tuple[int, ToolId]]:
        del tools  # the rule table already names tool ids
        out: list[tuple[int, ToolId]] = []
        for functionality in functionalities:
            for tool_id in apply_rules(functionality.text, self.table.match_rules):
                out.append((functionality.index, tool_id))
        return out

    def restate(
        self, query: Query, unmet: Sequence[Functionality]
    ) -> list[str | None]:
        del query
        return [first_match(f.text, self.table.restate_rules) for f in unmet]


# --- prompt templates ---------------------------------------------------------

_REQUIRED_PLACEHOLDERS = {
    "extract": ("query",),
    "match": ("functionalities", "tool_catalog"),
    "restate": ("query", "functionalities"),
}


@dataclass(frozen=True)
class PromptTemplate:
    """Template with named placeholders {query}, {functionalities}, {tool_catalog}."""

    name: str
    text: str

    def __post_init__(self) -> None:
        if self.name not in _REQUIRED_PLACEHOLDERS:
            raise ValidationError(f"unknown template name {self.name!r}")
        for placeholder in _REQUIRED_PLACEHOLDERS[self.name]:
            if "{" + placeholder + "}" not in self.text:
                raise ValidationError(
                    f"template {self.name!r} is missing the {{{placeholder}}} placeholder"
                )

    def render(self, **fields: str) -> str:
        return self.text.format(**fields)


DEFAULT_TEMPLATES: dict[str, PromptTemplate] = {
    "extract": PromptTemplate(
        "extract",
        "Decompose the user query into discrete, actionable functionalities.\n"
        "Capture explicit and implicit requirements. Reply with one line per\n"
        "functionality, formatted exactly as '<index>. <text>' starting at 1,\n"
        "and nothing else.\n\nQuery: {query}",
    ),
    "match": PromptTemplate(
        "match",
        "Associate each functionality below with the most suitable tools from\n"
        "the catalog, judged by the tool descriptions. A tool may serve several\n"
        "functionalities. Reply with one line per assignment, formatted exactly\n"
        "as '<functionality index> -> <tool id>', and nothing else. Emit no\n"
        "line for a functionality no tool can serve.\n\n"
        "Functionalities:\n{functionalities}\n\nTool catalog:\n{tool_catalog}",
    ),
    "restate": PromptTemplate(
        "restate",
        "The functionalities below are unmet parts of the user query. Restate\n"
        "each as a standalone problem that keeps the context of the original\n"
        "query, without decomposing further. Reply with one line per problem,\n"
        "formatted exactly as '<index>. <text>' starting at 1, matching the\n"
        "input order, and nothing else.\n\n"
        "Query: {query}\n\nUnmet functionalities:\n{functionalities}",
    ),
}


def load_templates(path: str | Path) -> dict[str, PromptTemplate]:
    """Load template overrides from a JSON object {name: template text}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    templates = dict(DEFAULT_TEMPLATES)
    for name, text in payload.items():
        templates[name] = PromptTemplate(name, text)
    return templates


# --- remote chat endpoint -----------------------------------------------------

ENV_API_BASE = "TOOLREC_API_BASE"
ENV_API_KEY = "TOOLREC_API_KEY"
ENV_MODEL = "TOOLREC_MODEL"
DEFAULT_MODEL = "gpt-4o-mini"


class TransportError(RuntimeError):
    """The chat endpoint could not be reached or replied unusably."""


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValidationError("chat prompts must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValidationError(f"temperature must be in [0, 1], got {self.temperature}")
        if self.max_tokens < 1:
            raise ValidationError(f"max_tokens must be positive, got {self.max_tokens}")


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach the chat-completion endpoint."""

    base_url: str
    api_key: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    backoff_seconds: float = 0.5
    max_in_flight: int = 4

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        base_url = os.environ.get(ENV_API_BASE, "").strip()
        if not base_url:
            raise TransportError(
                f"remote mapper needs the {ENV_API_BASE} environment variable"
            )
        return cls(
            base_url=base_url,
            api_key=os.environ.get(ENV_API_KEY, ""),
            **overrides,
        )


class ChatClient:
    """Minimal chat-completions client with bounded retries.

    Transport failures and 5xx statuses are retried with exponential
    backoff up to the configured limit; other non-success statuses are
    surfaced immediately with a body excerpt. Token usage reported by the
    endpoint is accumulated for run metadata.
    """

    def __init__(self, config: EndpointConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(config.max_in_flight)
        self._usage_lock = threading.Lock()
        self._usage = {"requests": 0, "prompt_tokens": 0, "completion_tokens": 0}

    @property
    def usage(self) -> dict[str, int]:
        with self._usage_lock:
            return dict(self._usage)

    def complete(self, request: ChatRequest) -> str:
        body = {
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        attempts = self.config.max_retries + 1
        last_failure = ""
        with self._gate:
            for attempt in range(attempts):
                if attempt:
                    time.sleep(self.config.backoff_seconds * 2 ** (attempt - 1))
                try:
                    response = self._session.post(
                        url, json=body, headers=headers, timeout=self.config.timeout
                    )
                except requests.RequestException as exc:
                    last_failure = f"transport failure: {exc}"
                    continue
                if response.status_code >= 500:
                    last_failure = f"status {response.status_code}: {response.text[:200]}"
                    continue
                if response.status_code != 200:
                    raise TransportError(
                        f"endpoint returned status {response.status_code}: {response.text[:200]}"
                    )
                return self._extract_content(response)
        raise TransportError(f"giving up after {attempts} attempts; last: {last_failure}")

    def _extract_content(self, response: requests.Response) -> str:
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError):
            raise TransportError(
                f"endpoint reply is not a chat completion: {response.text[:200]}"
            ) from None
        usage = payload.get("usage") or {}
        with self._usage_lock:
            self._usage["requests"] += 1
            self._usage["prompt_tokens"] += int(usage.get("prompt_tokens", 0))
            self._usage["completion_tokens"] += int(usage.get("completion_tokens", 0))
        return str(content)


_SYSTEM_PROMPT = (
    "You analyze user queries against a catalog of external tools. "
    "Follow the output format instructions exactly."
)


class RemoteMapper:
    """CoverageMapper that prompts a chat endpoint.

    Replies are parsed strictly against the line grammar; a parse failure
    triggers exactly one re-ask, after which the stage falls back (empty
    output). Assignments naming tools outside the offered catalog are
    dropped here; the coverage stage guards again.
    """

    def __init__(
        self,
        client: ChatClient,
        model_name: str = DEFAULT_MODEL,
        templates: dict[str, PromptTemplate] | None = None,
        temperature: float = 0.0,
        max_tokens: int = 1024,
    ):
        self.client = client
        self.model_name = model_name
        self.templates = templates or DEFAULT_TEMPLATES
        self.temperature = temperature
        self.max_tokens = max_tokens

    def _ask(self, user_prompt: str, schema: str) -> list:
        request = ChatRequest(
            model_name=self.model_name,
            system_prompt=_SYSTEM_PROMPT,
            user_prompt=user_prompt,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )
        for _ in range(2):  # one re-ask on parse failure
            try:
                return parse_structured(self.client.complete(request), schema)
            except StructuredParseError:
                continue
        return []

    def extract(self, query: Query) -> list[str]:
        prompt = self.templates["extract"].render(query=query.text)
        return self._ask(prompt, SCHEMA_FUNCTIONALITIES)

    def match(
        self, functionalities: Sequence[Functionality], tools: Sequence[Tool]
    ) -> list[tuple[int, ToolId]]:
        if not functionalities or not tools:
            return []
        listing = render_structured([f.text for f in functionalities], SCHEMA_FUNCTIONALITIES)
        catalog = "\n".join(f"{t.id}: {t.name}. {t.description}" for t in tools)
        prompt = self.templates["match"].render(functionalities=listing, tool_catalog=catalog)
        offered = {t.id for t in tools}
        by_position = {i + 1: f.index for i, f in enumerate(functionalities)}
        out: list[tuple[int, ToolId]] = []
        for position, tool_id in self._ask(prompt, SCHEMA_ASSIGNMENTS):
            if position in by_position and tool_id in offered:
                out.append((by_position[position], tool_id))
        return out

    def restate(
        self, query: Query, unmet: Sequence[Functionality]
    ) -> list[str | None]:
        if not unmet:
            return []
        listing = render_structured([f.text for f in unmet], SCHEMA_FUNCTIONALITIES)
        prompt = self.templates["restate"].render(query=query.text, functionalities=listing)
        texts = self._ask(prompt, SCHEMA_PROBLEMS)
        if len(texts) != len(unmet):
            return [None] * len(unmet)
        return list(texts)
