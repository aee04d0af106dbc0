"""Similarity scorers and top-k selection.

Two interchangeable scorer families share one contract: ``index(documents)``
once, then ``score(probe_text)`` returns one finite score per indexed
document, in insertion order, deterministically.

The sparse scorer is Okapi BM25 with k1=1.2, b=0.75, lowercase tokenization
on alphanumeric runs (no stemming, no stopwords), and the non-negative
smoothed IDF ``ln((N - n_t + 0.5) / (n_t + 0.5) + 1)``. The dense scorer is
cosine similarity over externally supplied embeddings.
"""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from toolrec.domain import ValidationError

_TOKEN = re.compile(r"[a-z0-9]+")

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    """Lowercase maximal alphanumeric runs."""
    return _TOKEN.findall(text.lower())


class UnmatchableProbeError(ValueError):
    """The probe text has no tokens, so no document can match it."""


class EmbeddingError(ValueError):
    """An embedding is missing, malformed, or unusable (zero norm)."""


@dataclass(frozen=True)
class Document:
    """Uniform carrier for anything scored: tool descriptions, bundle
    composites, historical queries."""

    key: str
    text: str


@dataclass(frozen=True)
class ScoredCandidate:
    key: str
    score: float


class SimilarityScorer(Protocol):
    def index(self, documents: Sequence[Document]) -> None: ...

    def score(self, probe_text: str) -> list[ScoredCandidate]: ...


def _check_documents(documents: Sequence[Document]) -> None:
    if not documents:
        raise ValidationError("cannot index an empty document collection")
    seen: set[str] = set()
    for doc in documents:
        if doc.key in seen:
            raise ValidationError(f"duplicate document key {doc.key!r}")
        seen.add(doc.key)


class Bm25Scorer:
    """Okapi BM25 over a fixed document collection."""

    def __init__(self, k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        self.k1 = k1
        self.b = b
        self._keys: tuple[str, ...] = ()
        self._term_freqs: list[Counter[str]] = []
        self._doc_lens: list[int] = []
        self._avgdl = 0.0
        self._idf: dict[str, float] = {}

    def index(self, documents: Sequence[Document]) -> None:
        _check_documents(documents)
        self._keys = tuple(d.key for d in documents)
        token_lists = [tokenize(d.text) for d in documents]
        self._term_freqs = [Counter(toks) for toks in token_lists]
        self._doc_lens = [len(toks) for toks in token_lists]
        self._avgdl = sum(self._doc_lens) / len(documents)
        n = len(documents)
        doc_freq: Counter[str] = Counter()
        for tf in self._term_freqs:
            doc_freq.update(tf.keys())
        self._idf = {
            term: math.log((n - nt + 0.5) / (nt + 0.5) + 1.0)
            for term, nt in doc_freq.items()
        }

    def score(self, probe_text: str) -> list[ScoredCandidate]:
        if not self._keys:
            raise ValidationError("scorer has no index; call index() first")
        probe_terms = tokenize(probe_text)
        if not probe_terms:
            raise UnmatchableProbeError(f"probe {probe_text!r} has no tokens")
        out: list[ScoredCandidate] = []
        for i, key in enumerate(self._keys):
            tf = self._term_freqs[i]
            norm = self.k1 * (1.0 - self.b + self.b * self._doc_lens[i] / self._avgdl)
            total = 0.0
            for term in probe_terms:
                freq = tf.get(term)
                if not freq:
                    continue
                total += self._idf[term] * freq * (self.k1 + 1.0) / (freq + norm)
            out.append(ScoredCandidate(key, total))
        return out


class EmbeddingTable:
    """Map from document key or probe text to a fixed-dimension vector.

    File format: first line ``dim <d>``, then one record per line,
    ``key<TAB>f1 f2 ... fd`` with decimal floats.
    """

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        if not vectors:
            raise EmbeddingError("embedding table is empty")
        table: dict[str, tuple[float, ...]] = {}
        dim: int | None = None
        for key, vec in vectors.items():
            v = tuple(float(x) for x in vec)
            if dim is None:
                dim = len(v)
            if len(v) != dim:
                raise EmbeddingError(
                    f"embedding for {key!r} has dimension {len(v)}, expected {dim}"
                )
            if any(not math.isfinite(x) for x in v):
                raise EmbeddingError(f"embedding for {key!r} has non-finite components")
            table[key] = v
        self._table = table
        self.dim = dim or 0

    def __contains__(self, key: object) -> bool:
        return key in self._table

    def lookup(self, key: str) -> tuple[float, ...]:
        try:
            return self._table[key]
        except KeyError:
            raise EmbeddingError(f"no embedding for {key!r}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "EmbeddingTable":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("dim "):
            raise EmbeddingError(f"{path}: first line must be 'dim <d>'")
        try:
            dim = int(lines[0][4:])
        except ValueError:
            raise EmbeddingError(f"{path}: malformed dimension header {lines[0]!r}") from None
        vectors: dict[str, list[float]] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            key, sep, rest = line.partition("\t")
            if not sep:
                raise EmbeddingError(f"{path}:{lineno}: expected '<key><TAB><floats>'")
            try:
                vec = [float(x) for x in rest.split()]
            except ValueError:
                raise EmbeddingError(f"{path}:{lineno}: malformed float") from None
            if len(vec) != dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: got {len(vec)} components, header says {dim}"
                )
            vectors[key] = vec
        return cls(vectors)

    def write_file(self, path: str | Path) -> None:
        lines = [f"dim {self.dim}"]
        for key in sorted(self._table):
            floats = " ".join(repr(x) for x in self._table[key])
            lines.append(f"{key}\t{floats}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cosine(a: Sequence[float], b: Sequence[float], a_name: str, b_name: str) -> float:
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(x * x for x in b))
    if norm_a == 0.0:
        raise EmbeddingError(f"zero-norm embedding for {a_name!r}")
    if norm_b == 0.0:
        raise EmbeddingError(f"zero-norm embedding for {b_name!r}")
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (norm_a * norm_b)


class DenseScorer:
    """Cosine similarity between a probe embedding and document embeddings.

    Document vectors are looked up by document key; the probe vector is
    looked up by the probe text itself. Missing entries are an error naming
    the missing key.
    """

    def __init__(self, table: EmbeddingTable):
        self._table = table
        self._keys: tuple[str, ...] = ()
        self._vectors: list[tuple[float, ...]] = []

    def index(self, documents: Sequence[Document]) -> None:
        _check_documents(documents)
        self._keys = tuple(d.key for d in documents)
        self._vectors = [self._table.lookup(d.key) for d in documents]

    def score(self, probe_text: str) -> list[ScoredCandidate]:
        if not self._keys:
            raise ValidationError("scorer has no index; call index() first")
        probe = self._table.lookup(probe_text)
        return [
            ScoredCandidate(key, _cosine(probe, vec, probe_text, key))
            for key, vec in zip(self._keys, self._vectors)
        ]


def select_k(candidates: Sequence[ScoredCandidate], k: int) -> list[str]:
    """Keys of the top-k candidates by descending score.

    Ties break by insertion order (earlier document first). An empty
    candidate list yields an empty result.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ranked = sorted(candidates, key=lambda c: -c.score)
    return [c.key for c in ranked[:k]]


def random_select(candidates: Sequence[str], k: int, seed: int) -> list[str]:
    """Sample up to k keys without replacement, reproducibly for a fixed seed.

    When k exceeds the candidate count, returns all candidates in shuffled
    order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pool = list(candidates)
    return random.Random(seed).sample(pool, min(k, len(pool)))


SCORER_KINDS = ("bm25", "dense", "random")


def make_scorer(kind: str, embeddings: EmbeddingTable | None = None) -> SimilarityScorer:
    """Build a fresh scorer instance for one index.

    ``random`` is not a similarity scorer; it is handled by the acquisition
    stage and rejected here.
    """
    if kind == "bm25":
        return Bm25Scorer()
    if kind == "dense":
        if embeddings is None:
            raise ValidationError("dense scorer requires an embedding table")
        return DenseScorer(embeddings)
    raise ValidationError(f"unknown scorer kind {kind!r}; expected bm25 or dense")
