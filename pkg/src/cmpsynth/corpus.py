"""Corpus ingestion: document reading, context segmentation, rule-based
sentence splitting, and token normalization for alias matching.

Everything here is deterministic and pure; identical input bytes give
identical outputs regardless of thread count.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

_DATA_DIR = Path(__file__).parent / "data"

SOURCE_TAGS = ("news", "wiki")
CONTEXT_MODES = ("paragraph", "fixed10")
WIKI_SEGMENT_SENTENCES = 10

# Characters stripped from token edges during normalization. Covers ASCII
# punctuation plus common typographic quotes/dashes.
_STRIP_CHARS = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~“”‘’«»—–…"

_OPENING_CHARS = "\"'“‘«([{"

_PARAGRAPH_SPLIT_RE = re.compile(r"\n\s*\n")
# Candidate sentence boundary: terminal punctuation run, whitespace, then the
# start of the next sentence (captured so we can inspect it).
_BOUNDARY_RE = re.compile(r"([.!?]+)([)\]\"'”’]*)(\s+)(?=(\S))")


@dataclass
class Document:
    doc_id: str
    source_tag: str  # "news" | "wiki"
    title: str | None
    text: str


@dataclass
class Sentence:
    text: str
    index: int


@dataclass
class Context:
    doc_id: str
    context_index: int
    sentences: list[Sentence] = field(default_factory=list)


@dataclass(frozen=True)
class NormalizedSentence:
    tokens: tuple[str, ...]


@dataclass
class ReadCounters:
    read: int = 0
    skipped: int = 0


def _load_word_list(path: Path) -> frozenset[str]:
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@lru_cache(maxsize=None)
def load_stopwords(path: str | None = None) -> frozenset[str]:
    return _load_word_list(Path(path) if path else _DATA_DIR / "stopwords.txt")


@lru_cache(maxsize=None)
def load_abbreviations(path: str | None = None) -> frozenset[str]:
    return _load_word_list(Path(path) if path else _DATA_DIR / "abbreviations.txt")


# ---------------------------------------------------------------------------
# Document reading
# ---------------------------------------------------------------------------

def read_documents(
    lines: Iterable[str],
    default_source: str = "news",
    counters: ReadCounters | None = None,
) -> Iterator[Document]:
    """Yield Documents from line-delimited JSON {id, text, title?, source?}.

    Malformed lines (bad JSON, missing id, empty text) are skipped and counted.
    """
    counters = counters if counters is not None else ReadCounters()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            counters.skipped += 1
            continue
        if not isinstance(obj, dict):
            counters.skipped += 1
            continue
        doc_id = obj.get("id")
        text = obj.get("text")
        if not doc_id or not isinstance(text, str) or not text.strip():
            counters.skipped += 1
            continue
        source = obj.get("source") or default_source
        if source not in SOURCE_TAGS:
            source = default_source
        counters.read += 1
        yield Document(
            doc_id=str(doc_id),
            source_tag=source,
            title=obj.get("title"),
            text=text,
        )


def read_documents_file(
    path: str | Path, default_source: str = "news"
) -> tuple[list[Document], ReadCounters]:
    counters = ReadCounters()
    with open(path, "r", encoding="utf-8") as fh:
        docs = list(read_documents(fh, default_source, counters))
    return docs, counters


# ---------------------------------------------------------------------------
# Sentence splitting
# ---------------------------------------------------------------------------

def _last_word_before(text: str, end: int) -> str:
    """The whitespace-delimited chunk immediately before position `end`."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end]


def _is_abbreviation(word: str, abbreviations: frozenset[str]) -> bool:
    word = word.strip(_STRIP_CHARS.replace(".", "")).rstrip(".").lower()
    if not word:
        return False
    if word in abbreviations:
        return True
    # Single letters read as initials ("J. Smith"), never sentence ends.
    return len(word) == 1 and word.isalpha()


def split_sentence_texts(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    """Rule-based sentence splitting.

    Splits after terminal punctuation followed by whitespace and an
    uppercase or opening character, unless the word before the period is a
    known abbreviation. Deterministic; no model dependency.
    """
    abbreviations = (
        abbreviations if abbreviations is not None else load_abbreviations()
    )
    text = text.strip()
    if not text:
        return []
    pieces: list[str] = []
    start = 0
    for match in _BOUNDARY_RE.finditer(text):
        punct = match.group(1)
        next_char = match.group(4)
        if not (next_char.isupper() or next_char in _OPENING_CHARS):
            continue
        if "." in punct and "!" not in punct and "?" not in punct:
            word = _last_word_before(text, match.start(1))
            if _is_abbreviation(word + punct, abbreviations):
                continue
        boundary = match.end(2) if match.group(2) else match.end(1)
        piece = text[start:boundary].strip()
        if piece:
            pieces.append(piece)
        start = match.end(3)
    tail = text[start:].strip()
    if tail:
        pieces.append(tail)
    return pieces


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[Sentence]:
    return [
        Sentence(piece, index)
        for index, piece in enumerate(split_sentence_texts(text, abbreviations))
    ]


# ---------------------------------------------------------------------------
# Context segmentation
# ---------------------------------------------------------------------------

def _doc_sentence_texts(doc: Document) -> list[list[str]]:
    """Per-paragraph sentence texts; blank lines delimit paragraphs."""
    paragraphs = _PARAGRAPH_SPLIT_RE.split(doc.text)
    out = []
    for para in paragraphs:
        sentences = split_sentence_texts(para)
        if sentences:
            out.append(sentences)
    return out


def split_contexts(
    doc: Document, mode: str, max_sentences: int | None = None
) -> list[Context]:
    """Segment a document into contexts.

    paragraph: one context per blank-line-delimited paragraph (optionally
    capped at max_sentences per context). fixed10: consecutive 10-sentence
    windows over the whole document; the final window may be shorter.
    """
    if mode not in CONTEXT_MODES:
        raise ValueError(f"unknown context mode {mode!r}")
    per_paragraph = _doc_sentence_texts(doc)
    contexts: list[Context] = []

    def add_context(sentence_texts: list[str]) -> None:
        ctx = Context(doc.doc_id, len(contexts))
        ctx.sentences = [Sentence(t, i) for i, t in enumerate(sentence_texts)]
        contexts.append(ctx)

    if mode == "paragraph":
        for sentences in per_paragraph:
            if max_sentences is None or len(sentences) <= max_sentences:
                add_context(sentences)
            else:
                for i in range(0, len(sentences), max_sentences):
                    add_context(sentences[i : i + max_sentences])
    else:
        flat = [t for sentences in per_paragraph for t in sentences]
        for i in range(0, len(flat), WIKI_SEGMENT_SENTENCES):
            add_context(flat[i : i + WIKI_SEGMENT_SENTENCES])
    return contexts


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def normalize_tokens(text: str, stopwords: frozenset[str] | None = None) -> list[str]:
    """Lowercase, strip edge punctuation, drop stopwords and empty tokens."""
    stopwords = stopwords if stopwords is not None else load_stopwords()
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_STRIP_CHARS)
        if token and token not in stopwords:
            tokens.append(token)
    return tokens


def normalize(sentence: Sentence | str, stopwords: frozenset[str] | None = None) -> NormalizedSentence:
    text = sentence.text if isinstance(sentence, Sentence) else sentence
    return NormalizedSentence(tuple(normalize_tokens(text, stopwords)))


# ---------------------------------------------------------------------------
# Context persistence (line-delimited JSON)
# ---------------------------------------------------------------------------

def context_to_json(ctx: Context) -> dict:
    return {
        "doc_id": ctx.doc_id,
        "context_index": ctx.context_index,
        "sentences": [s.text for s in ctx.sentences],
    }


def context_from_json(obj: dict) -> Context:
    return Context(
        doc_id=obj["doc_id"],
        context_index=obj["context_index"],
        sentences=[Sentence(t, i) for i, t in enumerate(obj["sentences"])],
    )
