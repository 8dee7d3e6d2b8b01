"""Turn quintuples into text: QA pairs from fixed templates, declarative
summaries (template-based or via an external generator process), and
evidence document pairs selected from wiki-linked article segments.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Context, context_from_json, context_to_json
from .kb import (
    KnowledgeBase,
    UnrenderableValue,
    render_value,
    value_sort_key,
)
from .linking import SentenceLink
from .mining import Quintuple, quintuple_id, value_equal

__all__ = [
    "QAPair",
    "Summary",
    "DocumentPair",
    "ExternalGenerator",
    "TextualizeCounters",
    "instantiate_qa",
    "verbalize_summary",
    "select_document_pair",
    "DocumentPairSelector",
    "render_value",
    "UnrenderableValue",
    "TEMPLATE_IDS",
]

T1_SAME = "T1_SAME"
T1_DIFF = "T1_DIFF"
T2_BOTH = "T2_BOTH"
T3_WHAT = "T3_WHAT"
T4_WHICH_ENTITY = "T4_WHICH_ENTITY"
T5_WHICH_VALUE = "T5_WHICH_VALUE"
T6_SAME_AS = "T6_SAME_AS"
T7_KNOWN_FOR = "T7_KNOWN_FOR"

TEMPLATE_IDS = (
    T1_SAME,
    T1_DIFF,
    T2_BOTH,
    T3_WHAT,
    T4_WHICH_ENTITY,
    T5_WHICH_VALUE,
    T6_SAME_AS,
    T7_KNOWN_FOR,
)

ORIGIN_TEMPLATE = "template"
ORIGIN_EXTERNAL = "external"


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    template_id: str
    quintuple_id: str


@dataclass(frozen=True)
class Summary:
    text: str
    quintuple_id: str
    origin: str  # template | external


@dataclass
class DocumentPair:
    d1: Context  # segment from e1's article
    d2: Context  # segment from e2's article
    quintuple_id: str


@dataclass
class TextualizeCounters:
    quintuples: int = 0
    skipped_unrenderable: int = 0
    generator_fallbacks: int = 0
    missing_document_pair: int = 0


# ---------------------------------------------------------------------------
# QA templates
# ---------------------------------------------------------------------------

def instantiate_qa(q: Quintuple, kb: KnowledgeBase) -> list[QAPair]:
    """The six QA pairs for one quintuple: four unconditional templates plus
    the branch pair selected by value equality.

    Raises UnrenderableValue when a label or value has no surface form; the
    caller skips the quintuple and counts the warning.
    """
    e1 = kb.entity_label(q.e1)
    e2 = kb.entity_label(q.e2)
    if e1 is None or e2 is None:
        raise UnrenderableValue(f"no label for entity {q.e1 if e1 is None else q.e2}")
    p = kb.property_label(q.p)
    if p is None:
        raise UnrenderableValue(f"no label for property {q.p}")
    p = p.lower()
    v1 = render_value(q.v1, kb)
    v2 = render_value(q.v2, kb)
    qid = quintuple_id(q)
    equal = value_equal(q.v1, q.v2)
    same_answer = "Yes" if equal else "No"
    diff_answer = "No" if equal else "Yes"

    pairs = [
        QAPair(
            f"Do {e1} and {e2} have the same value of {p}?", same_answer, T1_SAME, qid
        ),
        QAPair(
            f"Do {e1} and {e2} have the different value of {p}?",
            diff_answer,
            T1_DIFF,
            qid,
        ),
        QAPair(
            f"Do {e1} and {e2} both have the value of {v1} in terms of {p}?",
            same_answer,
            T2_BOTH,
            qid,
        ),
        QAPair(f"What are the {p} of {e1} and {e2}?", f"{v1}, {v2}", T3_WHAT, qid),
    ]
    if equal:
        pairs.append(
            QAPair(
                f"Which entity has the same value as {e1} in terms of {p}?",
                e2,
                T6_SAME_AS,
                qid,
            )
        )
        pairs.append(
            QAPair(
                f"{e1} and {e2} are known for what (value) of {p}?", v1, T7_KNOWN_FOR, qid
            )
        )
    else:
        pairs.append(
            QAPair(
                f"Which one of the following entity's {p} is {v1}? {e1} or {e2}?",
                e1,
                T4_WHICH_ENTITY,
                qid,
            )
        )
        pairs.append(QAPair(f"Is {e1}'s {p} {v1} or {v2}?", v1, T5_WHICH_VALUE, qid))
    return pairs


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

class ExternalGenerator:
    """Optional data-to-text generator behind a line protocol.

    Request: one JSON object {e1_label, e2_label, p_label, v1, v2} on stdin.
    Reply: one line of plain text on stdout. One request in flight at a time;
    a timeout or protocol violation marks the channel broken and the caller
    falls back to the template.
    """

    def __init__(self, command: Sequence[str], timeout: float = 10.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._broken = False
        self._buffer = b""

    def _ensure_started(self) -> bool:
        if self._broken:
            return False
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    bufsize=0,
                )
            except OSError:
                self._broken = True
                return False
            self._buffer = b""
        return True

    def _read_line(self) -> str | None:
        assert self._proc is not None and self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        import time

        deadline = time.monotonic() + self.timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                return None
            chunk = os.read(fd, 4096)
            if not chunk:
                return None
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line.decode("utf-8", errors="replace").strip()

    def generate(self, request: Mapping[str, str]) -> str | None:
        """One reply line, or None on any failure (the channel is then broken)."""
        if not self._ensure_started():
            return None
        assert self._proc is not None and self._proc.stdin is not None
        try:
            payload = json.dumps(dict(request), ensure_ascii=False) + "\n"
            self._proc.stdin.write(payload.encode("utf-8"))
            self._proc.stdin.flush()
        except (OSError, ValueError):
            self._broken = True
            return None
        reply = self._read_line()
        if reply is None:
            self._broken = True
            self.close()
            return None
        return reply or None

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except OSError:
                pass
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def verbalize_summary(
    q: Quintuple,
    kb: KnowledgeBase,
    generator: ExternalGenerator | None = None,
) -> Summary:
    """One declarative summary per quintuple.

    With no generator, deterministic templates; with one, its single-line reply
    is used, falling back to the template on any protocol failure.
    """
    e1 = kb.entity_label(q.e1)
    e2 = kb.entity_label(q.e2)
    p = kb.property_label(q.p)
    if e1 is None or e2 is None or p is None:
        raise UnrenderableValue(f"unresolvable labels for quintuple {quintuple_id(q)}")
    p = p.lower()
    v1 = render_value(q.v1, kb)
    v2 = render_value(q.v2, kb)
    qid = quintuple_id(q)
    if generator is not None:
        reply = generator.generate(
            {"e1_label": e1, "e2_label": e2, "p_label": p, "v1": v1, "v2": v2}
        )
        if reply:
            return Summary(reply, qid, ORIGIN_EXTERNAL)
    if value_equal(q.v1, q.v2):
        text = f"Both {e1} and {e2} have {v1} as their {p}."
    else:
        text = f"The {p} of {e1} is {v1}, while the {p} of {e2} is {v2}."
    return Summary(text, qid, ORIGIN_TEMPLATE)


# ---------------------------------------------------------------------------
# Document pair selection
# ---------------------------------------------------------------------------

def _statement_key(subject: str, prop: str, value) -> tuple:
    return (subject, prop) + value_sort_key(value)


class DocumentPairSelector:
    """Resolves quintuples to their evidence segments from wiki-mode links."""

    def __init__(self, wiki_links: Iterable[SentenceLink], wiki_contexts: Iterable[Context]):
        self._earliest: dict[tuple, tuple[str, int]] = {}
        for link in wiki_links:
            key = _statement_key(
                link.statement.subject, link.statement.property, link.statement.value
            )
            location = (link.doc_id, link.context_index)
            best = self._earliest.get(key)
            if best is None or location < best:
                self._earliest[key] = location
        self._contexts = {
            (ctx.doc_id, ctx.context_index): ctx for ctx in wiki_contexts
        }

    def select(self, q: Quintuple) -> DocumentPair | None:
        loc1 = self._earliest.get(_statement_key(q.e1, q.p, q.v1))
        loc2 = self._earliest.get(_statement_key(q.e2, q.p, q.v2))
        if loc1 is None or loc2 is None:
            return None
        d1 = self._contexts.get(loc1)
        d2 = self._contexts.get(loc2)
        if d1 is None or d2 is None:
            return None
        return DocumentPair(d1, d2, quintuple_id(q))


def select_document_pair(
    q: Quintuple,
    wiki_links: Iterable[SentenceLink],
    wiki_contexts: Iterable[Context],
) -> DocumentPair | None:
    """The earliest linked segment of each entity's article, or None if either
    side has no linked segment."""
    return DocumentPairSelector(wiki_links, wiki_contexts).select(q)


# ---------------------------------------------------------------------------
# Pipeline driver
# ---------------------------------------------------------------------------

def textualize_quintuples(
    quintuples: Sequence[Quintuple],
    kb: KnowledgeBase,
    wiki_links: Iterable[SentenceLink],
    wiki_contexts: Iterable[Context],
    generator: ExternalGenerator | None = None,
) -> tuple[list[QAPair], list[Summary], list[DocumentPair], TextualizeCounters]:
    counters = TextualizeCounters()
    selector = DocumentPairSelector(wiki_links, wiki_contexts)
    qa_pairs: list[QAPair] = []
    summaries: list[Summary] = []
    doc_pairs: list[DocumentPair] = []
    for q in quintuples:
        counters.quintuples += 1
        try:
            qas = instantiate_qa(q, kb)
            summary = verbalize_summary(q, kb, generator)
        except UnrenderableValue:
            counters.skipped_unrenderable += 1
            continue
        if generator is not None and summary.origin == ORIGIN_TEMPLATE:
            counters.generator_fallbacks += 1
        qa_pairs.extend(qas)
        summaries.append(summary)
        pair = selector.select(q)
        if pair is None:
            counters.missing_document_pair += 1
        else:
            doc_pairs.append(pair)
    return qa_pairs, summaries, doc_pairs, counters


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def qa_to_json(pair: QAPair) -> dict:
    return {
        "question": pair.question,
        "answer": pair.answer,
        "template_id": pair.template_id,
        "quintuple_id": pair.quintuple_id,
    }


def qa_from_json(obj: dict) -> QAPair:
    return QAPair(obj["question"], obj["answer"], obj["template_id"], obj["quintuple_id"])


def summary_to_json(s: Summary) -> dict:
    return {"text": s.text, "quintuple_id": s.quintuple_id, "origin": s.origin}


def summary_from_json(obj: dict) -> Summary:
    return Summary(obj["text"], obj["quintuple_id"], obj["origin"])


def document_pair_to_json(pair: DocumentPair) -> dict:
    return {
        "quintuple_id": pair.quintuple_id,
        "d1": context_to_json(pair.d1),
        "d2": context_to_json(pair.d2),
    }


def document_pair_from_json(obj: dict) -> DocumentPair:
    return DocumentPair(
        context_from_json(obj["d1"]),
        context_from_json(obj["d2"]),
        obj["quintuple_id"],
    )
