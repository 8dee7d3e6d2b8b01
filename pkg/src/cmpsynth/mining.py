"""Pair linked statements within a shared context into comparison quintuples.

Two corpus links pair up when (1) their subjects share at least one category,
(2) their properties are equal, and (3) they sit in the same context. The
earlier-sentence subject becomes e1 (ties broken by entity id) so the
asymmetric templates have a deterministic orientation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import normalize_tokens
from .kb import (
    ItemValue,
    KnowledgeBase,
    QuantityValue,
    StringValue,
    TimeValue,
    UnrenderableValue,
    Value,
    category_of,
    render_value,
    value_from_json,
    value_sort_key,
    value_to_json,
)
from .linking import SentenceLink

DEFAULT_CATEGORY_PROPERTY = "P31"


@dataclass(frozen=True)
class Quintuple:
    e1: str
    e2: str
    p: str
    v1: Value
    v2: Value
    doc_id: str
    context_index: int
    sentence_index_1: int
    sentence_index_2: int

    @property
    def key(self) -> tuple:
        return (self.e1, self.e2, self.p) + value_sort_key(self.v1) + value_sort_key(self.v2)


def quintuple_id(q: Quintuple) -> str:
    """Stable content hash of (e1, e2, p, v1, v2)."""
    blob = "\x1f".join(
        [q.e1, q.e2, q.p, str(value_sort_key(q.v1)), str(value_sort_key(q.v2))]
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Value equality (the same/different branch condition)
# ---------------------------------------------------------------------------

def _time_compare_key(t: TimeValue, precision: int) -> tuple:
    if precision >= 11:
        return (t.year, t.month, t.day)
    if precision == 10:
        return (t.year, t.month)
    # Year or coarser: truncate the year to the precision's granularity
    # (9=year, 8=decade, 7=century, ...).
    divisor = 10 ** min(9 - precision, 9)
    return (t.year // divisor,)


def value_equal(v1: Value, v2: Value) -> bool:
    """True iff the two values denote the same thing.

    Items compare by id, strings after normalization, quantities numerically
    with identical unit, times at the coarser of the two precisions.
    """
    if isinstance(v1, ItemValue) and isinstance(v2, ItemValue):
        return v1.id == v2.id
    if isinstance(v1, StringValue) and isinstance(v2, StringValue):
        return normalize_tokens(v1.text) == normalize_tokens(v2.text)
    if isinstance(v1, QuantityValue) and isinstance(v2, QuantityValue):
        return v1.amount == v2.amount and v1.unit == v2.unit
    if isinstance(v1, TimeValue) and isinstance(v2, TimeValue):
        precision = min(v1.precision, v2.precision)
        return _time_compare_key(v1, precision) == _time_compare_key(v2, precision)
    return False


# ---------------------------------------------------------------------------
# Mining
# ---------------------------------------------------------------------------

def _pair_links(
    a: SentenceLink,
    b: SentenceLink,
    kb: KnowledgeBase,
    category_property: str,
) -> Quintuple | None:
    """Apply the three pairing criteria to one unordered link pair."""
    if (a.doc_id, a.context_index) != (b.doc_id, b.context_index):
        return None
    sa, sb = a.statement, b.statement
    if sa.subject == sb.subject:
        return None
    if sa.property != sb.property:
        return None
    ent_a = kb.entities.get(sa.subject)
    ent_b = kb.entities.get(sb.subject)
    if ent_a is None or ent_b is None:
        return None
    if not (category_of(ent_a, category_property) & category_of(ent_b, category_property)):
        return None
    first, second = a, b
    if (b.sentence_index, sb.subject) < (a.sentence_index, sa.subject):
        first, second = b, a
    return Quintuple(
        e1=first.statement.subject,
        e2=second.statement.subject,
        p=first.statement.property,
        v1=first.statement.value,
        v2=second.statement.value,
        doc_id=first.doc_id,
        context_index=first.context_index,
        sentence_index_1=first.sentence_index,
        sentence_index_2=second.sentence_index,
    )


def _provenance_key(q: Quintuple) -> tuple:
    return (
        q.doc_id,
        q.context_index,
        q.sentence_index_1,
        q.sentence_index_2,
    ) + q.key


def _render_or_key(value: Value, kb: KnowledgeBase) -> str:
    try:
        return render_value(value, kb)
    except UnrenderableValue:
        return str(value_sort_key(value))


def _finalize(candidates: list[Quintuple], kb: KnowledgeBase) -> list[Quintuple]:
    """Dedupe on (e1,e2,p,v1,v2) keeping the first provenance in sort order,
    then sort by (e1, e2, p, rendered v1, rendered v2)."""
    candidates.sort(key=_provenance_key)
    seen: set[tuple] = set()
    unique: list[Quintuple] = []
    for q in candidates:
        if q.key not in seen:
            seen.add(q.key)
            unique.append(q)
    unique.sort(
        key=lambda q: (
            q.e1,
            q.e2,
            q.p,
            _render_or_key(q.v1, kb),
            _render_or_key(q.v2, kb),
        )
        + q.key
    )
    return unique


def mine_quintuples(
    links: Sequence[SentenceLink],
    kb: KnowledgeBase,
    category_property: str = DEFAULT_CATEGORY_PROPERTY,
) -> list[Quintuple]:
    """Mine quintuples by grouping links per (context, property) before pairing."""
    by_group: dict[tuple, list[SentenceLink]] = {}
    for link in links:
        group = (link.doc_id, link.context_index, link.statement.property)
        by_group.setdefault(group, []).append(link)
    candidates: list[Quintuple] = []
    for group_links in by_group.values():
        for i in range(len(group_links)):
            for j in range(i + 1, len(group_links)):
                q = _pair_links(group_links[i], group_links[j], kb, category_property)
                if q is not None:
                    candidates.append(q)
    return _finalize(candidates, kb)


def mine_bruteforce(
    links: Sequence[SentenceLink],
    kb: KnowledgeBase,
    category_property: str = DEFAULT_CATEGORY_PROPERTY,
) -> list[Quintuple]:
    """Test oracle: the same contract as mine_quintuples, as a naive double
    loop over all link pairs with no grouping or indexing."""
    candidates: list[Quintuple] = []
    for i in range(len(links)):
        for j in range(i + 1, len(links)):
            q = _pair_links(links[i], links[j], kb, category_property)
            if q is not None:
                candidates.append(q)
    return _finalize(candidates, kb)


def validate_quintuples(
    quintuples: Iterable[Quintuple],
    kb: KnowledgeBase,
    category_property: str = DEFAULT_CATEGORY_PROPERTY,
) -> None:
    """Raise if any emitted quintuple violates its own invariants."""
    for q in quintuples:
        if q.e1 == q.e2:
            raise AssertionError(f"self-pair {q.e1}")
        ent1, ent2 = kb.entities.get(q.e1), kb.entities.get(q.e2)
        if ent1 is None or ent2 is None:
            raise AssertionError(f"unknown subject in {q.e1}/{q.e2}")
        if not (
            category_of(ent1, category_property) & category_of(ent2, category_property)
        ):
            raise AssertionError(f"no shared category for {q.e1}/{q.e2}")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def quintuple_to_json(q: Quintuple) -> dict:
    return {
        "id": quintuple_id(q),
        "e1": q.e1,
        "e2": q.e2,
        "p": q.p,
        "v1": value_to_json(q.v1),
        "v2": value_to_json(q.v2),
        "provenance": {
            "doc_id": q.doc_id,
            "context_index": q.context_index,
            "sentence_index_1": q.sentence_index_1,
            "sentence_index_2": q.sentence_index_2,
        },
    }


def quintuple_from_json(obj: dict) -> Quintuple:
    prov = obj["provenance"]
    return Quintuple(
        e1=obj["e1"],
        e2=obj["e2"],
        p=obj["p"],
        v1=value_from_json(obj["v1"]),
        v2=value_from_json(obj["v2"]),
        doc_id=prov["doc_id"],
        context_index=prov["context_index"],
        sentence_index_1=prov["sentence_index_1"],
        sentence_index_2=prov["sentence_index_2"],
    )
