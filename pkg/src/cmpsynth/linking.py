"""Statement-sentence linking via a token-level multi-pattern automaton.

Patterns are normalized alias token sequences of entities and properties,
plus normalized canonical renderings of literal values. A statement links to
a sentence when the required elements all occur as contiguous token
subsequences: (e, p, v) in corpus mode, (e, v) or (p, v) in wiki mode.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .corpus import Context, NormalizedSentence, normalize_tokens
from .kb import (
    Entity,
    ItemValue,
    KnowledgeBase,
    Statement,
    TimeValue,
    UnrenderableValue,
    Value,
    render_value,
    statement_sort_key,
    value_from_json,
    value_to_json,
)

KIND_ENTITY = "entity"
KIND_PROPERTY = "property"
KIND_LITERAL = "literal"

MODE_CORPUS = "corpus"
MODE_WIKI = "wiki"

LINK_CORPUS_FULL = "corpus_full"
LINK_WIKI_EV = "wiki_ev"
LINK_WIKI_PV = "wiki_pv"


class PatternRef(NamedTuple):
    kind: str  # entity | property | literal
    key: str  # entity/property id, or normalized literal key


class TokenMatch(NamedTuple):
    start: int
    end: int  # exclusive
    ref: PatternRef


Span = tuple[int, int]


@dataclass(frozen=True)
class SentenceLink:
    statement: Statement
    doc_id: str
    context_index: int
    sentence_index: int
    mode: str  # corpus_full | wiki_ev | wiki_pv
    spans: tuple[tuple[str, int, int], ...]  # (element, start, end), element in e/p/v

    def span_of(self, element: str) -> Span | None:
        for name, start, end in self.spans:
            if name == element:
                return (start, end)
        return None


def literal_key(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def literal_renderings(value: Value, kb: KnowledgeBase) -> list[str]:
    """Surface forms a literal value is matched under (canonical + year-only dates)."""
    renderings = [render_value(value, kb)]
    if isinstance(value, TimeValue):
        year_form = str(value.year)
        if year_form not in renderings:
            renderings.append(year_form)
    return renderings


# ---------------------------------------------------------------------------
# Aho-Corasick over token sequences
# ---------------------------------------------------------------------------

class AliasIndex:
    """Multi-pattern automaton mapping normalized token sequences to PatternRefs.

    Immutable after build; safe for unrestricted concurrent reads.
    """

    def __init__(self) -> None:
        self._goto: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._out: list[list[tuple[int, PatternRef]]] = [[]]
        self._patterns: dict[tuple[str, ...], set[PatternRef]] = {}
        self._built = False

    @property
    def pattern_count(self) -> int:
        return len(self._patterns)

    def _add(self, pattern: tuple[str, ...], ref: PatternRef) -> None:
        if not pattern:
            return
        self._patterns.setdefault(pattern, set()).add(ref)

    def _compile(self) -> None:
        for pattern, refs in sorted(self._patterns.items()):
            node = 0
            for token in pattern:
                nxt = self._goto[node].get(token)
                if nxt is None:
                    nxt = len(self._goto)
                    self._goto[node][token] = nxt
                    self._goto.append({})
                    self._fail.append(0)
                    self._out.append([])
                node = nxt
            for ref in sorted(refs):
                self._out[node].append((len(pattern), ref))
        queue: deque[int] = deque()
        for node in self._goto[0].values():
            self._fail[node] = 0
            queue.append(node)
        while queue:
            current = queue.popleft()
            for token, nxt in self._goto[current].items():
                queue.append(nxt)
                fallback = self._fail[current]
                while fallback and token not in self._goto[fallback]:
                    fallback = self._fail[fallback]
                self._fail[nxt] = self._goto[fallback].get(token, 0)
                if self._fail[nxt] == nxt:
                    self._fail[nxt] = 0
                self._out[nxt] = self._out[nxt] + self._out[self._fail[nxt]]
        self._built = True

    def find_matches(self, tokens: Sequence[str]) -> list[TokenMatch]:
        """All pattern occurrences in the token sequence, in scan order."""
        if not self._built:
            raise RuntimeError("index not compiled; use build_alias_index")
        matches: list[TokenMatch] = []
        node = 0
        for position, token in enumerate(tokens):
            while node and token not in self._goto[node]:
                node = self._fail[node]
            node = self._goto[node].get(token, 0)
            for length, ref in self._out[node]:
                matches.append(TokenMatch(position - length + 1, position + 1, ref))
        return matches


def build_alias_index(
    entities: Iterable[Entity] | KnowledgeBase,
    properties: Iterable | None = None,
    stopwords: frozenset[str] | None = None,
) -> AliasIndex:
    """Index every normalized alias of every entity and property, plus the
    normalized canonical renderings of literal statement values.

    Collisions (one pattern, many ids) are preserved as sets. Accepts either
    a KnowledgeBase or separate entity/property iterables.
    """
    if isinstance(entities, KnowledgeBase):
        kb = entities
    else:
        kb = KnowledgeBase(
            entities={e.id: e for e in entities},
            properties={p.id: p for p in (properties or [])},
        )
    index = AliasIndex()
    for entity in kb.entities.values():
        for alias in entity.aliases:
            pattern = tuple(normalize_tokens(alias, stopwords))
            index._add(pattern, PatternRef(KIND_ENTITY, entity.id))
    for prop in kb.properties.values():
        for alias in prop.aliases:
            pattern = tuple(normalize_tokens(alias, stopwords))
            index._add(pattern, PatternRef(KIND_PROPERTY, prop.id))
    for entity in kb.entities.values():
        for stmt in entity.statements:
            if isinstance(stmt.value, ItemValue):
                continue  # matched through the value entity's own aliases
            try:
                renderings = literal_renderings(stmt.value, kb)
            except UnrenderableValue:
                continue
            for rendering in renderings:
                pattern = tuple(normalize_tokens(rendering, stopwords))
                index._add(pattern, PatternRef(KIND_LITERAL, literal_key(pattern)))
    index._compile()
    return index


# ---------------------------------------------------------------------------
# Per-sentence match collection and the linking rules
# ---------------------------------------------------------------------------

@dataclass
class SentenceMatches:
    """Best (longest, then leftmost) span per matched key, split by kind."""

    entities: dict[str, Span]
    properties: dict[str, Span]
    literals: dict[str, Span]


def _better(current: Span | None, candidate: Span) -> Span:
    if current is None:
        return candidate
    cur_len = current[1] - current[0]
    cand_len = candidate[1] - candidate[0]
    if cand_len > cur_len or (cand_len == cur_len and candidate[0] < current[0]):
        return candidate
    return current


def collect_matches(tokens: Sequence[str], index: AliasIndex) -> SentenceMatches:
    by_kind: dict[str, dict[str, Span]] = {
        KIND_ENTITY: {},
        KIND_PROPERTY: {},
        KIND_LITERAL: {},
    }
    for match in index.find_matches(tokens):
        bucket = by_kind[match.ref.kind]
        bucket[match.ref.key] = _better(
            bucket.get(match.ref.key), (match.start, match.end)
        )
    return SentenceMatches(
        entities=by_kind[KIND_ENTITY],
        properties=by_kind[KIND_PROPERTY],
        literals=by_kind[KIND_LITERAL],
    )


def _value_span(
    stmt: Statement,
    matches: SentenceMatches,
    kb: KnowledgeBase,
    stopwords: frozenset[str] | None,
) -> Span | None:
    if isinstance(stmt.value, ItemValue):
        return matches.entities.get(stmt.value.id)
    try:
        renderings = literal_renderings(stmt.value, kb)
    except UnrenderableValue:
        return None
    best: Span | None = None
    for rendering in renderings:
        key = literal_key(normalize_tokens(rendering, stopwords))
        span = matches.literals.get(key)
        if span is not None:
            best = _better(best, span)
    return best


def link_in_sentence(
    stmt: Statement,
    sentence: NormalizedSentence,
    index: AliasIndex,
    mode: str,
    kb: KnowledgeBase,
    stopwords: frozenset[str] | None = None,
    doc_id: str = "",
    context_index: int = 0,
    sentence_index: int = 0,
) -> SentenceLink | None:
    """Apply the linking rule for one statement against one sentence."""
    matches = collect_matches(sentence.tokens, index)
    return _link_from_matches(
        stmt, matches, mode, kb, stopwords, doc_id, context_index, sentence_index
    )


def _link_from_matches(
    stmt: Statement,
    matches: SentenceMatches,
    mode: str,
    kb: KnowledgeBase,
    stopwords: frozenset[str] | None,
    doc_id: str,
    context_index: int,
    sentence_index: int,
) -> SentenceLink | None:
    e_span = matches.entities.get(stmt.subject)
    p_span = matches.properties.get(stmt.property)
    v_span = _value_span(stmt, matches, kb, stopwords)
    if v_span is None:
        return None
    if mode == MODE_CORPUS:
        if e_span is None or p_span is None:
            return None
        link_mode = LINK_CORPUS_FULL
        spans = (("e", *e_span), ("p", *p_span), ("v", *v_span))
    elif mode == MODE_WIKI:
        if e_span is not None:
            link_mode = LINK_WIKI_EV
            spans = (("e", *e_span), ("v", *v_span))
        elif p_span is not None:
            link_mode = LINK_WIKI_PV
            spans = (("p", *p_span), ("v", *v_span))
        else:
            return None
    else:
        raise ValueError(f"unknown link mode {mode!r}")
    return SentenceLink(
        statement=stmt,
        doc_id=doc_id,
        context_index=context_index,
        sentence_index=sentence_index,
        mode=link_mode,
        spans=spans,
    )


def link_sort_key(link: SentenceLink) -> tuple:
    return (
        link.doc_id,
        link.context_index,
        link.sentence_index,
    ) + statement_sort_key(link.statement)


def _link_context(
    ctx: Context,
    kb: KnowledgeBase,
    index: AliasIndex,
    mode: str,
    stopwords: frozenset[str] | None,
    owners: dict[str, str],
    doc_titles: dict[str, str | None],
) -> list[SentenceLink]:
    links: list[SentenceLink] = []
    if mode == MODE_WIKI:
        title = doc_titles.get(ctx.doc_id)
        owner_id = owners.get(title) if title else None
        if owner_id is None and ctx.doc_id in kb.entities:
            owner_id = ctx.doc_id
        owner = kb.entities.get(owner_id) if owner_id else None
        if owner is None:
            return links
    for sentence in ctx.sentences:
        tokens = normalize_tokens(sentence.text, stopwords)
        if not tokens:
            continue
        matches = collect_matches(tokens, index)
        if mode == MODE_CORPUS:
            candidates: list[Statement] = []
            for entity_id in matches.entities:
                entity = kb.entities.get(entity_id)
                if entity is not None:
                    candidates.extend(entity.statements)
        else:
            candidates = owner.statements
        for stmt in candidates:
            link = _link_from_matches(
                stmt,
                matches,
                mode,
                kb,
                stopwords,
                ctx.doc_id,
                ctx.context_index,
                sentence.index,
            )
            if link is not None:
                links.append(link)
    return links


def _link_batch(args) -> list[SentenceLink]:
    contexts, kb, index, mode, stopwords, owners, doc_titles = args
    out: list[SentenceLink] = []
    for ctx in contexts:
        out.extend(_link_context(ctx, kb, index, mode, stopwords, owners, doc_titles))
    return out


def link_corpus(
    contexts: Sequence[Context],
    kb: KnowledgeBase,
    index: AliasIndex,
    mode: str,
    stopwords: frozenset[str] | None = None,
    doc_titles: dict[str, str | None] | None = None,
    workers: int = 1,
) -> list[SentenceLink]:
    """Link statements to sentences across all contexts.

    Corpus mode considers, per sentence, the statements of every entity whose
    alias matched there; wiki mode considers the statements of the entity
    owning the article (resolved by sitelink title, falling back to doc_id).
    Output order is fully specified, so worker count is unobservable.
    """
    if mode not in (MODE_CORPUS, MODE_WIKI):
        raise ValueError(f"unknown link mode {mode!r}")
    owners = kb.sitelink_owners()
    doc_titles = doc_titles or {}
    if workers > 1 and len(contexts) > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunk = max(1, (len(contexts) + workers - 1) // workers)
        batches = [
            (contexts[i : i + chunk], kb, index, mode, stopwords, owners, doc_titles)
            for i in range(0, len(contexts), chunk)
        ]
        links: list[SentenceLink] = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch_links in pool.map(_link_batch, batches):
                links.extend(batch_links)
    else:
        links = []
        for ctx in contexts:
            links.extend(
                _link_context(ctx, kb, index, mode, stopwords, owners, doc_titles)
            )
    links.sort(key=link_sort_key)
    return links


# ---------------------------------------------------------------------------
# Persistence and the audit sample
# ---------------------------------------------------------------------------

def link_to_json(link: SentenceLink) -> dict:
    return {
        "statement": {
            "e": link.statement.subject,
            "p": link.statement.property,
            "v": value_to_json(link.statement.value),
        },
        "doc_id": link.doc_id,
        "context_index": link.context_index,
        "sentence_index": link.sentence_index,
        "mode": link.mode,
        "spans": {name: [start, end] for name, start, end in link.spans},
    }


def link_from_json(obj: dict) -> SentenceLink:
    stmt = Statement(
        obj["statement"]["e"],
        obj["statement"]["p"],
        value_from_json(obj["statement"]["v"]),
    )
    spans = tuple(
        (name, span[0], span[1]) for name, span in sorted(obj["spans"].items())
    )
    return SentenceLink(
        statement=stmt,
        doc_id=obj["doc_id"],
        context_index=obj["context_index"],
        sentence_index=obj["sentence_index"],
        mode=obj["mode"],
        spans=spans,
    )


def export_audit_sample(
    links: Sequence[SentenceLink],
    n: int,
    seed: int,
    path,
    contexts: Iterable[Context],
    kb: KnowledgeBase,
) -> None:
    """Write n uniformly sampled links (seeded) as tab-separated text for
    human accuracy judgment."""
    if n > len(links):
        raise ValueError(f"requested audit sample of {n} but only {len(links)} links")
    sentence_text = {
        (ctx.doc_id, ctx.context_index, s.index): s.text
        for ctx in contexts
        for s in ctx.sentences
    }
    rng = random.Random(seed)
    sample = sorted(rng.sample(range(len(links)), n))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "doc_id\tcontext_index\tsentence_index\tmode\tsubject\tproperty\tvalue\tsentence\n"
        )
        for i in sample:
            link = links[i]
            stmt = link.statement
            subject = kb.entity_label(stmt.subject) or stmt.subject
            prop = kb.property_label(stmt.property) or stmt.property
            try:
                value = render_value(stmt.value, kb)
            except UnrenderableValue:
                value = str(value_to_json(stmt.value))
            sentence = sentence_text.get(
                (link.doc_id, link.context_index, link.sentence_index), ""
            )
            fh.write(
                f"{link.doc_id}\t{link.context_index}\t{link.sentence_index}\t"
                f"{link.mode}\t{subject}\t{prop}\t{value}\t{sentence}\n"
            )
