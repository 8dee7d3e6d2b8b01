"""Independent oracles and randomized world generators for the test suite.

Everything here deliberately avoids the code paths it checks: matching is
done by naive scanning, LCS by memoized recursion, BLEU by direct per-level
counting.
"""

from __future__ import annotations

import random
from decimal import Decimal
from functools import lru_cache

from cmpsynth.corpus import Context, Sentence, normalize_tokens
from cmpsynth.kb import (
    Entity,
    ItemValue,
    KnowledgeBase,
    Property,
    QuantityValue,
    Statement,
    StringValue,
    TimeValue,
)
from cmpsynth.linking import SentenceLink, literal_renderings

# Vocabulary with no stopwords, so normalization keeps every token.
VOCAB = [f"w{i}" for i in range(24)]


# ---------------------------------------------------------------------------
# Naive matching oracle
# ---------------------------------------------------------------------------

def naive_contains(tokens: list[str], pattern: tuple[str, ...]) -> bool:
    n = len(pattern)
    if n == 0:
        return False
    return any(tuple(tokens[i : i + n]) == pattern for i in range(len(tokens) - n + 1))


def naive_alias_present(tokens: list[str], aliases: set[str]) -> bool:
    for alias in aliases:
        pattern = tuple(normalize_tokens(alias))
        if pattern and naive_contains(tokens, pattern):
            return True
    return False


def naive_value_present(tokens: list[str], stmt: Statement, kb: KnowledgeBase) -> bool:
    if isinstance(stmt.value, ItemValue):
        target = kb.entities.get(stmt.value.id)
        return target is not None and naive_alias_present(tokens, target.aliases)
    try:
        renderings = literal_renderings(stmt.value, kb)
    except Exception:
        return False
    for rendering in renderings:
        pattern = tuple(normalize_tokens(rendering))
        if pattern and naive_contains(tokens, pattern):
            return True
    return False


def naive_link_decision(
    tokens: list[str], stmt: Statement, kb: KnowledgeBase, mode: str
) -> str | None:
    """Returns the expected link mode tag, or None: the rules by brute force."""
    entity = kb.entities.get(stmt.subject)
    prop = kb.properties.get(stmt.property)
    e_hit = entity is not None and naive_alias_present(tokens, entity.aliases)
    p_hit = prop is not None and naive_alias_present(tokens, prop.aliases)
    v_hit = naive_value_present(tokens, stmt, kb)
    if mode == "corpus":
        return "corpus_full" if (e_hit and p_hit and v_hit) else None
    if e_hit and v_hit:
        return "wiki_ev"
    if p_hit and v_hit:
        return "wiki_pv"
    return None


# ---------------------------------------------------------------------------
# Randomized worlds
# ---------------------------------------------------------------------------

def random_phrase(rng: random.Random, max_tokens: int = 3) -> str:
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, max_tokens)))


def random_kb(rng: random.Random, n_entities: int = 8, n_properties: int = 3) -> KnowledgeBase:
    """Entities with random aliases/categories, properties with random aliases."""
    kb = KnowledgeBase()
    categories = [f"Q{900 + i}" for i in range(3)]
    for cid in categories:
        kb.entities[cid] = Entity(cid, f"category {cid}", {f"category {cid}"})
    for i in range(n_properties):
        pid = f"P{i + 1}"
        aliases = {random_phrase(rng) for _ in range(rng.randint(1, 2))}
        kb.properties[pid] = Property(pid, sorted(aliases)[0], aliases)
    for i in range(n_entities):
        eid = f"Q{i + 1}"
        aliases = {random_phrase(rng) for _ in range(rng.randint(1, 2))}
        entity = Entity(eid, sorted(aliases)[0], set(aliases))
        for cid in rng.sample(categories, rng.randint(0, 2)):
            entity.statements.append(Statement(eid, "P31", ItemValue(cid)))
        entity.instance_of = {
            s.value.id for s in entity.statements if s.property == "P31"
        }
        kb.entities[eid] = entity
    # Random non-category statements with item or string values.
    entity_ids = [f"Q{i + 1}" for i in range(n_entities)]
    for eid in entity_ids:
        for _ in range(rng.randint(0, 3)):
            pid = f"P{rng.randint(1, n_properties)}"
            if rng.random() < 0.5:
                value: object = ItemValue(rng.choice(entity_ids))
            else:
                value = StringValue(random_phrase(rng))
            kb.entities[eid].statements.append(Statement(eid, pid, value))
    return kb


def random_contexts(rng: random.Random, n_contexts: int, sentences_per: int = 4) -> list[Context]:
    contexts = []
    for c in range(n_contexts):
        ctx = Context(f"doc{rng.randint(0, 2)}", c)
        ctx.sentences = [
            Sentence(" ".join(rng.choice(VOCAB) for _ in range(rng.randint(4, 12))), i)
            for i in range(sentences_per)
        ]
        contexts.append(ctx)
    return contexts


def random_value(rng: random.Random, kb: KnowledgeBase):
    kind = rng.randrange(4)
    if kind == 0:
        return ItemValue(rng.choice(sorted(kb.entities)))
    if kind == 1:
        return StringValue(random_phrase(rng))
    if kind == 2:
        return QuantityValue(
            Decimal(rng.randint(1, 500)) / (10 ** rng.randint(0, 2)),
            rng.choice([None, sorted(kb.entities)[0]]),
        )
    return TimeValue(
        year=rng.randint(1800, 2020),
        month=rng.randint(1, 12),
        day=rng.randint(1, 28),
        precision=rng.choice([9, 10, 11]),
    )


def random_links(rng: random.Random, kb: KnowledgeBase, n_links: int) -> list[SentenceLink]:
    """Synthetic corpus-mode links for the mining oracle (not produced by the
    linker, so value renderability is irrelevant)."""
    entity_ids = sorted(e for e in kb.entities if not e.startswith("Q9"))
    links = []
    for _ in range(n_links):
        subject = rng.choice(entity_ids)
        prop = f"P{rng.randint(1, 3)}"
        value = random_value(rng, kb)
        links.append(
            SentenceLink(
                statement=Statement(subject, prop, value),
                doc_id=f"doc{rng.randint(0, 1)}",
                context_index=rng.randint(0, 2),
                sentence_index=rng.randint(0, 4),
                mode="corpus_full",
                spans=(("e", 0, 1), ("p", 1, 2), ("v", 2, 3)),
            )
        )
    return links


# ---------------------------------------------------------------------------
# Metric oracles
# ---------------------------------------------------------------------------

def lcs_oracle(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + rec(i + 1, j + 1)
        return max(rec(i + 1, j), rec(i, j + 1))

    return rec(0, 0)


def bleu_oracle(candidate_tokens: list[str], reference_tokens: list[str]) -> float:
    """Single-pair BLEU-4 by direct counting (no smoothing)."""
    import math

    log_sum = 0.0
    levels = 0
    for n in range(1, 5):
        cand = [tuple(candidate_tokens[i : i + n]) for i in range(len(candidate_tokens) - n + 1)]
        ref = [tuple(reference_tokens[i : i + n]) for i in range(len(reference_tokens) - n + 1)]
        if not cand:
            continue
        levels += 1
        ref_counts: dict = {}
        for gram in ref:
            ref_counts[gram] = ref_counts.get(gram, 0) + 1
        clipped = 0
        for gram in set(cand):
            clipped += min(cand.count(gram), ref_counts.get(gram, 0))
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / len(cand))
    if levels == 0:
        return 0.0
    precision_mean = math.exp(log_sum / levels)
    c, r = len(candidate_tokens), len(reference_tokens)
    brevity = 1.0 if c >= r else math.exp(1 - r / c)
    return brevity * precision_mean
