import random
import sys
from decimal import Decimal

import pytest

from cmpsynth.kb import (
    Entity,
    ItemValue,
    KnowledgeBase,
    Property,
    QuantityValue,
    StringValue,
    TimeValue,
    UnrenderableValue,
    render_value,
)
from cmpsynth.mining import Quintuple, mine_quintuples, value_equal
from cmpsynth.textualize import (
    ExternalGenerator,
    T1_DIFF,
    T1_SAME,
    T2_BOTH,
    T3_WHAT,
    T4_WHICH_ENTITY,
    T5_WHICH_VALUE,
    T6_SAME_AS,
    T7_KNOWN_FOR,
    DocumentPairSelector,
    instantiate_qa,
    select_document_pair,
    textualize_quintuples,
    verbalize_summary,
)


def label_kb(extra: dict[str, str] | None = None) -> KnowledgeBase:
    kb = KnowledgeBase()
    labels = {
        "Q101": "Diablo Cody",
        "Q102": "Diane Paulus",
        "Q201": "screenwriter",
        "Q202": "director",
        "QA1": "A",
        "QA2": "B",
    }
    labels.update(extra or {})
    for eid, label in labels.items():
        kb.entities[eid] = Entity(eid, label, {label})
    kb.properties["P106"] = Property("P106", "work", {"work"})
    kb.properties["P1"] = Property("P1", "occupation", {"occupation"})
    return kb


def quintuple(e1="Q101", e2="Q102", p="P106", v1=None, v2=None) -> Quintuple:
    return Quintuple(
        e1=e1,
        e2=e2,
        p=p,
        v1=v1 if v1 is not None else ItemValue("Q201"),
        v2=v2 if v2 is not None else ItemValue("Q202"),
        doc_id="news1",
        context_index=0,
        sentence_index_1=0,
        sentence_index_2=0,
    )


# ---------------------------------------------------------------------------
# QA templates
# ---------------------------------------------------------------------------

def test_t3_matches_paper_example():
    pairs = {p.template_id: p for p in instantiate_qa(quintuple(), label_kb())}
    t3 = pairs[T3_WHAT]
    assert t3.question == "What are the work of Diablo Cody and Diane Paulus?"
    assert t3.answer == "screenwriter, director"


def test_t4_answer_is_first_entity():
    pairs = {p.template_id: p for p in instantiate_qa(quintuple(), label_kb())}
    t4 = pairs[T4_WHICH_ENTITY]
    assert t4.question == (
        "Which one of the following entity's work is screenwriter? "
        "Diablo Cody or Diane Paulus?"
    )
    assert t4.answer == "Diablo Cody"


def test_equal_branch_templates():
    q = quintuple("QA1", "QA2", "P1", ItemValue("Q201"), ItemValue("Q201"))
    pairs = {p.template_id: p for p in instantiate_qa(q, label_kb())}
    assert pairs[T2_BOTH].answer == "Yes"
    assert pairs[T6_SAME_AS].answer == "B"
    assert pairs[T7_KNOWN_FOR].question == "A and B are known for what (value) of occupation?"
    assert pairs[T7_KNOWN_FOR].answer == "screenwriter"


def test_unequal_branch_has_t4_t5_only():
    ids = {p.template_id for p in instantiate_qa(quintuple(), label_kb())}
    assert ids == {T1_SAME, T1_DIFF, T2_BOTH, T3_WHAT, T4_WHICH_ENTITY, T5_WHICH_VALUE}


def test_unrenderable_value_raises():
    q = quintuple(v1=ItemValue("Q999"))
    with pytest.raises(UnrenderableValue):
        instantiate_qa(q, label_kb())


def test_property_label_inserted_lowercase():
    kb = label_kb()
    kb.properties["P106"] = Property("P106", "WORK", {"WORK"})
    pairs = instantiate_qa(quintuple(), kb)
    assert all("WORK" not in p.question for p in pairs)


def random_quintuple(rng: random.Random, kb: KnowledgeBase) -> Quintuple:
    entity_ids = [e for e in kb.entities if e.startswith("QA") or e.startswith("Q1")]
    e1, e2 = rng.sample(entity_ids, 2)
    values = [
        ItemValue("Q201"),
        ItemValue("Q202"),
        StringValue("alpha beta"),
        StringValue("alpha"),
        QuantityValue(Decimal("5.1")),
        QuantityValue(Decimal(7)),
        TimeValue(1999, 3, 1, 10),
        TimeValue(1999, 3, 15, 11),
        TimeValue(2001, 7, 2, 11),
    ]
    v1 = rng.choice(values)
    v2 = v1 if rng.random() < 0.5 else rng.choice(values)
    return quintuple(e1, e2, rng.choice(["P106", "P1"]), v1, v2)


def test_template_arity_and_branching_property():
    kb = label_kb()
    rng = random.Random(100)
    for _ in range(500):
        q = random_quintuple(rng, kb)
        pairs = instantiate_qa(q, kb)
        assert len(pairs) == 6
        ids = {p.template_id for p in pairs}
        base = {T1_SAME, T1_DIFF, T2_BOTH, T3_WHAT}
        if value_equal(q.v1, q.v2):
            assert ids == base | {T6_SAME_AS, T7_KNOWN_FOR}
        else:
            assert ids == base | {T4_WHICH_ENTITY, T5_WHICH_VALUE}
        by_id = {p.template_id: p for p in pairs}
        assert {by_id[T1_SAME].answer, by_id[T1_DIFF].answer} == {"Yes", "No"}
        assert by_id[T2_BOTH].answer == by_id[T1_SAME].answer
        e1 = kb.entity_label(q.e1)
        e2 = kb.entity_label(q.e2)
        for p in pairs:
            assert e1 in p.question
            # T5/T6/T7 templates mention only e1; e2 appears in the others.
            if p.template_id not in (T5_WHICH_VALUE, T6_SAME_AS, T7_KNOWN_FOR):
                assert e2 in p.question


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def test_summary_template_unequal():
    summary = verbalize_summary(quintuple(), label_kb())
    assert summary.text == (
        "The work of Diablo Cody is screenwriter, while the work of "
        "Diane Paulus is director."
    )
    assert summary.origin == "template"


def test_summary_template_equal():
    q = quintuple("QA1", "QA2", "P1", StringValue("actor"), StringValue("actor"))
    summary = verbalize_summary(q, label_kb())
    assert summary.text == "Both A and B have actor as their occupation."


def test_summary_mentions_both_labels():
    summary = verbalize_summary(quintuple(), label_kb())
    assert "Diablo Cody" in summary.text and "Diane Paulus" in summary.text


GENERATOR_OK = (
    "import json,sys\n"
    "for line in sys.stdin:\n"
    "    req=json.loads(line)\n"
    "    print(req['e1_label'] + ' versus ' + req['e2_label'])\n"
    "    sys.stdout.flush()\n"
)

GENERATOR_EMPTY = (
    "import sys\n"
    "for line in sys.stdin:\n"
    "    print()\n"
    "    sys.stdout.flush()\n"
)

GENERATOR_SILENT = "import time,sys\nsys.stdin.readline()\ntime.sleep(60)\n"


def generator_for(tmp_path, code: str, timeout: float = 10.0) -> ExternalGenerator:
    script = tmp_path / "gen.py"
    script.write_text(code, encoding="utf-8")
    return ExternalGenerator([sys.executable, str(script)], timeout=timeout)


def test_external_generator_reply_used(tmp_path):
    with generator_for(tmp_path, GENERATOR_OK) as gen:
        summary = verbalize_summary(quintuple(), label_kb(), gen)
    assert summary.text == "Diablo Cody versus Diane Paulus"
    assert summary.origin == "external"


def test_external_generator_empty_reply_falls_back(tmp_path):
    with generator_for(tmp_path, GENERATOR_EMPTY) as gen:
        summary = verbalize_summary(quintuple(), label_kb(), gen)
    assert summary.origin == "template"
    assert summary.text.startswith("The work of Diablo Cody")


def test_external_generator_timeout_falls_back(tmp_path):
    with generator_for(tmp_path, GENERATOR_SILENT, timeout=0.3) as gen:
        summary = verbalize_summary(quintuple(), label_kb(), gen)
        assert summary.origin == "template"
        # Channel is broken afterwards; later calls fall back immediately.
        again = verbalize_summary(quintuple(), label_kb(), gen)
        assert again.origin == "template"


# ---------------------------------------------------------------------------
# Document pairs
# ---------------------------------------------------------------------------

def test_fixture_document_pairs(corpus_links, wiki_links, wiki_contexts, fixture_kb):
    quintuples = mine_quintuples(corpus_links, fixture_kb)
    selector = DocumentPairSelector(wiki_links, wiki_contexts)
    by_pair = {(q.e1, q.e2): selector.select(q) for q in quintuples}
    cody_paulus = by_pair[("Q101", "Q102")]
    assert cody_paulus.d1.doc_id == "wiki-q101" and cody_paulus.d1.context_index == 0
    assert cody_paulus.d2.doc_id == "wiki-q102" and cody_paulus.d2.context_index == 0
    towers = by_pair[("Q150", "Q151")]
    assert towers.d1.context_index == 0
    # The Blackpool mention sits in sentences 11+, so its side is segment 1.
    assert towers.d2.doc_id == "wiki-q151" and towers.d2.context_index == 1
    for pair in by_pair.values():
        assert len(pair.d1.sentences) <= 10 and len(pair.d2.sentences) <= 10


def test_document_pair_absent_when_side_unlinked(corpus_links, wiki_links, wiki_contexts, fixture_kb):
    quintuples = mine_quintuples(corpus_links, fixture_kb)
    q = quintuples[0]
    unlinked = Quintuple(
        e1=q.e1,
        e2=q.e2,
        p="P999",
        v1=q.v1,
        v2=q.v2,
        doc_id=q.doc_id,
        context_index=q.context_index,
        sentence_index_1=q.sentence_index_1,
        sentence_index_2=q.sentence_index_2,
    )
    assert select_document_pair(unlinked, wiki_links, wiki_contexts) is None


def test_textualize_pipeline_counts(corpus_links, wiki_links, wiki_contexts, fixture_kb):
    quintuples = mine_quintuples(corpus_links, fixture_kb)
    qa_pairs, summaries, doc_pairs, counters = textualize_quintuples(
        quintuples, fixture_kb, wiki_links, wiki_contexts
    )
    assert counters.quintuples == len(quintuples)
    assert len(qa_pairs) == 6 * len(quintuples)
    assert len(summaries) == len(quintuples)
    assert len(doc_pairs) == len(quintuples)


# ---------------------------------------------------------------------------
# render_value
# ---------------------------------------------------------------------------

def test_render_item_label(fixture_kb):
    assert render_value(ItemValue("Q201"), fixture_kb) == "screenwriter"


def test_render_unknown_item_raises(fixture_kb):
    with pytest.raises(UnrenderableValue):
        render_value(ItemValue("Q999999"), fixture_kb)


def test_render_string(fixture_kb):
    assert render_value(StringValue("as-is Text"), fixture_kb) == "as-is Text"


def test_render_time_precisions(fixture_kb):
    assert render_value(TimeValue(1999, 1, 1, 9), fixture_kb) == "1999"
    assert render_value(TimeValue(1999, 3, 1, 10), fixture_kb) == "March 1999"
    assert render_value(TimeValue(1999, 3, 4, 11), fixture_kb) == "March 4, 1999"


def test_render_quantity_trims_trailing_zeros(fixture_kb):
    value = QuantityValue(Decimal("5.10"), "Q11573")
    assert render_value(value, fixture_kb) == "5.1 metre"
    assert render_value(QuantityValue(Decimal("330")), fixture_kb) == "330"
