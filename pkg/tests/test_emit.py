from collections import Counter

import pytest

from cmpsynth.corpus import Context, Sentence
from cmpsynth.emit import (
    PROMPT_QA,
    PROMPT_QAG,
    PROMPT_SUM,
    CorruptionParams,
    TrainingRecord,
    corrupt_spans,
    document_text,
    emit_qa,
    emit_qag,
    emit_records,
    emit_sum,
    emit_ti,
    record_from_json,
    record_to_json,
    write_shards,
)
from cmpsynth.textualize import DocumentPair, QAPair, Summary


def context(doc_id: str, texts: list[str]) -> Context:
    ctx = Context(doc_id, 0)
    ctx.sentences = [Sentence(t, i) for i, t in enumerate(texts)]
    return ctx


def doc_pair() -> DocumentPair:
    return DocumentPair(
        d1=context("w1", ["First fact here.", "Second fact follows."]),
        d2=context("w2", ["Other entity fact."]),
        quintuple_id="q1",
    )


def six_qas() -> list[QAPair]:
    return [
        QAPair(f"Question {i}?", f"answer {i}", tid, "q1")
        for i, tid in enumerate(
            ["T1_SAME", "T1_DIFF", "T2_BOTH", "T3_WHAT", "T4_WHICH_ENTITY", "T5_WHICH_VALUE"]
        )
    ]


# ---------------------------------------------------------------------------
# Prompted tasks
# ---------------------------------------------------------------------------

def test_emit_qa_one_record_per_pair():
    records = emit_qa(doc_pair(), six_qas())
    assert len(records) == 6
    assert len({r.source for r in records}) == 6
    for r in records:
        assert r.source.startswith("Answer the comparative question. Question: ")
        assert " Context: First fact here. Second fact follows. [SEP] Other entity fact." in r.source


def test_emit_qa_empty():
    assert emit_qa(doc_pair(), []) == []


def test_emit_qag_format():
    records = emit_qag(doc_pair(), six_qas())
    assert len(records) == 6
    assert len({r.source for r in records}) == 1
    assert records[0].source == (
        "Generate a comparative question-answer pair. Context: "
        "First fact here. Second fact follows. [SEP] Other entity fact."
    )
    assert records[3].target == "Question 3?; answer 3"


def test_emit_sum_records():
    summaries = [Summary("A compares to B.", "q1", "template")]
    records = emit_sum(doc_pair(), summaries)
    assert len(records) == 1
    assert records[0].source.startswith("Generate a comparative summary. Context: ")
    assert records[0].target == "A compares to B."
    assert len(emit_sum(doc_pair(), summaries * 2)) == 2


def test_prompt_constants_are_goldens():
    assert PROMPT_QA == "Answer the comparative question. Question: "
    assert PROMPT_QAG == "Generate a comparative question-answer pair. Context: "
    assert PROMPT_SUM == "Generate a comparative summary. Context: "


# ---------------------------------------------------------------------------
# Corruption
# ---------------------------------------------------------------------------

def test_corrupt_mask_rate_zero_is_identity():
    text = "alpha beta gamma delta"
    params = CorruptionParams(mask_rate=0.0)
    assert corrupt_spans(text, 42, params) == text


def test_corrupt_deterministic():
    text = " ".join(f"tok{i}" for i in range(200))
    params = CorruptionParams()
    assert corrupt_spans(text, 42, params) == corrupt_spans(text, 42, params)
    assert corrupt_spans(text, 42, params) != corrupt_spans(text, 43, params)


def test_corrupt_masked_fraction_on_large_fixture():
    tokens = [f"tok{i}" for i in range(10_000)]
    text = " ".join(tokens)
    out = corrupt_spans(text, 42, CorruptionParams())
    survivors = [t for t in out.split() if t != "<mask>"]
    masked_fraction = 1 - len(survivors) / len(tokens)
    assert 0.28 <= masked_fraction <= 0.32
    # Survivors keep their original relative order.
    positions = {t: i for i, t in enumerate(tokens)}
    assert all(
        positions[a] < positions[b] for a, b in zip(survivors, survivors[1:])
    )


def test_corrupt_spans_never_reorder_or_invent_tokens():
    tokens = [f"tok{i}" for i in range(300)]
    out = corrupt_spans(" ".join(tokens), 7, CorruptionParams())
    out_tokens = [t for t in out.split() if t != "<mask>"]
    assert set(out_tokens) <= set(tokens)


def test_corruption_params_validation():
    with pytest.raises(ValueError):
        CorruptionParams(mask_rate=1.0)
    with pytest.raises(ValueError):
        CorruptionParams(mean_span_length=0.5)


def test_custom_mask_token():
    out = corrupt_spans("a b c d e f g h", 1, CorruptionParams(mask_token="<extra_id_0>"))
    assert "<extra_id_0>" in out


# ---------------------------------------------------------------------------
# Text infilling records
# ---------------------------------------------------------------------------

def test_emit_ti_target_is_uncorrupted():
    record = emit_ti(doc_pair(), 42, CorruptionParams())
    assert record.target == (
        "First fact here. Second fact follows. [SEP] Other entity fact."
    )
    assert record.task == "ti"
    assert "[SEP]" in record.source


def test_emit_ti_mask_rate_zero_source_equals_target():
    record = emit_ti(doc_pair(), 42, CorruptionParams(mask_rate=0.0))
    assert record.source == record.target


def test_emit_ti_reproducible():
    a = emit_ti(doc_pair(), 42, CorruptionParams())
    b = emit_ti(doc_pair(), 42, CorruptionParams())
    assert a == b


def test_target_token_multiset_preserved():
    pair = doc_pair()
    record = emit_ti(pair, 9, CorruptionParams())
    original = f"{document_text(pair.d1)} [SEP] {document_text(pair.d2)}"
    assert Counter(record.target.split()) == Counter(original.split())


def test_emit_records_per_pair_counts():
    pair = doc_pair()
    qas = six_qas()
    summaries = [Summary("S text.", "q1", "template")]
    records = emit_records([pair], qas, summaries, run_seed=0, params=CorruptionParams())
    by_task = Counter(r.task for r in records)
    assert by_task == {"qa": 6, "qag": 6, "sum": 1, "ti": 1}


def test_emit_records_independent_of_pair_order():
    pair_a = doc_pair()
    pair_b = DocumentPair(
        d1=context("w3", ["Third doc sentence."]),
        d2=context("w4", ["Fourth doc sentence."]),
        quintuple_id="q2",
    )
    qas = six_qas() + [QAPair("Q?", "A", "T1_SAME", "q2")]
    summaries = [Summary("S.", "q1", "template"), Summary("S2.", "q2", "template")]
    params = CorruptionParams()
    forward = emit_records([pair_a, pair_b], qas, summaries, 5, params)
    reverse = emit_records([pair_b, pair_a], qas, summaries, 5, params)
    assert sorted(map(str, forward)) == sorted(map(str, reverse))


# ---------------------------------------------------------------------------
# Shards
# ---------------------------------------------------------------------------

def records_fixture(n: int) -> list[TrainingRecord]:
    return [
        TrainingRecord("qa", f"source {i}", f"target {i}", {"quintuple_id": f"q{i}"})
        for i in range(n)
    ]


def test_write_shards_sizes(tmp_path):
    manifest = write_shards(records_fixture(25), tmp_path / "shards", 10, seed=1)
    assert [s["records"] for s in manifest["shards"]] == [10, 10, 5]
    assert manifest["task_counts"]["qa"] == 25
    assert (tmp_path / "shards" / "records-00002.jsonl").exists()


def test_write_shards_rerun_identical_hashes(tmp_path):
    first = write_shards(records_fixture(12), tmp_path / "a", 5, seed=1)
    second = write_shards(records_fixture(12), tmp_path / "b", 5, seed=1)
    assert [s["sha256"] for s in first["shards"]] == [
        s["sha256"] for s in second["shards"]
    ]


def test_write_shards_empty(tmp_path):
    manifest = write_shards([], tmp_path / "shards", 10, seed=1)
    assert manifest["shards"] == []
    assert manifest["total_records"] == 0
    assert all(v == 0 for v in manifest["task_counts"].values())


def test_record_json_round_trip():
    for record in records_fixture(3):
        assert record_from_json(record_to_json(record)) == record
