"""Assemble the four pre-training tasks into source->target training records.

Prompt strings are byte-exact contracts; the separator is exactly "[SEP]"
with one space on each side, and documents render as their sentences joined
by single spaces. Text infilling corrupts each side with Poisson-length mask
spans under a per-record derived seed, so output is independent of worker
count and shard assignment.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .corpus import Context
from .textualize import DocumentPair, QAPair, Summary
from .util import derive_seed, json_line, sha256_file, write_jsonl

TASK_QA = "qa"
TASK_QAG = "qag"
TASK_SUM = "sum"
TASK_TI = "ti"
TASKS = (TASK_QA, TASK_QAG, TASK_SUM, TASK_TI)

PROMPT_QA = "Answer the comparative question. Question: "
PROMPT_QAG = "Generate a comparative question-answer pair. Context: "
PROMPT_SUM = "Generate a comparative summary. Context: "
SEPARATOR = " [SEP] "


@dataclass(frozen=True)
class CorruptionParams:
    mask_rate: float = 0.30
    mean_span_length: float = 3.0
    mask_token: str = "<mask>"

    def __post_init__(self):
        if not 0 <= self.mask_rate < 1:
            raise ValueError(f"mask_rate {self.mask_rate} outside [0, 1)")
        if self.mean_span_length < 1:
            raise ValueError(f"mean_span_length {self.mean_span_length} < 1")


@dataclass
class TrainingRecord:
    task: str
    source: str
    target: str
    meta: dict = field(default_factory=dict)


def document_text(ctx: Context) -> str:
    return " ".join(s.text for s in ctx.sentences)


def _pair_docs(pair: DocumentPair) -> tuple[str, str]:
    return document_text(pair.d1), document_text(pair.d2)


def _pair_meta(pair: DocumentPair) -> dict:
    return {
        "quintuple_id": pair.quintuple_id,
        "doc_ids": [pair.d1.doc_id, pair.d2.doc_id],
    }


# ---------------------------------------------------------------------------
# The three prompted tasks
# ---------------------------------------------------------------------------

def emit_qa(pair: DocumentPair, qas: Sequence[QAPair]) -> list[TrainingRecord]:
    d1, d2 = _pair_docs(pair)
    records = []
    for qa in qas:
        meta = _pair_meta(pair)
        meta["template_id"] = qa.template_id
        records.append(
            TrainingRecord(
                task=TASK_QA,
                source=f"{PROMPT_QA}{qa.question} Context: {d1}{SEPARATOR}{d2}",
                target=qa.answer,
                meta=meta,
            )
        )
    return records


def emit_qag(pair: DocumentPair, qas: Sequence[QAPair]) -> list[TrainingRecord]:
    d1, d2 = _pair_docs(pair)
    source = f"{PROMPT_QAG}{d1}{SEPARATOR}{d2}"
    records = []
    for qa in qas:
        meta = _pair_meta(pair)
        meta["template_id"] = qa.template_id
        records.append(
            TrainingRecord(
                task=TASK_QAG,
                source=source,
                target=f"{qa.question}; {qa.answer}",
                meta=meta,
            )
        )
    return records


def emit_sum(pair: DocumentPair, summaries: Sequence[Summary]) -> list[TrainingRecord]:
    d1, d2 = _pair_docs(pair)
    source = f"{PROMPT_SUM}{d1}{SEPARATOR}{d2}"
    return [
        TrainingRecord(task=TASK_SUM, source=source, target=s.text, meta=_pair_meta(pair))
        for s in summaries
    ]


# ---------------------------------------------------------------------------
# Text infilling
# ---------------------------------------------------------------------------

def _poisson(rng: random.Random, mean: float) -> int:
    # Knuth's method; fine for small means.
    limit = math.exp(-mean)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def corrupt_spans(text: str, seed: int, params: CorruptionParams) -> str:
    """Replace random token spans with single mask tokens.

    Span lengths are Poisson(mean_span_length); zero-length spans insert a
    bare mask token. Start positions are uniform among unmasked tokens and
    spans never overlap. Sampling continues until the masked fraction reaches
    mask_rate. Seeded and reproducible.
    """
    tokens = text.split()
    n = len(tokens)
    if n == 0 or params.mask_rate == 0:
        return text
    rng = random.Random(seed)
    target = math.ceil(params.mask_rate * n)
    covered = [False] * n
    num_masked = 0
    span_start: dict[int, int] = {}  # start index -> span length (>0)
    insertions: dict[int, int] = {}  # token index -> bare masks inserted before it
    while num_masked < target:
        length = _poisson(rng, params.mean_span_length)
        # Uniform over unmasked positions; rejection is cheap at mask_rate < 1.
        start = rng.randrange(n)
        while covered[start]:
            start = rng.randrange(n)
        if length == 0:
            insertions[start] = insertions.get(start, 0) + 1
            continue
        # Clip to the contiguous unmasked run so spans never overlap.
        end = start
        while end < n and not covered[end] and end - start < length:
            end += 1
        span_start[start] = end - start
        for i in range(start, end):
            covered[i] = True
        num_masked += end - start

    out: list[str] = []
    i = 0
    while i < n:
        out.extend([params.mask_token] * insertions.get(i, 0))
        if i in span_start:
            out.append(params.mask_token)
            i += span_start[i]
        else:
            out.append(tokens[i])
            i += 1
    return " ".join(out)


def emit_ti(pair: DocumentPair, seed: int, params: CorruptionParams) -> TrainingRecord:
    """One text-infilling record: corrupted sides -> original concatenation."""
    d1, d2 = _pair_docs(pair)
    corrupted_1 = corrupt_spans(d1, derive_seed(seed, "d1"), params)
    corrupted_2 = corrupt_spans(d2, derive_seed(seed, "d2"), params)
    meta = _pair_meta(pair)
    meta["seed"] = seed
    return TrainingRecord(
        task=TASK_TI,
        source=f"{corrupted_1}{SEPARATOR}{corrupted_2}",
        target=f"{d1}{SEPARATOR}{d2}",
        meta=meta,
    )


# ---------------------------------------------------------------------------
# Assembly over the whole textualized corpus
# ---------------------------------------------------------------------------

def emit_records(
    doc_pairs: Sequence[DocumentPair],
    qa_pairs: Iterable[QAPair],
    summaries: Iterable[Summary],
    run_seed: int,
    params: CorruptionParams,
) -> list[TrainingRecord]:
    """All training records for the document pairs, in a deterministic order.

    The TI seed derives from (run_seed, quintuple_id), so records do not
    depend on worker count or iteration order.
    """
    qa_by_quintuple: dict[str, list[QAPair]] = {}
    for qa in qa_pairs:
        qa_by_quintuple.setdefault(qa.quintuple_id, []).append(qa)
    sum_by_quintuple: dict[str, list[Summary]] = {}
    for s in summaries:
        sum_by_quintuple.setdefault(s.quintuple_id, []).append(s)

    records: list[TrainingRecord] = []
    for pair in doc_pairs:
        qid = pair.quintuple_id
        qas = qa_by_quintuple.get(qid, [])
        sums = sum_by_quintuple.get(qid, [])
        records.extend(emit_qa(pair, qas))
        records.extend(emit_qag(pair, qas))
        records.extend(emit_sum(pair, sums))
        records.append(emit_ti(pair, derive_seed(run_seed, "ti", qid), params))
    return records


# ---------------------------------------------------------------------------
# Sharded output
# ---------------------------------------------------------------------------

def record_to_json(record: TrainingRecord) -> dict:
    return {
        "task": record.task,
        "source": record.source,
        "target": record.target,
        "meta": record.meta,
    }


def record_from_json(obj: dict) -> TrainingRecord:
    return TrainingRecord(obj["task"], obj["source"], obj["target"], obj.get("meta", {}))


def write_shards(
    records: Sequence[TrainingRecord],
    directory: str | Path,
    shard_size: int,
    seed: int | None = None,
    config_echo: Mapping | None = None,
) -> dict:
    """Write line-delimited JSON shards of <= shard_size records plus a
    manifest with per-task counts and shard hashes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if shard_size <= 0:
        raise ValueError(f"shard_size must be positive, got {shard_size}")
    task_counts = {task: 0 for task in TASKS}
    for record in records:
        if record.task not in task_counts:
            raise ValueError(f"unknown task {record.task!r}")
        task_counts[record.task] += 1
    shards = []
    for shard_index, start in enumerate(range(0, len(records), shard_size)):
        name = f"records-{shard_index:05d}.jsonl"
        shard_path = directory / name
        count = write_jsonl(
            shard_path,
            (record_to_json(r) for r in records[start : start + shard_size]),
        )
        shards.append(
            {"file": name, "records": count, "sha256": sha256_file(shard_path)}
        )
    manifest = {
        "version": __version__,
        "seed": seed,
        "config": dict(config_echo or {}),
        "total_records": len(records),
        "task_counts": task_counts,
        "shards": shards,
    }
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json_line(manifest) + "\n", encoding="utf-8")
    return manifest
