"""Downstream evaluation set assembly: comparison subsets of multi-hop QA
data, answer-unaware QG conversions, few-shot samples, summarization inputs.

Dataset files are operator-supplied local files; nothing is downloaded or
redistributed. Gold evidence passages are joined with " [SEP] " in dataset
order.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

TASK_QA = "qa"
TASK_QG = "qg"
TASK_SUM = "sum"

SPLITS = ("train", "validation", "test")

DEFAULT_COMPARISON_LABELS = ("comparison",)
BRIDGE_COMPARISON_LABEL = "bridge_comparison"

SEPARATOR = " [SEP] "
DEFAULT_TRUNCATE_TOKENS = 512
DEFAULT_FEWSHOT_K = 100


@dataclass
class BenchmarkExample:
    id: str
    task: str  # qa | qg | sum
    context: str
    question: str | None = None
    answer: str | None = None
    summary: str | None = None
    split: str = "train"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "task": self.task,
            "context": self.context,
            "question": self.question,
            "answer": self.answer,
            "summary": self.summary,
            "split": self.split,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BenchmarkExample":
        return cls(
            id=obj["id"],
            task=obj["task"],
            context=obj["context"],
            question=obj.get("question"),
            answer=obj.get("answer"),
            summary=obj.get("summary"),
            split=obj.get("split", "train"),
        )


# ---------------------------------------------------------------------------
# Comparison-subset filtering
# ---------------------------------------------------------------------------

def filter_comparison(
    records: Sequence[dict],
    type_field: str = "type",
    labels: Sequence[str] = DEFAULT_COMPARISON_LABELS,
) -> list[dict]:
    """Keep records whose question-type annotation is a configured comparison
    label. Missing annotations are an error, not a silent drop."""
    wanted = set(labels)
    kept = []
    for record in records:
        if type_field not in record:
            record_id = record.get("_id") or record.get("id") or "<unknown>"
            raise ValueError(f"record {record_id} has no {type_field!r} field")
        if record[type_field] in wanted:
            kept.append(record)
    return kept


def comparison_labels(include_bridge: bool = False) -> tuple[str, ...]:
    if include_bridge:
        return DEFAULT_COMPARISON_LABELS + (BRIDGE_COMPARISON_LABEL,)
    return DEFAULT_COMPARISON_LABELS


# ---------------------------------------------------------------------------
# Multi-hop QA adapters (HotpotQA / 2WikiMultihopQA public JSON layout)
# ---------------------------------------------------------------------------

def _gold_context(record: dict) -> str:
    """Join the gold evidence passages named by supporting_facts, in dataset
    order, with the separator token."""
    supporting_titles: list[str] = []
    for fact in record.get("supporting_facts", []):
        title = fact[0]
        if title not in supporting_titles:
            supporting_titles.append(title)
    paragraphs = {entry[0]: entry[1] for entry in record.get("context", [])}
    passages = []
    for title in supporting_titles:
        sentences = paragraphs.get(title)
        if sentences is None:
            continue
        passages.append(" ".join(s.strip() for s in sentences if s.strip()))
    return SEPARATOR.join(passages)


def build_qa_examples(
    records: Sequence[dict],
    split: str,
    include_bridge: bool = False,
    type_field: str = "type",
) -> list[BenchmarkExample]:
    """Comparison-question subset of a multi-hop QA file as gold-context QA."""
    subset = filter_comparison(records, type_field, comparison_labels(include_bridge))
    examples = []
    for record in subset:
        record_id = record.get("_id") or record.get("id")
        if record_id is None:
            raise ValueError("record has neither _id nor id")
        examples.append(
            BenchmarkExample(
                id=str(record_id),
                task=TASK_QA,
                context=_gold_context(record),
                question=record.get("question"),
                answer=record.get("answer"),
                split=split,
            )
        )
    return examples


def build_qg_records(qa_examples: Sequence[BenchmarkExample]) -> list[BenchmarkExample]:
    """Answer-unaware QG: context -> question; the answer is discarded."""
    out = []
    for example in qa_examples:
        if not example.question:
            raise ValueError(f"example {example.id} has no question")
        out.append(
            BenchmarkExample(
                id=example.id,
                task=TASK_QG,
                context=example.context,
                question=example.question,
                split=example.split,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Summarization inputs
# ---------------------------------------------------------------------------

def truncate_tokens(text: str, limit: int = DEFAULT_TRUNCATE_TOKENS) -> str:
    """First `limit` whitespace tokens."""
    tokens = text.split()
    if len(tokens) <= limit:
        return text if limit > 0 else ""
    return " ".join(tokens[:limit])


def build_sum_examples(
    records: Sequence[dict],
    split: str,
    truncate: int = DEFAULT_TRUNCATE_TOKENS,
) -> list[BenchmarkExample]:
    """Summarization examples from records shaped {id, doc_a, doc_b, summary}
    (or {id, docs: [a, b], summary}); each description is truncated to the
    first `truncate` tokens and the pair joined with the separator."""
    examples = []
    for record in records:
        record_id = record.get("id") or record.get("_id")
        if record_id is None:
            raise ValueError("summarization record has no id")
        if "docs" in record:
            docs = record["docs"]
        else:
            docs = [record.get("doc_a"), record.get("doc_b")]
        if len(docs) != 2 or any(not isinstance(d, str) or not d for d in docs):
            raise ValueError(f"record {record_id} needs exactly two documents")
        summary = record.get("summary")
        if not summary:
            raise ValueError(f"record {record_id} has no summary")
        context = SEPARATOR.join(truncate_tokens(d, truncate) for d in docs)
        examples.append(
            BenchmarkExample(
                id=str(record_id),
                task=TASK_SUM,
                context=context,
                summary=summary,
                split=split,
            )
        )
    return examples


# ---------------------------------------------------------------------------
# Few-shot sampling
# ---------------------------------------------------------------------------

def sample_fewshot(records: Sequence, k: int = DEFAULT_FEWSHOT_K, seed: int = 0) -> list:
    """k records sampled uniformly without replacement, seeded."""
    if k > len(records):
        raise ValueError(f"cannot sample {k} from {len(records)} records")
    rng = random.Random(seed)
    indices = sorted(rng.sample(range(len(records)), k))
    return [records[i] for i in indices]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def write_examples(path: str | Path, examples: Iterable[BenchmarkExample]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(
                json.dumps(
                    example.to_json(),
                    ensure_ascii=False,
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            n += 1
    return n


def read_examples(path: str | Path) -> list[BenchmarkExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                examples.append(BenchmarkExample.from_json(json.loads(line)))
    return examples
