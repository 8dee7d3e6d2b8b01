"""Zero-/few-shot evaluation: decode predictions for benchmark files in the
pipeline's line-delimited format and write {id, prediction} rows that its
eval CLI accepts verbatim."""

from __future__ import annotations

import json
from pathlib import Path

from .data import Vocab
from .model import Seq2SeqModel

# Task prompts are part of the shard wire format.
PROMPT_QA = "Answer the comparative question. Question: "
PROMPT_QAG = "Generate a comparative question-answer pair. Context: "
PROMPT_SUM = "Generate a comparative summary. Context: "


def benchmark_source(example: dict) -> str:
    task = example.get("task", "qa")
    context = example["context"]
    if task == "qa":
        return f"{PROMPT_QA}{example['question']} Context: {context}"
    if task == "qg":
        return f"{PROMPT_QAG}{context}"
    if task == "sum":
        return f"{PROMPT_SUM}{context}"
    raise ValueError(f"unknown benchmark task {task!r}")


def benchmark_reference(example: dict) -> str | None:
    task = example.get("task", "qa")
    if task == "qa":
        return example.get("answer")
    if task == "qg":
        return example.get("question")
    return example.get("summary")


def read_benchmark(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"benchmark file not found: {path}")
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                examples.append(json.loads(line))
    return examples


def evaluate_zero_shot(
    model: Seq2SeqModel,
    vocab: Vocab,
    benchmark_files: list[str | Path],
    out_dir: str | Path,
    max_len: int = 64,
    beam_size: int = 1,
) -> dict[str, Path]:
    """One predictions file per benchmark file; greedy decoding by default."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, Path] = {}
    for bench_path in benchmark_files:
        bench_path = Path(bench_path)
        examples = read_benchmark(bench_path)
        out_path = out_dir / f"{bench_path.stem}.predictions.jsonl"
        with open(out_path, "w", encoding="utf-8") as fh:
            for example in examples:
                prediction = model.generate(
                    benchmark_source(example), vocab, max_len=max_len, beam_size=beam_size
                )
                fh.write(
                    json.dumps(
                        {"id": str(example["id"]), "prediction": prediction},
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
        outputs[str(bench_path)] = out_path
    return outputs


def write_references(benchmark_file: str | Path, out_path: str | Path) -> Path:
    """References file ({id, reference}) for the eval CLI, from a benchmark file."""
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        for example in read_benchmark(benchmark_file):
            reference = benchmark_reference(example)
            if reference is None:
                continue
            fh.write(
                json.dumps(
                    {"id": str(example["id"]), "reference": reference},
                    ensure_ascii=False,
                )
            )
            fh.write("\n")
    return out_path
