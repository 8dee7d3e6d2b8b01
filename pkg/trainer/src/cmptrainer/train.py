"""Multi-task training on mixed batches: the total loss is the sum of the
four per-task negative log-likelihoods, reported per epoch."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

import torch
from torch import nn

from .data import BOS, EOS, PAD, UNK, Record, TASKS, Vocab
from .model import ModelConfig, Seq2SeqModel

logger = logging.getLogger("cmptrainer")


@dataclass
class LossReport:
    """Per-epoch mean per-record NLL by task; total is their sum."""

    l_qa: float
    l_qag: float
    l_sum: float
    l_ti: float
    total: float

    @classmethod
    def from_sums(cls, sums: dict[str, float], counts: dict[str, int]) -> "LossReport":
        per_task = {
            task: (sums[task] / counts[task]) if counts[task] else 0.0 for task in TASKS
        }
        return cls(
            l_qa=per_task["qa"],
            l_qag=per_task["qag"],
            l_sum=per_task["sum"],
            l_ti=per_task["ti"],
            total=per_task["qa"] + per_task["qag"] + per_task["sum"] + per_task["ti"],
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "l_qa": self.l_qa,
            "l_qag": self.l_qag,
            "l_sum": self.l_sum,
            "l_ti": self.l_ti,
            "total": self.total,
        }


def _pad_batch(rows: list[list[int]]) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor(
        [r + [PAD] * (width - len(r)) for r in rows], dtype=torch.long
    )


def _encode_batch(
    records: list[Record], vocab: Vocab, max_source_len: int, max_target_len: int
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    sources = [vocab.encode(r.source)[:max_source_len] or [UNK] for r in records]
    targets = [
        [BOS] + vocab.encode(r.target)[:max_target_len] + [EOS] for r in records
    ]
    source_ids = _pad_batch(sources)
    target_ids = _pad_batch(targets)
    return source_ids, target_ids[:, :-1], target_ids[:, 1:]


def train_multitask(
    records: list[Record],
    model: Seq2SeqModel,
    vocab: Vocab,
    epochs: int,
    seed: int,
    batch_size: int = 16,
    learning_rate: float = 3e-3,
    max_source_len: int = 256,
    max_target_len: int = 64,
) -> list[LossReport]:
    """Optimize the summed per-task NLL over uniformly mixed batches.

    Deterministic given the seed. Tasks absent from the records get a
    warning and a zero loss term.
    """
    if epochs <= 0:
        return []
    present = {r.task for r in records}
    for task in TASKS:
        if task not in present:
            logger.warning("task %r absent from shards; its loss term is 0", task)
    torch.manual_seed(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    loss_fn = nn.CrossEntropyLoss(ignore_index=PAD, reduction="none")
    order_rng = random.Random(seed)
    history: list[LossReport] = []
    for _ in range(epochs):
        model.train()
        shuffled = list(records)
        order_rng.shuffle(shuffled)
        sums = {task: 0.0 for task in TASKS}
        counts = {task: 0 for task in TASKS}
        for start in range(0, len(shuffled), batch_size):
            batch = shuffled[start : start + batch_size]
            source_ids, target_in, target_out = _encode_batch(
                batch, vocab, max_source_len, max_target_len
            )
            logits = model(source_ids, target_in)
            token_nll = loss_fn(
                logits.reshape(-1, logits.size(-1)), target_out.reshape(-1)
            ).reshape(target_out.shape)
            record_nll = token_nll.sum(dim=1)
            loss = record_nll.mean()
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            for record, nll in zip(batch, record_nll.detach().tolist()):
                sums[record.task] += nll
                counts[record.task] += 1
        history.append(LossReport.from_sums(sums, counts))
    return history


@torch.no_grad()
def sequence_exact_match(
    records: list[Record], model: Seq2SeqModel, vocab: Vocab, max_len: int = 64
) -> float:
    """Fraction of records whose greedy decode equals the target exactly."""
    if not records:
        return 0.0
    hits = 0
    for record in records:
        if model.generate(record.source, vocab, max_len=max_len) == record.target:
            hits += 1
    return hits / len(records)


def build_model(vocab: Vocab, **overrides) -> Seq2SeqModel:
    config = ModelConfig(vocab_size=len(vocab), **overrides)
    return Seq2SeqModel(config)
