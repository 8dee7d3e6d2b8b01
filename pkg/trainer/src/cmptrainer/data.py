"""Shard reading and the word-level vocabulary.

The shard format is the synthesis pipeline's wire format: line-delimited JSON
{task, source, target, meta} under a directory with manifest.json. Tokens are
whitespace words, so decoding joins with single spaces and reproduces targets
exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

TASKS = ("qa", "qag", "sum", "ti")

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ["<pad>", "<bos>", "<eos>", "<unk>"]


@dataclass
class Record:
    task: str
    source: str
    target: str


def read_shard_file(path: str | Path) -> list[Record]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(Record(obj["task"], obj["source"], obj["target"]))
    return records


def read_shards(directory: str | Path) -> list[Record]:
    """All records from a shard directory, in manifest order."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        files = [directory / s["file"] for s in manifest["shards"]]
    else:
        files = sorted(directory.glob("records-*.jsonl"))
    records: list[Record] = []
    for path in files:
        records.extend(read_shard_file(path))
    return records


class Vocab:
    """Whitespace word-level vocabulary with reserved specials."""

    def __init__(self, tokens: Sequence[str]):
        self.itos = SPECIALS + list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocab":
        seen: dict[str, None] = {}
        for text in texts:
            for token in text.split():
                seen.setdefault(token, None)
        return cls(sorted(seen))

    def encode(self, text: str, add_bos: bool = False, add_eos: bool = False) -> list[int]:
        ids = [self.stoi.get(t, UNK) for t in text.split()]
        if add_bos:
            ids = [BOS] + ids
        if add_eos:
            ids = ids + [EOS]
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        words = []
        for i in ids:
            if i in (PAD, BOS):
                continue
            if i == EOS:
                break
            words.append(self.itos[i] if 0 <= i < len(self.itos) else "<unk>")
        return " ".join(words)

    def to_json(self) -> dict:
        return {"tokens": self.itos[len(SPECIALS):]}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(obj["tokens"])
