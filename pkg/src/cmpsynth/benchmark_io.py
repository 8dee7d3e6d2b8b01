"""Loading operator-supplied dataset files (JSON array or JSON lines)."""

from __future__ import annotations

import json
from pathlib import Path


def load_json_records(path: str | Path) -> list[dict]:
    """Read a dataset file as a list of dicts.

    Accepts a single JSON array (the multi-hop QA distribution format) or
    line-delimited JSON objects.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError(f"{path}: expected a JSON array")
        return data
    records = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            records.append(json.loads(line))
    return records
