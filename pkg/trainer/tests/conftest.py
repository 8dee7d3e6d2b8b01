"""Session-scoped training run shared by the slow checks."""

from __future__ import annotations

import pytest
import torch

from cmptrainer.train import build_model, train_multitask
from toyworld import toy_records, vocab_for


@pytest.fixture(scope="session")
def toy500():
    """One 20-epoch training run on the 500-record toy corpus."""
    records = toy_records(500, seed=2)
    vocab = vocab_for(records)
    torch.manual_seed(0)
    model = build_model(vocab)
    history = train_multitask(records, model, vocab, epochs=20, seed=0, batch_size=32)
    return records, vocab, model, history
