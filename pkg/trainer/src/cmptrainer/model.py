"""A compact transformer encoder-decoder as the conditional sequence model.

Exposes log-probability of a target given a source and greedy/beam decoding.
Trained from scratch at toy scale; the joint objective is checkable at any
scale, so no pre-trained checkpoint is required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .data import BOS, EOS, PAD, UNK, Vocab


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 96
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 192
    max_len: int = 512
    dropout: float = 0.0


class Seq2SeqModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.d_model, padding_idx=PAD)
        self.position_embedding = nn.Embedding(config.max_len, config.d_model)
        encoder_layer = nn.TransformerEncoderLayer(
            config.d_model,
            config.n_heads,
            config.d_ff,
            dropout=config.dropout,
            batch_first=True,
        )
        decoder_layer = nn.TransformerDecoderLayer(
            config.d_model,
            config.n_heads,
            config.d_ff,
            dropout=config.dropout,
            batch_first=True,
        )
        # The nested-tensor fast path is disabled for deterministic behavior
        # across train/eval and non-trivial padding masks.
        self.encoder = nn.TransformerEncoder(
            encoder_layer, config.n_layers, enable_nested_tensor=False
        )
        self.decoder = nn.TransformerDecoder(decoder_layer, config.n_layers)
        self.output_projection = nn.Linear(config.d_model, config.vocab_size)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.size(1), device=ids.device).clamp(
            max=self.config.max_len - 1
        )
        return self.token_embedding(ids) * math.sqrt(self.config.d_model) + self.position_embedding(
            positions
        )

    def encode(self, source_ids: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        pad_mask = source_ids == PAD
        memory = self.encoder(self._embed(source_ids), src_key_padding_mask=pad_mask)
        return memory, pad_mask

    def decoder_logits(
        self,
        target_in: torch.Tensor,
        memory: torch.Tensor,
        memory_pad_mask: torch.Tensor,
    ) -> torch.Tensor:
        length = target_in.size(1)
        causal = torch.triu(
            torch.ones(length, length, dtype=torch.bool, device=target_in.device), 1
        )
        hidden = self.decoder(
            self._embed(target_in),
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=target_in == PAD,
            memory_key_padding_mask=memory_pad_mask,
        )
        return self.output_projection(hidden)

    def forward(self, source_ids: torch.Tensor, target_in: torch.Tensor) -> torch.Tensor:
        memory, pad_mask = self.encode(source_ids)
        return self.decoder_logits(target_in, memory, pad_mask)

    # -- the abstract model surface -------------------------------------

    @torch.no_grad()
    def log_prob(self, source: str, target: str, vocab: Vocab) -> float:
        """Sum log P(target tokens | source); finite for non-empty sequences."""
        self.eval()
        source_ids = torch.tensor(
            [vocab.encode(source)[: self.config.max_len] or [UNK]], dtype=torch.long
        )
        target_ids = vocab.encode(target, add_bos=True, add_eos=True)
        target_in = torch.tensor([target_ids[:-1]], dtype=torch.long)
        target_out = torch.tensor([target_ids[1:]], dtype=torch.long)
        logits = self(source_ids, target_in)
        log_probs = torch.log_softmax(logits, dim=-1)
        picked = log_probs.gather(-1, target_out.unsqueeze(-1)).squeeze(-1)
        return float(picked.sum())

    @torch.no_grad()
    def generate(
        self,
        source: str,
        vocab: Vocab,
        max_len: int = 64,
        beam_size: int = 1,
    ) -> str:
        """Greedy decoding (beam_size 1) or a small beam search."""
        self.eval()
        source_ids = torch.tensor(
            [vocab.encode(source)[: self.config.max_len] or [UNK]], dtype=torch.long
        )
        memory, pad_mask = self.encode(source_ids)
        if beam_size <= 1:
            ids = [BOS]
            for _ in range(max_len):
                target_in = torch.tensor([ids], dtype=torch.long)
                logits = self.decoder_logits(target_in, memory, pad_mask)
                next_id = int(logits[0, -1].argmax())
                ids.append(next_id)
                if next_id == EOS:
                    break
            return vocab.decode(ids[1:])
        beams: list[tuple[float, list[int], bool]] = [(0.0, [BOS], False)]
        for _ in range(max_len):
            if all(done for _, _, done in beams):
                break
            expanded: list[tuple[float, list[int], bool]] = []
            for score, ids, done in beams:
                if done:
                    expanded.append((score, ids, True))
                    continue
                target_in = torch.tensor([ids], dtype=torch.long)
                logits = self.decoder_logits(target_in, memory, pad_mask)
                log_probs = torch.log_softmax(logits[0, -1], dim=-1)
                top = torch.topk(log_probs, beam_size)
                for value, index in zip(top.values.tolist(), top.indices.tolist()):
                    expanded.append((score + value, ids + [index], index == EOS))
            expanded.sort(key=lambda b: (-b[0], b[1]))
            beams = expanded[:beam_size]
        return vocab.decode(beams[0][1][1:])


def save_model(model: Seq2SeqModel, vocab: Vocab, path) -> None:
    torch.save(
        {
            "config": model.config.__dict__,
            "state_dict": model.state_dict(),
            "vocab": vocab.to_json(),
        },
        path,
    )


def load_model(path) -> tuple[Seq2SeqModel, Vocab]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = ModelConfig(**payload["config"])
    model = Seq2SeqModel(config)
    model.load_state_dict(payload["state_dict"])
    vocab = Vocab.from_json(payload["vocab"])
    return model, vocab
