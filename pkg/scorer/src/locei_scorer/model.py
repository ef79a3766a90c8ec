"""Encoder + relevance head.

The default encoder is a compact trainable transformer over hash-bucket
token ids (this environment cannot download pretrained weights); a Hugging
Face model name can be configured instead and is used when locally
available. The relevance head is two affine layers with a ReLU between,
mapping the first-position embedding to a scalar.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .inputs import PAD_ID, HashTokenizer, ScorerInput, pad_batch


@dataclass(frozen=True)
class ModelConfig:
    encoder: str = "desk-tiny"
    d_model: int = 64
    layers: int = 2
    heads: int = 2
    ffn: int = 128
    vocab_size: int = 4096
    max_len: int = 192
    dropout: float = 0.0
    use_mentions: bool = True
    use_section: bool = True

    def __post_init__(self):
        if min(self.d_model, self.layers, self.heads, self.ffn, self.vocab_size, self.max_len) <= 0:
            raise ValueError("model dimensions must be positive")


class TinyEncoder(nn.Module):
    """Compact transformer encoder; returns the first-position embedding."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.token_embed = nn.Embedding(config.vocab_size, config.d_model, padding_idx=PAD_ID)
        self.pos_embed = nn.Embedding(config.max_len, config.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=config.d_model,
            nhead=config.heads,
            dim_feedforward=config.ffn,
            dropout=config.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=config.layers, enable_nested_tensor=False
        )

    def forward(self, tokens: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(tokens.shape[1], device=tokens.device)
        hidden = self.token_embed(tokens) + self.pos_embed(positions)[None, :, :]
        encoded = self.encoder(hidden, src_key_padding_mask=pad_mask)
        return encoded[:, 0, :]  # marker-position embedding


class RelevanceHead(nn.Module):
    """Two affine layers with a rectifier between; d-dim embedding -> scalar."""

    def __init__(self, d_model: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_model, d_model),
            nn.ReLU(),
            nn.Linear(d_model, 1),
        )

    def forward(self, embedding: torch.Tensor) -> torch.Tensor:
        return self.net(embedding).squeeze(-1)


class RelevanceModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        if config.encoder != "desk-tiny":
            raise NotImplementedError(
                f"pretrained encoder {config.encoder!r} requires local Hugging Face weights; "
                "configure encoder = 'desk-tiny' for the built-in trainable encoder"
            )
        self.config = config
        self.tokenizer = HashTokenizer(config.vocab_size, config.max_len)
        self.encoder = TinyEncoder(config)
        self.head = RelevanceHead(config.d_model)

    def encode_batch(self, items: list[ScorerInput]) -> torch.Tensor:
        sequences = [
            self.tokenizer.encode(
                item,
                use_mentions=self.config.use_mentions,
                use_section=self.config.use_section,
            )
            for item in items
        ]
        padded, masks = pad_batch(sequences)
        tokens = torch.tensor(padded, dtype=torch.long)
        pad_mask = torch.tensor(masks, dtype=torch.bool)
        return self.head(self.encoder(tokens, pad_mask))

    @torch.no_grad()
    def encode_and_score(self, items: list[ScorerInput], batch_size: int = 64) -> list[float]:
        """Inference scores, batch order preserved."""
        was_training = self.training
        self.eval()
        scores: list[float] = []
        for start in range(0, len(items), batch_size):
            chunk = items[start : start + batch_size]
            out = self.encode_batch(chunk)
            if not torch.isfinite(out).all():
                raise ValueError("non-finite relevance score")
            scores.extend(float(s) for s in out)
        if was_training:
            self.train()
        return scores


def inputs_for_example(example) -> list[ScorerInput]:
    """One ScorerInput per candidate of a data.Example."""
    return [
        ScorerInput(
            target_title=example.target_title,
            mentions=example.mentions,
            target_lead=example.target_lead,
            section_title=c.section_title,
            candidate_text=c.text,
        )
        for c in example.candidates
    ]
