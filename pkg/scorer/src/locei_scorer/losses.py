"""List-wise and pointwise ranking objectives."""
from __future__ import annotations

import torch
import torch.nn.functional as F


def listwise_loss(scores: torch.Tensor, gold_index: int) -> torch.Tensor:
    """Cross-entropy over the candidate list: -log softmax(scores)[gold]."""
    if scores.dim() != 1 or scores.numel() < 1:
        raise ValueError("scores must be a non-empty 1-d tensor")
    if not 0 <= gold_index < scores.numel():
        raise ValueError(f"gold index {gold_index} outside 0..{scores.numel() - 1}")
    if not torch.isfinite(scores).all():
        raise ValueError("scores must be finite")
    return -F.log_softmax(scores, dim=0)[gold_index]


def pointwise_loss(scores: torch.Tensor, gold_index: int) -> torch.Tensor:
    """Independent per-candidate binary cross-entropy, gold=1 / negatives=0."""
    if scores.dim() != 1 or scores.numel() < 1:
        raise ValueError("scores must be a non-empty 1-d tensor")
    if not 0 <= gold_index < scores.numel():
        raise ValueError(f"gold index {gold_index} outside 0..{scores.numel() - 1}")
    labels = torch.zeros_like(scores)
    labels[gold_index] = 1.0
    return F.binary_cross_entropy_with_logits(scores, labels)


LOSSES = {"listwise": listwise_loss, "pointwise": pointwise_loss}
