"""Scorer acceptance suite, printing one pass/fail line per criterion.

Run with `pytest tests/test_acceptance.py -v -s`.
"""
import math

import torch

from locei_scorer.losses import listwise_loss
from locei_scorer.model import ModelConfig
from locei_scorer.training import TrainingConfig, hits_at_1, train

from synthetic import overfit_set, two_stage_benchmark


def report(name: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def test_listwise_loss_criteria():
    """Uniform-score loss = ln(N+1) within 1e-9; gradient matches central
    finite differences within 1e-4 relative; shift invariance within 1e-6."""
    uniform_ok = all(
        abs(float(listwise_loss(torch.zeros(n + 1, dtype=torch.float64), 0)) - math.log(n + 1))
        <= 1e-9
        for n in (1, 4, 9, 24)
    )

    torch.manual_seed(7)
    scores = torch.randn(12, dtype=torch.float64, requires_grad=True)
    listwise_loss(scores, 5).backward()
    grad = scores.grad
    h = 1e-6
    max_rel = 0.0
    for i in range(12):
        bump = scores.detach().clone()
        bump[i] += h
        up = float(listwise_loss(bump, 5))
        bump[i] -= 2 * h
        down = float(listwise_loss(bump, 5))
        fd = (up - down) / (2 * h)
        rel = abs(fd - float(grad[i])) / max(abs(fd), abs(float(grad[i])), 1e-12)
        max_rel = max(max_rel, rel)
    grad_ok = max_rel <= 1e-4

    base = torch.randn(9, dtype=torch.float64)
    shift_ok = (
        abs(float(listwise_loss(base, 3)) - float(listwise_loss(base + 11.5, 3))) < 1e-6
        and int(torch.argmax(base)) == int(torch.argmax(base + 11.5))
    )
    report(
        "listwise-loss",
        uniform_ok and grad_ok and shift_ok,
        f"max grad rel err {max_rel:.2e}",
    )


def test_overfit_and_two_stage_expansion():
    """50-example overfit reaches training Hits@1 = 1.0 within 200 steps;
    stage-1 + stage-2 beats stage-1-only on held-out missing examples."""
    examples = overfit_set(n=50)
    overfit_config = TrainingConfig(
        encoder_lr=2e-3, head_lr=5e-3, stages=("stage2",), stage2_epochs=16,
        batch_examples=4, max_steps=200, seed=3,
    )
    small = ModelConfig(d_model=64, layers=2, heads=2, ffn=128, max_len=64)
    overfit_result = train(overfit_config, [], examples, model_config=small)
    overfit_hits = hits_at_1(overfit_result.model, examples)
    overfit_ok = overfit_result.steps <= 200 and overfit_hits == 1.0

    stage1, stage2, heldout = two_stage_benchmark(seed=11)
    common = dict(
        encoder_lr=2e-3, head_lr=5e-3, stage1_points=96, stage1_epochs=3,
        stage2_epochs=8, batch_examples=8, seed=4,
    )
    stage1_only = train(
        TrainingConfig(stages=("stage1",), **common), stage1, [], model_config=small
    )
    h_stage1 = hits_at_1(stage1_only.model, heldout)
    two_stage = train(
        TrainingConfig(stages=("stage1", "stage2"), **common), stage1, stage2,
        model_config=small,
    )
    h_both = hits_at_1(two_stage.model, heldout)
    expansion_ok = h_both > h_stage1

    report(
        "training-pipeline",
        overfit_ok and expansion_ok,
        f"overfit hits@1={overfit_hits:.2f} in {overfit_result.steps} steps; "
        f"missing held-out: stage1-only={h_stage1:.3f} two-stage={h_both:.3f}",
    )
