"""Two-stage training: warm start on augmented existing links, then
expansion on real added links.

Stage 1 samples up to `stage1_points` existing-link examples and applies
dynamic context removal per visit; stage 2 continues from that state on all
added-link data with no augmentation. Either stage can be disabled to
reproduce the single-stage ablation arms. The encoder and head train under
separate learning rates.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

import torch

from .augment import DEFAULT_WEIGHTS, augment_gold_text
from .data import Example
from .inputs import ScorerInput
from .losses import LOSSES
from .model import ModelConfig, RelevanceModel, inputs_for_example


@dataclass(frozen=True)
class TrainingConfig:
    encoder_lr: float = 1e-5
    head_lr: float = 1e-4
    negatives: int = 9
    stage1_points: int = 20_000
    stage1_epochs: int = 4
    stage2_epochs: int = 2
    removal_weights: tuple = DEFAULT_WEIGHTS
    loss: str = "listwise"
    languages: tuple = ("en",)
    stages: tuple = ("stage1", "stage2")
    stage1_sampling: str = "total"  # or "per_language"
    batch_examples: int = 4
    max_steps: int | None = None
    seed: int = 13

    def __post_init__(self):
        positive = (
            self.encoder_lr, self.head_lr, self.negatives, self.stage1_points,
            self.stage1_epochs, self.stage2_epochs, self.batch_examples,
        )
        if any(v <= 0 for v in positive):
            raise ValueError("all training numbers must be positive")
        if abs(sum(self.removal_weights) - 1.0) > 1e-9 or any(w < 0 for w in self.removal_weights):
            raise ValueError("removal weights must be non-negative and sum to 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {sorted(LOSSES)}")
        if not self.stages:
            raise ValueError("at least one training stage must be enabled")
        unknown = set(self.stages) - {"stage1", "stage2"}
        if unknown:
            raise ValueError(f"unknown stages {sorted(unknown)}")


@dataclass
class TrainResult:
    model: RelevanceModel
    stage_losses: dict = field(default_factory=dict)  # stage -> per-epoch mean loss
    steps: int = 0


def _with_gold_text(example: Example, text: str) -> list[ScorerInput]:
    items = inputs_for_example(example)
    gold = items[example.gold_index]
    items[example.gold_index] = replace(gold, candidate_text=text)
    return items


def _select_stage1(examples: list[Example], config: TrainingConfig, rng: random.Random):
    usable = [e for e in examples if e.provenance is not None]
    if config.stage1_sampling == "per_language":
        selected = []
        by_lang: dict[str, list[Example]] = {}
        for e in usable:
            by_lang.setdefault(e.lang, []).append(e)
        for lang in sorted(by_lang):
            pool = by_lang[lang]
            take = min(config.stage1_points, len(pool))
            selected.extend(pool if take == len(pool) else rng.sample(pool, take))
        return selected
    if len(usable) <= config.stage1_points:
        return list(usable)
    return rng.sample(usable, config.stage1_points)


def _run_stage(
    model: RelevanceModel,
    optimizer,
    examples: list[Example],
    epochs: int,
    config: TrainingConfig,
    rng: random.Random,
    *,
    augment: bool,
    steps_done: int,
) -> tuple[list[float], int]:
    loss_fn = LOSSES[config.loss]
    epoch_losses = []
    model.train()
    for _ in range(epochs):
        order = list(range(len(examples)))
        rng.shuffle(order)
        total, batches = 0.0, 0
        for start in range(0, len(order), config.batch_examples):
            if config.max_steps is not None and steps_done >= config.max_steps:
                break
            batch = [examples[i] for i in order[start : start + config.batch_examples]]
            flat_items, layout = [], []
            for example in batch:
                if augment:
                    _, gold_text = augment_gold_text(example, config.removal_weights, rng)
                    items = _with_gold_text(example, gold_text)
                else:
                    items = inputs_for_example(example)
                layout.append((len(flat_items), len(items), example.gold_index))
                flat_items.extend(items)
            scores = model.encode_batch(flat_items)
            losses = [
                loss_fn(scores[offset : offset + size], gold)
                for offset, size, gold in layout
            ]
            loss = torch.stack(losses).mean()
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            batches += 1
            steps_done += 1
        if batches:
            epoch_losses.append(total / batches)
        if config.max_steps is not None and steps_done >= config.max_steps:
            break
    return epoch_losses, steps_done


def train(
    config: TrainingConfig,
    stage1_examples: list[Example],
    stage2_examples: list[Example],
    *,
    model_config: ModelConfig = ModelConfig(),
) -> TrainResult:
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    model = RelevanceModel(model_config)
    optimizer = torch.optim.AdamW(
        [
            {"params": model.encoder.parameters(), "lr": config.encoder_lr},
            {"params": model.head.parameters(), "lr": config.head_lr},
        ]
    )
    result = TrainResult(model=model)
    steps = 0
    if "stage1" in config.stages:
        if not stage1_examples:
            raise ValueError("stage1 enabled but no stage-1 examples given")
        selected = _select_stage1(stage1_examples, config, rng)
        losses, steps = _run_stage(
            model, optimizer, selected, config.stage1_epochs, config, rng,
            augment=True, steps_done=steps,
        )
        result.stage_losses["stage1"] = losses
    if "stage2" in config.stages:
        if not stage2_examples:
            raise ValueError("stage2 enabled but no stage-2 examples given")
        losses, steps = _run_stage(
            model, optimizer, stage2_examples, config.stage2_epochs, config, rng,
            augment=False, steps_done=steps,
        )
        result.stage_losses["stage2"] = losses
    result.steps = steps
    return result


def hits_at_1(model: RelevanceModel, examples: list[Example]) -> float:
    """Fraction of examples whose gold candidate gets the top score."""
    if not examples:
        raise ValueError("no examples to evaluate")
    correct = 0
    for example in examples:
        scores = model.encode_and_score(inputs_for_example(example))
        best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        correct += int(best == example.gold_index)
    return correct / len(examples)


def save_checkpoint(
    path, result: TrainResult, config: TrainingConfig, data_hashes: dict | None = None
) -> None:
    """Single-file archive: config echo, weights, and the content hashes of
    the training data files (evaluation provenance)."""
    from dataclasses import asdict

    torch.save(
        {
            "format": "locei-scorer/1",
            "model_config": asdict(result.model.config),
            "training_config": asdict(config),
            "stage_losses": result.stage_losses,
            "steps": result.steps,
            "data_hashes": data_hashes or {},
            "state_dict": result.model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> RelevanceModel:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != "locei-scorer/1":
        raise ValueError(f"{path} is not a locei-scorer checkpoint")
    model = RelevanceModel(ModelConfig(**payload["model_config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
