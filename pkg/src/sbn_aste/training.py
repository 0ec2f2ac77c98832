"""Mini-batch training with dev-set model selection."""

from __future__ import annotations

import copy
import json
import logging
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .config import TrainConfig
from .data import Sentence
from .encoder import Vocabulary
from .evaluation import score
from .model import SpanBidirectionalNetwork

logger = logging.getLogger(__name__)


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, components: dict[str, float]):
        self.epoch, self.batch, self.components = epoch, batch, components
        parts = ", ".join(f"{k}={v}" for k, v in components.items())
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}: {parts}")


@dataclass
class Checkpoint:
    model_state: dict
    optimizer_state: dict
    epoch: int
    dev_f1: float
    config: dict
    fingerprint: str
    vocab: list[str] | None = None

    def save(self, path: str | Path) -> None:
        torch.save(self.__dict__, path)

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        return cls(**torch.load(path, map_location="cpu", weights_only=False))

    def build_model(self, encoder=None) -> SpanBidirectionalNetwork:
        from .config import from_dict

        config = from_dict(_flatten(self.config))
        vocab = Vocabulary(self.vocab[2:]) if self.vocab is not None else None
        model = SpanBidirectionalNetwork(config, vocab, encoder)
        model.load_state_dict(self.model_state)
        model.eval()
        return model


def _flatten(config: dict) -> dict:
    flat = {}
    for k, v in config.items():
        if isinstance(v, dict):
            flat.update({f"{k}.{kk}": vv for kk, vv in v.items()})
        else:
            flat[k] = v
    return flat


@dataclass
class TrainResult:
    model: SpanBidirectionalNetwork
    checkpoint: Checkpoint
    log: list[dict] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        return self.checkpoint.epoch

    @property
    def best_dev_f1(self) -> float:
        return self.checkpoint.dev_f1


def seed_everything(seed: int, deterministic: bool = False) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


def build_optimizer(model: SpanBidirectionalNetwork, config: TrainConfig) -> torch.optim.Optimizer:
    groups = [
        {"params": model.encoder_parameters(), "lr": config.encoder_lr},
        {"params": model.head_parameters(), "lr": config.head_lr},
    ]
    return torch.optim.AdamW([g for g in groups if g["params"]], weight_decay=config.weight_decay)


def evaluate(model: SpanBidirectionalNetwork, sentences: Sequence[Sentence]):
    predictions = model.predict(sentences)
    return score(predictions, {s.id: s.gold for s in sentences})


def train(
    config: TrainConfig,
    train_set: Sequence[Sentence],
    dev_set: Sequence[Sentence],
    *,
    encoder: torch.nn.Module | None = None,
    log_path: str | Path | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train, evaluating on ``dev_set`` after every epoch; returns the best epoch's model.

    Ties in dev F1 keep the earlier epoch.
    """
    if not train_set:
        raise ValueError("empty training set")
    seed_everything(config.seed, config.deterministic)
    vocab = None
    if encoder is None and config.encoder.kind == "toy":
        vocab = Vocabulary.build((s.tokens for s in train_set), config.encoder.vocab_size)
    model = SpanBidirectionalNetwork(config, vocab, encoder)
    optimizer = build_optimizer(model, config)
    order_rng = torch.Generator().manual_seed(config.seed)

    log: list[dict] = []
    best: Checkpoint | None = None
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, config.epochs + 1):
            t0 = time.perf_counter()
            model.train()
            order = torch.randperm(len(train_set), generator=order_rng).tolist()
            sums = dict.fromkeys(("loss", "j_kl", "j_a2o", "j_o2a"), 0.0)
            n_batches = 0
            for b, start in enumerate(range(0, len(order), config.batch_size)):
                batch = [train_set[i] for i in order[start : start + config.batch_size]]
                parts = [model.losses(s) for s in batch]
                j_kl = sum(p.j_kl for p in parts) / len(batch)
                j_ao = sum(p.j_a2o for p in parts) / len(batch)
                j_oa = sum(p.j_o2a for p in parts) / len(batch)
                loss = j_kl + j_ao + j_oa
                components = {k: float(v.detach()) for k, v in (("loss", loss), ("j_kl", j_kl), ("j_a2o", j_ao), ("j_o2a", j_oa))}
                if not all(math.isfinite(v) for v in components.values()):
                    raise NonFiniteLossError(epoch, b, components)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                for k, v in components.items():
                    sums[k] += v
                n_batches += 1
            report = evaluate(model, dev_set)
            record = {
                "epoch": epoch,
                **{k: v / n_batches for k, v in sums.items()},
                "steps": n_batches,
                "dev_precision": report.precision,
                "dev_recall": report.recall,
                "dev_f1": report.f1,
                "seconds": time.perf_counter() - t0,
            }
            log.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
            logger.info(
                "epoch %d loss=%.4f kl=%.4f a2o=%.4f o2a=%.4f dev_f1=%.4f",
                epoch, record["loss"], record["j_kl"], record["j_a2o"], record["j_o2a"], report.f1,
            )
            if on_epoch:
                on_epoch(record)
            if best is None or report.f1 > best.dev_f1:
                best = Checkpoint(
                    copy.deepcopy(model.state_dict()),
                    copy.deepcopy(optimizer.state_dict()),
                    epoch,
                    report.f1,
                    config.to_dict(),
                    config.fingerprint(),
                    list(vocab.itos) if vocab is not None else None,
                )
    finally:
        if log_fh:
            log_fh.close()
    model.load_state_dict(best.model_state)
    model.eval()
    return TrainResult(model, best, log)
