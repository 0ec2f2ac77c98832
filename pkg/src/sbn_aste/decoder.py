"""Aspect/opinion decoders for both extraction directions.

Each direction first classifies every span as a trigger (Valid/Invalid), then,
for every trigger span ``j``, scores every span ``i`` as its partner over
``(POS, NEU, NEG, Invalid)``. The partner input is

    z_ij = u_i + alpha_ij * g_j,    alpha_ij = exp(u_i - g_j)   (element-wise)

where ``u`` are the partner-side FFNN features and ``g_j`` the raw trigger
span representation. The aspect FFNN and opinion FFNN are each instantiated
once and feed both directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .spans import SpanLattice

A2O, O2A = "a2o", "o2a"
DIRECTIONS = (A2O, O2A)
TRIGGER_CLASSES = ("Valid", "Invalid")
PARTNER_CLASSES = ("POS", "NEU", "NEG", "Invalid")
VALID, INVALID_TRIGGER = 0, 1
INVALID_PARTNER = 3
SENTIMENT_INDEX = {s: i for i, s in enumerate(PARTNER_CLASSES[:3])}
GATE_MODES = ("elementwise", "softmax_attention")


class ConfigurationError(ValueError):
    pass


class LabelAlignmentError(ValueError):
    pass


class FFNN(nn.Module):
    def __init__(self, dim: int, dropout: float = 0.1):
        super().__init__()
        self.hidden = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)
        self.dropout = dropout

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.hidden(x))
        h = F.dropout(h, self.dropout, self.training)
        return self.out(h)


@dataclass
class DirectionOutputs:
    direction: str
    trigger_logits: torch.Tensor  # (m, 2)
    trigger_set: tuple[int, ...]
    partner_logits: torch.Tensor  # (k, m, 4), row r belongs to trigger_set[r]

    @property
    def trigger_probs(self) -> torch.Tensor:
        return self.trigger_logits.softmax(-1)

    @property
    def partner_probs(self) -> torch.Tensor:
        return self.partner_logits.softmax(-1)


@dataclass
class DirectionLabels:
    trigger_labels: torch.Tensor  # (m,) in {VALID, INVALID_TRIGGER}
    trigger_set: tuple[int, ...]
    partner_labels: torch.Tensor  # (k, m) in PARTNER_CLASSES indices


class BidirectionalDecoder(nn.Module):
    def __init__(
        self,
        dim: int,
        dropout: float = 0.1,
        gate: str = "elementwise",
        gate_max: float = 1e4,
        ffnn_dim: int | None = None,
    ):
        super().__init__()
        if gate not in GATE_MODES:
            raise ConfigurationError(f"gate must be one of {GATE_MODES}, got {gate!r}")
        if ffnn_dim is not None and ffnn_dim != dim:
            raise ConfigurationError(
                f"FFNN output dimension {ffnn_dim} must equal the span representation dimension {dim}"
            )
        if not gate_max > 0:
            raise ConfigurationError("gate_max must be positive")
        self.dim = dim
        self.gate_mode = gate
        self.gate_max = gate_max
        self.aspect_ffnn = FFNN(dim, dropout)
        self.opinion_ffnn = FFNN(dim, dropout)
        self.ao_trigger = nn.Linear(dim, len(TRIGGER_CLASSES), bias=False)
        self.ao_partner = nn.Linear(dim, len(PARTNER_CLASSES), bias=False)
        self.oa_trigger = nn.Linear(dim, len(TRIGGER_CLASSES), bias=False)
        self.oa_partner = nn.Linear(dim, len(PARTNER_CLASSES), bias=False)

    def features(self, reps: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Aspect and opinion features for every span, shared by both directions."""
        if reps.shape[-1] != self.dim:
            raise ConfigurationError(
                f"span representations have dimension {reps.shape[-1]}, decoder expects {self.dim}"
            )
        return self.aspect_ffnn(reps), self.opinion_ffnn(reps)

    def gate(self, u: torch.Tensor, g_trig: torch.Tensor) -> torch.Tensor:
        """Gate values of shape (k, m, d) for partner features ``u`` and trigger reps ``g_trig``."""
        diff = u.unsqueeze(0) - g_trig.unsqueeze(1)
        if self.gate_mode == "elementwise":
            return torch.exp(diff.clamp(max=math.log(self.gate_max)))
        return diff.softmax(-1) * self.dim

    def heads(self, direction: str) -> tuple[nn.Linear, nn.Linear]:
        if direction == A2O:
            return self.ao_trigger, self.ao_partner
        if direction == O2A:
            return self.oa_trigger, self.oa_partner
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")

    def decode(
        self,
        reps: torch.Tensor,
        direction: str,
        trigger_set: Iterable[int] | None = None,
        features: tuple[torch.Tensor, torch.Tensor] | None = None,
    ) -> DirectionOutputs:
        trigger_head, partner_head = self.heads(direction)
        u_a, u_o = features if features is not None else self.features(reps)
        u_trig, u_part = (u_a, u_o) if direction == A2O else (u_o, u_a)
        trigger_logits = trigger_head(u_trig)
        m = reps.shape[0]
        if trigger_set is None:
            # Ties go to Invalid.
            valid = trigger_logits[:, VALID] > trigger_logits[:, INVALID_TRIGGER]
            triggers = tuple(torch.nonzero(valid).flatten().tolist())
        else:
            triggers = tuple(int(j) for j in trigger_set)
            if any(j < 0 or j >= m for j in triggers):
                raise IndexError(f"trigger indices {triggers} out of range for {m} spans")
        if triggers:
            g_trig = reps[list(triggers)]
            z = u_part.unsqueeze(0) + self.gate(u_part, g_trig) * g_trig.unsqueeze(1)
            partner_logits = partner_head(z)
        else:
            partner_logits = reps.new_zeros((0, m, len(PARTNER_CLASSES)))
        return DirectionOutputs(direction, trigger_logits, triggers, partner_logits)


def decode_direction(
    lattice: SpanLattice,
    decoder: BidirectionalDecoder,
    direction: str,
    trigger_set_override: Iterable[int] | None = None,
) -> DirectionOutputs:
    return decoder.decode(lattice.reps, direction, trigger_set_override)


def direction_labels(lattice: SpanLattice, gold: Sequence, direction: str) -> DirectionLabels:
    """Gold trigger and partner labels for one direction.

    ``gold`` holds objects with ``aspect_span``, ``opinion_span`` and
    ``sentiment``. Triplets whose terms are not lattice spans (longer than the
    cap) cannot be represented; a reachable trigger still counts as Valid.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    m = len(lattice)
    trigger_labels = torch.full((m,), INVALID_TRIGGER, dtype=torch.long)
    pairs: dict[int, list[tuple[int | None, int]]] = {}
    for t in gold:
        a, o = lattice.index(t.aspect_span), lattice.index(t.opinion_span)
        trig, part = (a, o) if direction == A2O else (o, a)
        if trig is None:
            continue
        trigger_labels[trig] = VALID
        pairs.setdefault(trig, []).append((part, SENTIMENT_INDEX[t.sentiment]))
    triggers = tuple(sorted(pairs))
    partner_labels = torch.full((len(triggers), m), INVALID_PARTNER, dtype=torch.long)
    for r, j in enumerate(triggers):
        for part, label in pairs[j]:
            if part is not None:
                partner_labels[r, part] = label
    return DirectionLabels(trigger_labels, triggers, partner_labels)


def direction_loss(outputs: DirectionOutputs, labels: DirectionLabels) -> torch.Tensor:
    """Summed cross-entropy of the trigger head and of the partner head."""
    m = outputs.trigger_logits.shape[0]
    if labels.trigger_labels.shape != (m,):
        raise LabelAlignmentError(
            f"trigger labels have shape {tuple(labels.trigger_labels.shape)}, expected ({m},)"
        )
    if tuple(labels.trigger_set) != tuple(outputs.trigger_set):
        raise LabelAlignmentError("partner labels were built for a different trigger set")
    if labels.partner_labels.shape != outputs.partner_logits.shape[:2]:
        raise LabelAlignmentError(
            f"partner labels have shape {tuple(labels.partner_labels.shape)}, "
            f"expected {tuple(outputs.partner_logits.shape[:2])}"
        )
    device = outputs.trigger_logits.device
    loss = F.cross_entropy(outputs.trigger_logits, labels.trigger_labels.to(device), reduction="sum")
    if outputs.partner_logits.shape[0]:
        loss = loss + F.cross_entropy(
            outputs.partner_logits.reshape(-1, len(PARTNER_CLASSES)),
            labels.partner_labels.reshape(-1).to(device),
            reduction="sum",
        )
    return loss


def total_loss(kl, j_ao, j_oa):
    """Training objective: separation loss plus both direction losses, unweighted."""
    return kl + j_ao + j_oa
