"""The span-level bidirectional network: encoder, span lattice, decoders."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .config import TrainConfig
from .data import Sentence
from .decoder import A2O, O2A, BidirectionalDecoder, direction_labels, direction_loss, total_loss
from .encoder import PretrainedEncoder, Vocabulary, build_encoder
from .inference import PredictedTriplet, assemble, resolve_conflicts, union
from .separation import separation_loss
from .spans import SpanLattice, build_lattice


@dataclass
class LossBreakdown:
    j_kl: torch.Tensor
    j_a2o: torch.Tensor
    j_o2a: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        return total_loss(self.j_kl, self.j_a2o, self.j_o2a)

    def as_floats(self) -> dict[str, float]:
        parts = {"loss": self.total, "j_kl": self.j_kl, "j_a2o": self.j_a2o, "j_o2a": self.j_o2a}
        return {k: float(torch.as_tensor(v).detach()) for k, v in parts.items()}


class SpanBidirectionalNetwork(nn.Module):
    def __init__(self, config: TrainConfig, vocab: Vocabulary | None = None, encoder: nn.Module | None = None):
        super().__init__()
        self.config = config
        self.encoder = encoder if encoder is not None else build_encoder(config.encoder, vocab)
        dim = self.encoder.dim * (2 if config.pooling == "endpoint_concat" else 1)
        self.decoder = BidirectionalDecoder(dim, config.dropout, config.gate, config.gate_max)

    @property
    def vocab(self) -> Vocabulary | None:
        return getattr(self.encoder, "vocab", None)

    def encoder_parameters(self) -> list[nn.Parameter]:
        if isinstance(self.encoder, PretrainedEncoder) and self.encoder.projection is not None:
            proj = {id(p) for p in self.encoder.projection.parameters()}
            return [p for p in self.encoder.parameters() if id(p) not in proj]
        return list(self.encoder.parameters())

    def head_parameters(self) -> list[nn.Parameter]:
        enc = {id(p) for p in self.encoder_parameters()}
        return [p for p in self.parameters() if id(p) not in enc]

    def lattice(self, sentence: Sentence | Sequence[str]) -> SpanLattice:
        tokens = sentence.tokens if isinstance(sentence, Sentence) else tuple(sentence)
        mode = "train" if self.training else "eval"
        enc = self.encoder.encode(tokens, mode)
        return build_lattice(enc, self.config.max_span_length, self.config.pooling, self.config.span_length_semantics)

    def losses(self, sentence: Sentence) -> LossBreakdown:
        """Loss components for one sentence, partner heads fed the gold triggers."""
        lat = self.lattice(sentence)
        kl = separation_loss(lat, self.config.loss)
        feats = self.decoder.features(lat.reps)
        zero = lat.reps.new_zeros(())
        parts = {}
        for direction, enabled in ((A2O, self.config.use_a2o), (O2A, self.config.use_o2a)):
            if not enabled:
                parts[direction] = zero
                continue
            labels = direction_labels(lat, sentence.gold, direction)
            out = self.decoder.decode(lat.reps, direction, labels.trigger_set, feats)
            parts[direction] = direction_loss(out, labels)
        return LossBreakdown(kl, parts[A2O], parts[O2A])

    @torch.no_grad()
    def predict_sentence(self, sentence: Sentence | Sequence[str]) -> list[PredictedTriplet]:
        lat = self.lattice(sentence)
        feats = self.decoder.features(lat.reps)
        out_ao = self.decoder.decode(lat.reps, A2O, features=feats) if self.config.use_a2o else None
        out_oa = self.decoder.decode(lat.reps, O2A, features=feats) if self.config.use_o2a else None
        t_ao, t_oa = assemble(out_ao, out_oa, lat)
        if self.config.resolve_conflicts:
            return resolve_conflicts(t_ao, t_oa)
        return union(t_ao, t_oa)

    def predict(self, sentences: Sequence[Sentence]) -> dict[str, list[PredictedTriplet]]:
        was_training = self.training
        self.eval()
        try:
            return {s.id: self.predict_sentence(s) for s in sentences}
        finally:
            self.train(was_training)
