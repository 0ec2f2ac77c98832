"""Token encoders: one contextual vector per whitespace token.

Two implementations share the ``encode(tokens, mode)`` contract:

* :class:`ToyEncoder` -- word embeddings followed by residual 1-D convolutions.
  Small enough to train from scratch on CPU in seconds.
* :class:`PretrainedEncoder` -- wraps a Hugging Face encoder and folds subword
  pieces back onto the original tokens.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

ENCODER_KINDS = ("toy", "pretrained_adapter")
AGGREGATIONS = ("first", "mean")
CACHE_ENV = "SBN_ASTE_CACHE_DIR"


class SequenceTooLongError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "toy"
    d: int = 64
    dropout: float = 0.1
    # toy encoder
    vocab_size: int = 20000
    window: int = 1
    depth: int = 1
    max_length: int = 512
    # pretrained adapter
    model_name: str = "bert-base-cased"
    aggregation: str = "first"

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"encoder kind must be one of {ENCODER_KINDS}, got {self.kind!r}")
        if self.d <= 0:
            raise ValueError("encoder dimension d must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.window < 0 or self.depth < 0:
            raise ValueError("window and depth must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_mode(mode: str) -> bool:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return mode == "train"


class Vocabulary:
    """Token-to-id map with padding (0) and unknown (1) entries."""

    PAD, UNK = "<pad>", "<unk>"

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos = [self.PAD, self.UNK] + [t for t in tokens if t not in (self.PAD, self.UNK)]
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]], max_size: int | None = None) -> "Vocabulary":
        counts = Counter(tok for tokens in sentences for tok in tokens)
        # Ties broken alphabetically so the vocabulary is deterministic.
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        if max_size is not None:
            ordered = ordered[: max(0, max_size - 2)]
        return cls(ordered)

    def __len__(self) -> int:
        return len(self.itos)

    def lookup(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, 1) for t in tokens]


class ToyEncoder(nn.Module):
    def __init__(self, config: EncoderConfig, vocab: Vocabulary):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.dim = config.d
        self.embedding = nn.Embedding(len(vocab), config.d, padding_idx=0)
        kernel = 2 * config.window + 1
        self.convs = nn.ModuleList(
            nn.Conv1d(config.d, config.d, kernel, padding=config.window) for _ in range(config.depth)
        )

    def encode(self, tokens: Sequence[str], mode: str = "eval") -> torch.Tensor:
        training = _check_mode(mode)
        if not tokens:
            raise ValueError("cannot encode an empty sentence")
        if len(tokens) > self.config.max_length:
            raise SequenceTooLongError(
                f"sentence has {len(tokens)} tokens, encoder max_length is {self.config.max_length}"
            )
        ids = torch.tensor(self.vocab.lookup(tokens), device=self.embedding.weight.device)
        x = self.embedding(ids)
        x = F.dropout(x, self.config.dropout, training)
        for conv in self.convs:
            x = x + torch.tanh(conv(x.T.unsqueeze(0)).squeeze(0).T)
        return x

    forward = encode


class PretrainedEncoder(nn.Module):
    """Adapter around a Hugging Face token encoder.

    ``model`` and ``tokenizer`` may be passed in directly; otherwise they are
    loaded from ``config.model_name`` (using ``$SBN_ASTE_CACHE_DIR`` as cache).
    If ``config.d`` differs from the model's hidden size a linear projection is
    appended.
    """

    def __init__(self, config: EncoderConfig, model=None, tokenizer=None):
        super().__init__()
        if model is None or tokenizer is None:
            from transformers import AutoModel, AutoTokenizer

            cache_dir = os.environ.get(CACHE_ENV)
            tokenizer = tokenizer or AutoTokenizer.from_pretrained(config.model_name, cache_dir=cache_dir)
            model = model or AutoModel.from_pretrained(config.model_name, cache_dir=cache_dir)
        if not getattr(tokenizer, "is_fast", False):
            raise TypeError("the pretrained adapter needs a fast tokenizer (word_ids support)")
        self.config = config
        self.model = model
        self.tokenizer = tokenizer
        hidden = model.config.hidden_size
        self.projection = nn.Linear(hidden, config.d) if hidden != config.d else None
        self.dim = config.d
        self.max_length = min(
            getattr(model.config, "max_position_embeddings", 512),
            tokenizer.model_max_length or 512,
        )

    def encode(self, tokens: Sequence[str], mode: str = "eval") -> torch.Tensor:
        training = _check_mode(mode)
        if not tokens:
            raise ValueError("cannot encode an empty sentence")
        batch = self.tokenizer(list(tokens), is_split_into_words=True, return_tensors="pt", truncation=False)
        n_pieces = batch["input_ids"].shape[1]
        if n_pieces > self.max_length:
            raise SequenceTooLongError(
                f"sentence needs {n_pieces} subword positions, encoder accepts {self.max_length}"
            )
        word_ids = batch.word_ids(0)
        device = next(self.model.parameters()).device
        batch = {k: v.to(device) for k, v in batch.items()}
        was_training = self.model.training
        self.model.train(training)
        try:
            hidden = self.model(**batch).last_hidden_state[0]
        finally:
            self.model.train(was_training)
        out = aggregate_subwords(hidden, word_ids, len(tokens), self.config.aggregation)
        if self.projection is not None:
            out = self.projection(out)
        return F.dropout(out, self.config.dropout, training)

    forward = encode


def aggregate_subwords(hidden: torch.Tensor, word_ids: Sequence[int | None], n_tokens: int, rule: str = "first") -> torch.Tensor:
    """Fold subword rows onto whitespace tokens (``first`` piece or ``mean`` of pieces)."""
    pieces: list[list[int]] = [[] for _ in range(n_tokens)]
    for pos, w in enumerate(word_ids):
        if w is not None:
            pieces[w].append(pos)
    if any(not p for p in pieces):
        missing = [i for i, p in enumerate(pieces) if not p]
        raise ValueError(f"tokens {missing} produced no subword pieces")
    if rule == "first":
        return hidden[torch.tensor([p[0] for p in pieces], device=hidden.device)]
    if rule == "mean":
        return torch.stack([hidden[p].mean(dim=0) for p in pieces])
    raise ValueError(f"unknown aggregation rule {rule!r}")


def build_encoder(config: EncoderConfig, vocab: Vocabulary | None = None) -> nn.Module:
    if config.kind == "toy":
        if vocab is None:
            raise ValueError("the toy encoder needs a vocabulary")
        return ToyEncoder(config, vocab)
    return PretrainedEncoder(config)
