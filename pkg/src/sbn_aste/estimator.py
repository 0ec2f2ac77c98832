"""scikit-learn style front end for the span-level bidirectional network."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .config import TrainConfig
from .encoder import EncoderConfig
from .evaluation import EvalReport, score
from .inference import PredictedTriplet
from .separation import SeparationConfig
from .training import Checkpoint, train
from .validation import check_sentences


class SpanBidirectionalExtractor(BaseEstimator):
    """Aspect sentiment triplet extractor.

    ``fit`` takes sentences with gold triplets, ``predict`` returns one list of
    :class:`~sbn_aste.inference.PredictedTriplet` per sentence and ``score``
    the exact-match triplet F1. Hyperparameters mirror :class:`TrainConfig`
    with the encoder and separation-loss settings flattened.
    """

    def __init__(
        self,
        encoder_kind: str = "toy",
        encoder_dim: int = 64,
        encoder_dropout: float = 0.1,
        vocab_size: int = 20000,
        window: int = 1,
        depth: int = 1,
        model_name: str = "bert-base-cased",
        aggregation: str = "first",
        loss_variant: str = "kl",
        loss_epsilon: float = 1e-8,
        encoder_lr: float = 1e-5,
        head_lr: float = 1e-4,
        weight_decay: float = 0.01,
        batch_size: int = 16,
        dropout: float = 0.1,
        max_span_length: int = 8,
        span_length_semantics: str = "tokens",
        pooling: str = "max",
        epochs: int = 120,
        seed: int = 42,
        use_a2o: bool = True,
        use_o2a: bool = True,
        resolve_conflicts: bool = True,
        gate: str = "elementwise",
        gate_max: float = 1e4,
        deterministic: bool = False,
    ):
        self.encoder_kind = encoder_kind
        self.encoder_dim = encoder_dim
        self.encoder_dropout = encoder_dropout
        self.vocab_size = vocab_size
        self.window = window
        self.depth = depth
        self.model_name = model_name
        self.aggregation = aggregation
        self.loss_variant = loss_variant
        self.loss_epsilon = loss_epsilon
        self.encoder_lr = encoder_lr
        self.head_lr = head_lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.dropout = dropout
        self.max_span_length = max_span_length
        self.span_length_semantics = span_length_semantics
        self.pooling = pooling
        self.epochs = epochs
        self.seed = seed
        self.use_a2o = use_a2o
        self.use_o2a = use_o2a
        self.resolve_conflicts = resolve_conflicts
        self.gate = gate
        self.gate_max = gate_max
        self.deterministic = deterministic

    def to_config(self) -> TrainConfig:
        encoder = EncoderConfig(
            kind=self.encoder_kind,
            d=self.encoder_dim,
            dropout=self.encoder_dropout,
            vocab_size=self.vocab_size,
            window=self.window,
            depth=self.depth,
            model_name=self.model_name,
            aggregation=self.aggregation,
        )
        return TrainConfig(
            encoder=encoder,
            loss=SeparationConfig(self.loss_variant, self.loss_epsilon),
            encoder_lr=self.encoder_lr,
            head_lr=self.head_lr,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            dropout=self.dropout,
            max_span_length=self.max_span_length,
            span_length_semantics=self.span_length_semantics,
            pooling=self.pooling,
            epochs=self.epochs,
            seed=self.seed,
            use_a2o=self.use_a2o,
            use_o2a=self.use_o2a,
            resolve_conflicts=self.resolve_conflicts,
            gate=self.gate,
            gate_max=self.gate_max,
            deterministic=self.deterministic,
        )

    @classmethod
    def from_config(cls, config: TrainConfig) -> "SpanBidirectionalExtractor":
        enc = config.encoder
        return cls(
            encoder_kind=enc.kind,
            encoder_dim=enc.d,
            encoder_dropout=enc.dropout,
            vocab_size=enc.vocab_size,
            window=enc.window,
            depth=enc.depth,
            model_name=enc.model_name,
            aggregation=enc.aggregation,
            loss_variant=config.loss.variant,
            loss_epsilon=config.loss.epsilon,
            **{
                k: getattr(config, k)
                for k in (
                    "encoder_lr", "head_lr", "weight_decay", "batch_size", "dropout",
                    "max_span_length", "span_length_semantics", "pooling", "epochs", "seed",
                    "use_a2o", "use_o2a", "resolve_conflicts", "gate", "gate_max", "deterministic",
                )
            },
        )

    def fit(self, X, y=None, X_dev=None, y_dev=None, log_path=None):
        """Train on ``X``; model selection uses ``X_dev`` (or ``X`` when absent)."""
        train_set = check_sentences(X, y, prefix="train")
        dev_set = check_sentences(X_dev, y_dev, prefix="dev") if X_dev is not None else train_set
        result = train(self.to_config(), train_set, dev_set, log_path=log_path)
        self.model_ = result.model
        self.checkpoint_ = result.checkpoint
        self.history_ = result.log
        self.best_epoch_ = result.best_epoch
        self.best_dev_f1_ = result.best_dev_f1
        return self

    def predict(self, X) -> list[list[PredictedTriplet]]:
        check_is_fitted(self, "model_")
        sentences = check_sentences(X)
        by_id = self.model_.predict(sentences)
        return [by_id[s.id] for s in sentences]

    def evaluate(self, X, y=None) -> EvalReport:
        check_is_fitted(self, "model_")
        sentences = check_sentences(X, y)
        return score(self.model_.predict(sentences), {s.id: s.gold for s in sentences})

    def score(self, X, y=None) -> float:
        """Exact-match triplet F1."""
        return self.evaluate(X, y).f1

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "model_")
        self.checkpoint_.save(path)

    @classmethod
    def load(cls, path: str | Path) -> "SpanBidirectionalExtractor":
        ckpt = Checkpoint.load(path)
        model = ckpt.build_model()
        est = cls.from_config(model.config)
        est.model_ = model
        est.checkpoint_ = ckpt
        est.history_ = []
        est.best_epoch_ = ckpt.epoch
        est.best_dev_f1_ = ckpt.dev_f1
        return est
