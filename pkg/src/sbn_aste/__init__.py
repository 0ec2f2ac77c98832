"""Span-level bidirectional network for aspect sentiment triplet extraction."""

from .config import TrainConfig, load_config
from .data import CorpusStats, GoldTriplet, Sentence, compute_stats, parse_dataset
from .estimator import SpanBidirectionalExtractor
from .evaluation import EvalReport, score
from .inference import PredictedTriplet, resolve_conflicts
from .spans import Span, SpanLattice, build_lattice, enumerate_spans

__all__ = [
    "CorpusStats",
    "EvalReport",
    "GoldTriplet",
    "PredictedTriplet",
    "Sentence",
    "Span",
    "SpanBidirectionalExtractor",
    "SpanLattice",
    "TrainConfig",
    "build_lattice",
    "compute_stats",
    "enumerate_spans",
    "load_config",
    "parse_dataset",
    "resolve_conflicts",
    "score",
]
