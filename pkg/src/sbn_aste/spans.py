"""Span enumeration, span pooling and the token-overlap neighbour structure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import torch

POOLING_METHODS = ("max", "mean", "endpoint_concat")
LENGTH_SEMANTICS = ("tokens", "strict_eq2")


class Span(NamedTuple):
    """Inclusive 0-based token interval."""

    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: "Span") -> bool:
        return self.start <= other.end and other.start <= self.end

    def indices(self) -> tuple[int, ...]:
        return tuple(range(self.start, self.end + 1))


def max_token_length(max_span_length: int, semantics: str = "tokens") -> int:
    """Longest admissible span, in tokens.

    ``"tokens"`` caps ``end - start + 1``; ``"strict_eq2"`` caps ``end - start``
    and so admits one extra token.
    """
    if semantics not in LENGTH_SEMANTICS:
        raise ValueError(f"span_length_semantics must be one of {LENGTH_SEMANTICS}")
    return max_span_length if semantics == "tokens" else max_span_length + 1


def span_count(n: int, max_len: int) -> int:
    """Closed form for the number of spans of at most ``max_len`` tokens."""
    return sum(max(0, n - length + 1) for length in range(1, min(max_len, n) + 1))


def enumerate_spans(n: int, max_span_length: int, semantics: str = "tokens") -> list[Span]:
    if n < 1 or max_span_length < 1:
        raise ValueError("n and max_span_length must be positive")
    cap = max_token_length(max_span_length, semantics)
    return [Span(i, j) for i in range(n) for j in range(i, min(n, i + cap))]


def pool_span(enc: torch.Tensor, span: Span, method: str = "max") -> torch.Tensor:
    rows = enc[span.start : span.end + 1]
    if method == "max":
        return rows.max(dim=0).values
    if method == "mean":
        return rows.mean(dim=0)
    if method == "endpoint_concat":
        return torch.cat([rows[0], rows[-1]])
    raise ValueError(f"unknown pooling method {method!r}; expected one of {POOLING_METHODS}")


def _pool_all(enc: torch.Tensor, spans: Sequence[Span], method: str) -> torch.Tensor:
    # Grouped by length so each group is one strided reduction.
    if method == "endpoint_concat":
        starts = torch.tensor([s.start for s in spans])
        ends = torch.tensor([s.end for s in spans])
        return torch.cat([enc[starts], enc[ends]], dim=1)
    if method not in POOLING_METHODS:
        raise ValueError(f"unknown pooling method {method!r}; expected one of {POOLING_METHODS}")
    by_len: dict[int, list[int]] = {}
    for i, s in enumerate(spans):
        by_len.setdefault(s.length, []).append(i)
    pieces = []
    for length, idx in by_len.items():
        windows = enc.unfold(0, length, 1)  # (n - length + 1, d, length)
        starts = torch.tensor([spans[i].start for i in idx])
        sel = windows[starts]
        pooled = sel.max(dim=2).values if method == "max" else sel.mean(dim=2)
        pieces.append((torch.tensor(idx), pooled))
    order = torch.cat([p[0] for p in pieces])
    values = torch.cat([p[1] for p in pieces])
    return values[torch.argsort(order)]


@dataclass(frozen=True)
class SpanLattice:
    """All candidate spans of one sentence.

    ``neighbors[i]`` holds every other span sharing at least one token with
    span ``i`` (a span is never its own neighbour). ``edges`` lists each
    neighbouring pair once as ``(i, j)`` with ``i < j``.
    """

    spans: tuple[Span, ...]
    reps: torch.Tensor
    neighbors: tuple[frozenset, ...]
    edges: torch.Tensor
    n_tokens: int

    def __len__(self) -> int:
        return len(self.spans)

    @property
    def dim(self) -> int:
        return self.reps.shape[1]

    def index(self, span: tuple[int, int]) -> int | None:
        return self._lookup.get(tuple(span))

    @property
    def _lookup(self) -> dict:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {tuple(s): i for i, s in enumerate(self.spans)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def with_reps(self, reps: torch.Tensor) -> "SpanLattice":
        if reps.shape[0] != len(self.spans):
            raise ValueError("representation count does not match span count")
        return SpanLattice(self.spans, reps, self.neighbors, self.edges, self.n_tokens)


def overlap_structure(spans: Sequence[Span]) -> tuple[tuple[frozenset, ...], torch.Tensor]:
    """Neighbour sets and the ``i < j`` edge list from interval overlap."""
    m = len(spans)
    if m == 0:
        return (), torch.empty((0, 2), dtype=torch.long)
    starts = torch.tensor([s.start for s in spans])
    ends = torch.tensor([s.end for s in spans])
    overlap = (starts[:, None] <= ends[None, :]) & (starts[None, :] <= ends[:, None])
    overlap.fill_diagonal_(False)
    edges = torch.nonzero(torch.triu(overlap, diagonal=1), as_tuple=False)
    neighbors = tuple(frozenset(torch.nonzero(row).flatten().tolist()) for row in overlap)
    return neighbors, edges


def build_lattice(
    enc: torch.Tensor,
    max_span_length: int = 8,
    method: str = "max",
    semantics: str = "tokens",
) -> SpanLattice:
    n = enc.shape[0]
    spans = enumerate_spans(n, max_span_length, semantics)
    reps = _pool_all(enc, spans, method)
    neighbors, edges = overlap_structure(spans)
    return SpanLattice(tuple(spans), reps, neighbors, edges, n)
