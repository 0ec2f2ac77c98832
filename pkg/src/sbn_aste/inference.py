"""Turning decoder outputs into triplets and removing conflicting ones."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .decoder import A2O, O2A, PARTNER_CLASSES, VALID, DirectionOutputs
from .spans import Span, SpanLattice

DIRECTION_RANK = {A2O: 0, O2A: 1}


@dataclass(frozen=True)
class PredictedTriplet:
    aspect: Span
    opinion: Span
    sentiment: str
    direction: str
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "aspect", Span(*self.aspect))
        object.__setattr__(self, "opinion", Span(*self.opinion))
        if self.sentiment not in PARTNER_CLASSES[:3]:
            raise ValueError(f"invalid sentiment {self.sentiment!r}")
        if self.direction not in DIRECTION_RANK:
            raise ValueError(f"invalid direction {self.direction!r}")

    @property
    def aspect_span(self) -> tuple[int, int]:
        return tuple(self.aspect)

    @property
    def opinion_span(self) -> tuple[int, int]:
        return tuple(self.opinion)

    def key(self) -> tuple:
        """Identity used for scoring: token indices plus sentiment."""
        return self.aspect.indices(), self.opinion.indices(), self.sentiment

    def conflicts_with(self, other: "PredictedTriplet") -> bool:
        return self.aspect.overlaps(other.aspect) and self.opinion.overlaps(other.opinion)

    def to_record(self) -> dict:
        return {
            "aspect": list(self.aspect.indices()),
            "opinion": list(self.opinion.indices()),
            "sentiment": self.sentiment,
            "confidence": self.confidence,
            "direction": self.direction,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PredictedTriplet":
        a, o = rec["aspect"], rec["opinion"]
        return cls(
            Span(a[0], a[-1]),
            Span(o[0], o[-1]),
            rec["sentiment"],
            rec.get("direction", A2O),
            float(rec.get("confidence", 1.0)),
        )


def canonical_order(t: PredictedTriplet) -> tuple:
    return (DIRECTION_RANK[t.direction], t.aspect.start, t.aspect.end, t.opinion.start, t.opinion.end, t.sentiment)


def rank_key(t: PredictedTriplet) -> tuple:
    """Sort key: higher confidence first, canonical order among equals."""
    return (-t.confidence, canonical_order(t))


def assemble(
    outputs_ao: DirectionOutputs | None,
    outputs_oa: DirectionOutputs | None,
    lattice: SpanLattice,
) -> tuple[list[PredictedTriplet], list[PredictedTriplet]]:
    """Candidate triplets from each direction.

    A candidate is emitted for every predicted trigger ``j`` and span ``i``
    whose partner argmax is a sentiment; its confidence is
    ``p(Valid | j) * p(sentiment | i, j)``.
    """
    result = []
    for outputs, direction in ((outputs_ao, A2O), (outputs_oa, O2A)):
        triplets: list[PredictedTriplet] = []
        if outputs is not None:
            if outputs.direction != direction:
                raise ValueError(f"expected {direction} outputs, got {outputs.direction}")
            trig_p = outputs.trigger_probs.detach()
            part_p = outputs.partner_probs.detach()
            for r, j in enumerate(outputs.trigger_set):
                row = part_p[r]
                best = row.argmax(-1)
                for i in (best < 3).nonzero().flatten().tolist():
                    c = int(best[i])
                    conf = float(trig_p[j, VALID]) * float(row[i, c])
                    trig_span, part_span = lattice.spans[j], lattice.spans[i]
                    aspect, opinion = (trig_span, part_span) if direction == A2O else (part_span, trig_span)
                    triplets.append(PredictedTriplet(aspect, opinion, PARTNER_CLASSES[c], direction, conf))
        result.append(triplets)
    return result[0], result[1]


def union(t_ao: Iterable[PredictedTriplet], t_oa: Iterable[PredictedTriplet]) -> list[PredictedTriplet]:
    """Merge both directions; identical (aspect, opinion, sentiment) keep the best-ranked copy."""
    best: dict[tuple, PredictedTriplet] = {}
    for t in (*t_ao, *t_oa):
        k = t.key()
        if k not in best or rank_key(t) < rank_key(best[k]):
            best[k] = t
    return sorted(best.values(), key=canonical_order)


def resolve_conflicts(t_ao: Iterable[PredictedTriplet], t_oa: Iterable[PredictedTriplet] = ()) -> list[PredictedTriplet]:
    """Drop every triplet that overlaps a better triplet in both aspect and opinion.

    Candidates are visited from highest to lowest confidence (canonical order
    breaks ties); a candidate survives iff it conflicts with no survivor.
    Hence each dropped triplet conflicts with a kept one of at least equal
    confidence, and the result does not depend on input order.
    """
    kept: list[PredictedTriplet] = []
    for t in sorted(union(t_ao, t_oa), key=rank_key):
        if not any(t.conflicts_with(k) for k in kept):
            kept.append(t)
    return sorted(kept, key=canonical_order)


def is_conflict_free(triplets: Sequence[PredictedTriplet]) -> bool:
    return not any(
        a.conflicts_with(b) for i, a in enumerate(triplets) for b in triplets[i + 1 :]
    )
