"""Exact-match precision / recall / F1 for triplets and terms."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

TRIPLET_COUNT_BUCKETS = ("1", "2", "3", "4", ">=5")


class UnknownSentenceError(KeyError):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    num_predicted: int
    num_gold: int
    num_correct: int

    @classmethod
    def from_counts(cls, predicted: int, gold: int, correct: int) -> "PRF":
        p = correct / predicted if predicted else 0.0
        r = correct / gold if gold else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f, predicted, gold, correct)


@dataclass
class EvalReport:
    overall: PRF
    by_entity_length: dict[str, dict[str, PRF]] = field(default_factory=dict)
    by_triplet_count: dict[str, PRF] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return self.overall.precision

    @property
    def recall(self) -> float:
        return self.overall.recall

    @property
    def f1(self) -> float:
        return self.overall.f1

    @property
    def counts(self) -> tuple[int, int, int]:
        o = self.overall
        return o.num_predicted, o.num_gold, o.num_correct

    def to_dict(self) -> dict:
        def prf(x: PRF) -> dict:
            return {
                "precision": x.precision,
                "recall": x.recall,
                "f1": x.f1,
                "num_predicted": x.num_predicted,
                "num_gold": x.num_gold,
                "num_correct": x.num_correct,
            }

        return {
            **prf(self.overall),
            "by_entity_length": {
                term: {length: prf(v) for length, v in buckets.items()}
                for term, buckets in self.by_entity_length.items()
            },
            "by_triplet_count": {k: prf(v) for k, v in self.by_triplet_count.items()},
        }


def triplet_key(t) -> tuple:
    """Canonical (aspect indices, opinion indices, sentiment) for gold or predicted triplets."""
    return tuple(t.key())


def _keys(triplets: Iterable) -> set:
    return {triplet_key(t) for t in triplets}


def _check_ids(predictions: Mapping, gold: Mapping) -> None:
    unknown = set(predictions) - set(gold)
    if unknown:
        raise UnknownSentenceError(f"predictions for unknown sentence ids: {sorted(unknown)[:5]}")


def _counts(predictions: Mapping, gold: Mapping, ids: Iterable) -> tuple[int, int, int]:
    n_pred = n_gold = n_corr = 0
    for sid in ids:
        p, g = _keys(predictions.get(sid, ())), _keys(gold[sid])
        n_pred += len(p)
        n_gold += len(g)
        n_corr += len(p & g)
    return n_pred, n_gold, n_corr


def score(predictions: Mapping[str, Sequence], gold: Mapping[str, Sequence]) -> EvalReport:
    """Micro-averaged exact-match scores with both breakdowns.

    Both mappings go from sentence id to a triplet list. Sentences missing
    from ``predictions`` count as having no predictions.
    """
    _check_ids(predictions, gold)
    overall = PRF.from_counts(*_counts(predictions, gold, gold))
    return EvalReport(
        overall,
        breakdown_by_length(predictions, gold),
        breakdown_by_triplet_count(predictions, gold),
    )


def breakdown_by_length(predictions: Mapping[str, Sequence], gold: Mapping[str, Sequence]) -> dict[str, dict[str, PRF]]:
    """Term extraction scores per term length, separately for aspects and opinions.

    Terms are the distinct spans occurring in a sentence's triplets. Every
    observed length gets a bucket; ``">=4"`` rolls up lengths four and above.
    """
    _check_ids(predictions, gold)
    out: dict[str, dict[str, PRF]] = {}
    for term in ("aspect", "opinion"):
        counts: dict[int, list[int]] = defaultdict(lambda: [0, 0, 0])
        for sid, gold_triplets in gold.items():
            g = {tuple(triplet_key(t)[0 if term == "aspect" else 1]) for t in gold_triplets}
            p = {tuple(triplet_key(t)[0 if term == "aspect" else 1]) for t in predictions.get(sid, ())}
            for span in p:
                counts[len(span)][0] += 1
            for span in g:
                counts[len(span)][1] += 1
            for span in p & g:
                counts[len(span)][2] += 1
        buckets = {str(length): PRF.from_counts(*counts[length]) for length in sorted(counts)}
        long = [counts[length] for length in counts if length >= 4]
        if long:
            buckets[">=4"] = PRF.from_counts(*(sum(c[i] for c in long) for i in range(3)))
        out[term] = buckets
    return out


def triplet_count_bucket(n: int) -> str | None:
    if n <= 0:
        return None
    return str(n) if n < 5 else ">=5"


def breakdown_by_triplet_count(predictions: Mapping[str, Sequence], gold: Mapping[str, Sequence]) -> dict[str, PRF]:
    """Triplet scores over sentence groups with 1, 2, 3, 4 and 5+ gold triplets.

    Sentences without gold triplets belong to no group; empty groups are omitted.
    """
    _check_ids(predictions, gold)
    groups: dict[str, list] = defaultdict(list)
    for sid, g in gold.items():
        b = triplet_count_bucket(len(_keys(g)))
        if b is not None:
            groups[b].append(sid)
    return {b: PRF.from_counts(*_counts(predictions, gold, groups[b])) for b in TRIPLET_COUNT_BUCKETS if b in groups}


def format_report(report: EvalReport) -> str:
    """Human-readable table followed by ``key=value`` lines."""
    lines = [f"{'':<12}{'P':>8}{'R':>8}{'F1':>8}{'#pred':>8}{'#gold':>8}{'#corr':>8}"]

    def row(name: str, x: PRF) -> str:
        return (
            f"{name:<12}{100 * x.precision:>8.2f}{100 * x.recall:>8.2f}{100 * x.f1:>8.2f}"
            f"{x.num_predicted:>8}{x.num_gold:>8}{x.num_correct:>8}"
        )

    lines.append(row("triplet", report.overall))
    for b, x in report.by_triplet_count.items():
        lines.append(row(f"  #T={b}", x))
    for term, buckets in report.by_entity_length.items():
        for length, x in buckets.items():
            lines.append(row(f"{term[:3]} len={length}", x))
    lines.append("")
    o = report.overall
    lines += [
        f"precision={o.precision:.6f}",
        f"recall={o.recall:.6f}",
        f"f1={o.f1:.6f}",
        f"num_predicted={o.num_predicted}",
        f"num_gold={o.num_gold}",
        f"num_correct={o.num_correct}",
    ]
    for b, x in report.by_triplet_count.items():
        lines.append(f"triplet_count.{b}.f1={x.f1:.6f}")
    for term, buckets in report.by_entity_length.items():
        for length, x in buckets.items():
            lines.append(f"{term}_length.{length}.f1={x.f1:.6f}")
    return "\n".join(lines)
