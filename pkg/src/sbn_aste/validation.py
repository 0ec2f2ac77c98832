"""Input validation for the estimator API."""

from __future__ import annotations

from typing import Any, Sequence

from .data import GoldTriplet, Sentence


def _as_triplet(t: Any) -> GoldTriplet:
    if isinstance(t, GoldTriplet):
        return t
    if hasattr(t, "aspect_span") and hasattr(t, "sentiment"):
        a, o = t.aspect_span, t.opinion_span
        return GoldTriplet(tuple(range(a[0], a[1] + 1)), tuple(range(o[0], o[1] + 1)), t.sentiment)
    try:
        aspect, opinion, sentiment = t
    except (TypeError, ValueError):
        raise TypeError(f"cannot interpret {t!r} as an (aspect, opinion, sentiment) triplet") from None
    return GoldTriplet(tuple(aspect), tuple(opinion), sentiment)


def _as_tokens(x: Any) -> tuple[str, ...]:
    if isinstance(x, str):
        return tuple(x.split())
    if isinstance(x, Sequence) and all(isinstance(t, str) for t in x):
        return tuple(x)
    raise TypeError(f"expected a Sentence, a string or a token sequence, got {type(x).__name__}")


def check_sentences(X: Any, y: Sequence | None = None, prefix: str = "x") -> list[Sentence]:
    """Normalise ``X`` (and optional gold ``y``) into a list of :class:`Sentence`.

    ``X`` items may be ``Sentence`` objects, whitespace-separated strings or
    token lists. When ``y`` is given it replaces any gold already attached.
    Ids are kept for ``Sentence`` inputs and generated as ``{prefix}-{i}``
    otherwise.
    """
    if isinstance(X, (str, Sentence)):
        raise TypeError("X must be a sequence of sentences, not a single sentence")
    items = list(X)
    if y is not None:
        y = list(y)
        if len(y) != len(items):
            raise ValueError(f"X has {len(items)} sentences but y has {len(y)} gold lists")
    out = []
    ids = set()
    for i, x in enumerate(items):
        if isinstance(x, Sentence):
            sid, tokens, gold = x.id, x.tokens, x.gold
        else:
            sid, tokens, gold = f"{prefix}-{i}", _as_tokens(x), ()
        if y is not None:
            gold = tuple(_as_triplet(t) for t in y[i])
        if sid in ids:
            raise ValueError(f"duplicate sentence id {sid!r}")
        ids.add(sid)
        out.append(Sentence(sid, tokens, gold))
    return out
