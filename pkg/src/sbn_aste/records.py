"""Line-delimited JSON prediction files.

One record per sentence::

    {"id": "test-12", "triplets": [{"aspect": [1, 2], "opinion": [4, 5],
     "sentiment": "POS", "confidence": 0.93, "direction": "a2o"}]}
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Mapping, Sequence

from .data import Sentence
from .inference import PredictedTriplet
from .spans import Span


def prediction_record(sentence_id: str, triplets: Iterable[PredictedTriplet]) -> dict:
    return {"id": sentence_id, "triplets": [t.to_record() for t in triplets]}


def write_predictions(path: str | os.PathLike, predictions: Mapping[str, Sequence[PredictedTriplet]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid, triplets in predictions.items():
            fh.write(json.dumps(prediction_record(sid, triplets)) + "\n")


def read_predictions(path: str | os.PathLike) -> dict[str, list[PredictedTriplet]]:
    out: dict[str, list[PredictedTriplet]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sid = rec["id"]
                triplets = [PredictedTriplet.from_record(t) for t in rec["triplets"]]
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: bad prediction record: {exc}") from None
            if sid in out:
                raise ValueError(f"{path}:{lineno}: duplicate sentence id {sid!r}")
            out[sid] = triplets
    return out


def gold_as_predictions(sentences: Iterable[Sentence]) -> dict[str, list[PredictedTriplet]]:
    """Gold triplets in prediction form (confidence 1, direction a2o)."""
    return {
        s.id: [PredictedTriplet(Span(*t.aspect_span), Span(*t.opinion_span), t.sentiment, "a2o", 1.0) for t in s.gold]
        for s in sentences
    }
