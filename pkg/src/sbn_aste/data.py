"""Reading and writing ASTE-Data-V2 triplet files.

Each line holds a whitespace-tokenized sentence and a python-literal list of
triplets, separated by ``####``::

    the hot dogs are top notch####[([1, 2], [4, 5], 'POS')]

Token indices are 0-based, both in the files and everywhere in this package.
"""

from __future__ import annotations

import ast
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

SEPARATOR = "####"
SENTIMENTS = ("POS", "NEU", "NEG")
SENTIMENT_NAMES = {"POS": "Positive", "NEU": "Neutral", "NEG": "Negative"}
SPLITS = ("train", "dev", "test")


class DataError(ValueError):
    """Base class for dataset problems."""


class ParseError(DataError):
    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ValidationError(DataError):
    def __init__(self, message: str, sentence_id: str | None = None):
        self.sentence_id = sentence_id
        prefix = f"sentence {sentence_id!r}: " if sentence_id is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class GoldTriplet:
    aspect: tuple[int, ...]
    opinion: tuple[int, ...]
    sentiment: str

    def __post_init__(self):
        object.__setattr__(self, "aspect", tuple(int(i) for i in self.aspect))
        object.__setattr__(self, "opinion", tuple(int(i) for i in self.opinion))
        _check_run(self.aspect, "aspect")
        _check_run(self.opinion, "opinion")
        if self.sentiment not in SENTIMENTS:
            raise ValueError(f"unknown sentiment {self.sentiment!r}, expected one of {SENTIMENTS}")

    @property
    def aspect_span(self) -> tuple[int, int]:
        return self.aspect[0], self.aspect[-1]

    @property
    def opinion_span(self) -> tuple[int, int]:
        return self.opinion[0], self.opinion[-1]

    @property
    def is_single_word(self) -> bool:
        return len(self.aspect) == 1 and len(self.opinion) == 1

    def key(self) -> tuple:
        return self.aspect, self.opinion, self.sentiment


def _check_run(indices: tuple[int, ...], what: str) -> None:
    if not indices:
        raise ValueError(f"{what} indices are empty")
    if indices[0] < 0:
        raise ValueError(f"{what} indices must be non-negative, got {list(indices)}")
    for a, b in zip(indices, indices[1:]):
        if b != a + 1:
            raise ValueError(f"{what} indices must be a contiguous increasing run, got {list(indices)}")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[str, ...]
    gold: tuple[GoldTriplet, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "gold", tuple(self.gold))
        if not self.tokens:
            raise ValidationError("sentence has no tokens", self.id)
        n = len(self.tokens)
        seen = set()
        for t in self.gold:
            if t.aspect[-1] >= n or t.opinion[-1] >= n:
                raise ValidationError(
                    f"triplet {t.key()} indexes past the last token (n={n})", self.id
                )
            if t.key() in seen:
                raise ValidationError(f"duplicate gold triplet {t.key()}", self.id)
            seen.add(t.key())

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class CorpusStats:
    num_sentences: int
    pos: int
    neu: int
    neg: int
    single_word: int
    multi_word: int

    @property
    def num_triplets(self) -> int:
        return self.pos + self.neu + self.neg

    def as_row(self) -> dict[str, int]:
        return {
            "#S": self.num_sentences,
            "POS": self.pos,
            "NEU": self.neu,
            "NEG": self.neg,
            "#SW": self.single_word,
            "#MW": self.multi_word,
        }


def parse_line(line: str, sentence_id: str, lineno: int | None = None, path: str | None = None) -> Sentence:
    """Parse one ``sentence####triplets`` line."""
    text, sep, annotation = line.rstrip("\r\n").partition(SEPARATOR)
    if not sep:
        raise ParseError(f"missing {SEPARATOR!r} separator", lineno, path)
    tokens = text.split()
    if not tokens:
        raise ParseError("empty sentence", lineno, path)
    try:
        raw = ast.literal_eval(annotation.strip())
    except (ValueError, SyntaxError) as exc:
        raise ParseError(f"unreadable triplet list: {exc}", lineno, path) from None
    if not isinstance(raw, (list, tuple)):
        raise ParseError("triplet annotation is not a list", lineno, path)

    triplets = []
    seen = set()
    for entry in raw:
        if not (isinstance(entry, (list, tuple)) and len(entry) == 3):
            raise ParseError(f"malformed triplet entry {entry!r}", lineno, path)
        aspect, opinion, sentiment = entry
        if not all(isinstance(x, (list, tuple)) for x in (aspect, opinion)):
            raise ParseError(f"malformed triplet entry {entry!r}", lineno, path)
        if not all(isinstance(i, int) and not isinstance(i, bool) for i in (*aspect, *opinion)):
            raise ParseError(f"non-integer token index in {entry!r}", lineno, path)
        try:
            triplet = GoldTriplet(tuple(aspect), tuple(opinion), sentiment)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, path) from None
        if triplet.key() in seen:
            raise ParseError(f"duplicate triplet {entry!r}", lineno, path)
        seen.add(triplet.key())
        triplets.append(triplet)

    n = len(tokens)
    for t in triplets:
        if t.aspect[-1] >= n or t.opinion[-1] >= n:
            raise ValidationError(
                f"triplet {t.key()} indexes past the last token (n={n})"
                + (f" at line {lineno}" if lineno is not None else ""),
                sentence_id,
            )
    return Sentence(sentence_id, tuple(tokens), tuple(triplets))


def infer_split(path: str | os.PathLike) -> str:
    """Guess the split from a file name like ``dev_triplets.txt``; defaults to ``test``."""
    name = Path(path).name.lower()
    for split in SPLITS:
        if name.startswith(split):
            return split
    return "test"


def parse_dataset(path: str | os.PathLike, split: str | None = None) -> list[Sentence]:
    """Read an ASTE-Data-V2 file into sentences, one per non-blank line.

    Sentence ids are ``"{split}-{lineno}"`` with 1-based line numbers, so a
    prediction file produced from the same gold file can be joined back to it.
    """
    if split is None:
        split = infer_split(path)
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    path = str(path)
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            sentences.append(parse_line(line, f"{split}-{lineno}", lineno, path))
    return sentences


def format_line(sentence: Sentence) -> str:
    """Inverse of :func:`parse_line` (without the trailing newline)."""
    triplets = [(list(t.aspect), list(t.opinion), t.sentiment) for t in sentence.gold]
    return f"{' '.join(sentence.tokens)}{SEPARATOR}{triplets!r}"


def write_dataset(sentences: Iterable[Sentence], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(format_line(s) + "\n")


def compute_stats(sentences: Sequence[Sentence]) -> CorpusStats:
    counts = dict.fromkeys(SENTIMENTS, 0)
    single = multi = 0
    for s in sentences:
        for t in s.gold:
            counts[t.sentiment] += 1
            if t.is_single_word:
                single += 1
            else:
                multi += 1
    return CorpusStats(len(sentences), counts["POS"], counts["NEU"], counts["NEG"], single, multi)


# Layout of the public ASTE-Data-V2-EMNLP2020 release.
DATASETS = ("14lap", "14res", "15res", "16res")


def split_path(root: str | os.PathLike, dataset: str, split: str) -> Path:
    return Path(root) / dataset / f"{split}_triplets.txt"
