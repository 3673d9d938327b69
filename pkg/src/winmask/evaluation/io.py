"""Readers for the evaluation input files and a stable CSV writer."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredPair:
    sentence_a: str
    sentence_b: str
    gold: float


@dataclass(frozen=True)
class LabeledMessage:
    label: str
    text: str

    def __post_init__(self):
        if self.label not in ("ham", "spam"):
            raise DataFormatError(f"label must be 'ham' or 'spam', got {self.label!r}")


@dataclass(frozen=True)
class Candidate:
    text: str
    s2s_score: float


@dataclass(frozen=True)
class NBestEntry:
    source: str
    reference: str
    candidates: tuple[Candidate, ...]

    def __post_init__(self):
        if not self.candidates:
            raise DataFormatError(f"n-best entry {self.source!r} has no candidates")


def read_pairs(path, gold_range: tuple[float, float] = (0.0, 5.0)) -> list[ScoredPair]:
    """``gold<TAB>sentence_a<TAB>sentence_b`` per line."""
    lo, hi = gold_range
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
            try:
                gold = float(cols[0])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: gold score {cols[0]!r} is not a number") from None
            if not lo <= gold <= hi:
                raise DataFormatError(f"{path}:{lineno}: gold {gold} outside [{lo}, {hi}]")
            pairs.append(ScoredPair(cols[1], cols[2], gold))
    return pairs


def read_messages(path) -> list[LabeledMessage]:
    """``label<TAB>text`` per line (SMS Spam Collection layout)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            label, sep, text = line.partition("\t")
            if not sep:
                raise DataFormatError(f"{path}:{lineno}: missing tab separator")
            try:
                out.append(LabeledMessage(label, text))
            except DataFormatError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return out


def parse_nbest_record(obj: dict) -> NBestEntry:
    try:
        cands = tuple(Candidate(str(c["text"]), float(c["s2s_score"])) for c in obj["candidates"])
        return NBestEntry(str(obj["source"]), str(obj["reference"]), cands)
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"malformed n-best record: {exc}") from None


def read_nbest(path) -> list[NBestEntry]:
    """One JSON object per line: ``{source, reference, candidates: [{text, s2s_score}]}``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_nbest_record(json.loads(line)))
            except (json.JSONDecodeError, DataFormatError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return out


def write_pairs(path, pairs: Iterable[tuple[float, str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for gold, a, b in pairs:
            fh.write(f"{gold}\t{a}\t{b}\n")


def write_messages(path, messages: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label, text in messages:
            fh.write(f"{label}\t{text}\n")


def write_nbest(path, entries: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True) + "\n")


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))
