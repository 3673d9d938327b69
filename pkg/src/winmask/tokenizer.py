"""Word-level vocabulary and sentence encoding.

Text is lowercased and split into runs of word characters and single
punctuation marks. Every encoded sentence is wrapped in START/END markers.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

PAD, UNK, START, END, MASK = 0, 1, 2, 3, 4
SPECIAL_TOKENS = ("<pad>", "<unk>", "<start>", "<end>", "<mask>")
SPECIAL_IDS = frozenset(range(len(SPECIAL_TOKENS)))

# "<unk>" survives a decode/encode round trip as one token
_TOKEN_RE = re.compile(r"<unk>|\w+|[^\w\s]", re.UNICODE)


class TokenizerError(ValueError):
    pass


class IngestionError(TokenizerError):
    pass


class EmptySentenceError(TokenizerError):
    pass


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise TokenizerError("vocabulary must start with the five special tokens")
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise TokenizerError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def to_text(self) -> str:
        """Serialized form: one token per line, specials first."""
        return "".join(tok + "\n" for tok in self.id_to_token)

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def build_vocab(corpus: Iterable[str], max_size: int = 10_000, min_freq: int = 2) -> Vocabulary:
    """Build a vocabulary from an iterable of lines.

    Tokens are ranked by descending frequency, ties broken lexicographically;
    the top ``max_size - 5`` with count >= ``min_freq`` are kept.
    """
    if max_size <= len(SPECIAL_TOKENS):
        raise TokenizerError(f"max_size must exceed {len(SPECIAL_TOKENS)}, got {max_size}")
    counts: Counter[str] = Counter()
    saw_line = False
    for line in corpus:
        saw_line = saw_line or bool(line.strip())
        counts.update(tokenize(line))
    if not saw_line:
        raise IngestionError("corpus is empty")
    for tok in SPECIAL_TOKENS:
        counts.pop(tok, None)
    ranked = sorted((item for item in counts.items() if item[1] >= min_freq),
                    key=lambda item: (-item[1], item[0]))
    kept = [tok for tok, _ in ranked[:max_size - len(SPECIAL_TOKENS)]]
    return Vocabulary(list(SPECIAL_TOKENS) + kept)


def encode(vocab: Vocabulary, text: str, max_len: int = 64) -> list[int]:
    """START + token ids + END, truncated so the total length is <= max_len."""
    if max_len < 3:
        raise TokenizerError(f"max_len must be at least 3, got {max_len}")
    tokens = tokenize(text)
    if not tokens:
        raise EmptySentenceError(f"text has no tokens: {text!r}")
    ids = [vocab.lookup(tok) for tok in tokens[:max_len - 2]]
    return [START] + ids + [END]


def decode(vocab: Vocabulary, ids: Iterable[int]) -> str:
    words = []
    for i in ids:
        i = int(i)
        if not 0 <= i < len(vocab):
            raise TokenizerError(f"token id {i} out of range for vocabulary of size {len(vocab)}")
        if i == UNK:
            words.append("<unk>")
        elif i not in SPECIAL_IDS:
            words.append(vocab.id_to_token[i])
    return " ".join(words)
