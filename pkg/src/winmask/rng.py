"""Seeded random streams.

Every random draw in the package (parameter init, dropout, MLM corruption,
batch sampling, data splits) comes from a numpy ``Generator`` backed by the
Philox-4x64-10 bit generator. Philox is counter-based: its output is a pure
function of a 256-bit key and a 256-bit counter, so the stream is identical on
every platform and numpy build that implements it. Keys are derived with
``SeedSequence`` from ``(seed, *path)``, which gives independent child streams
for each consumer ("splitting") without sharing a mutable global state.

The platform default generator (``np.random.default_rng`` / PCG64) and the
legacy global ``np.random`` state are never used.
"""

from __future__ import annotations

import zlib

import numpy as np


def _path_word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def make_rng(seed: int, *path) -> np.random.Generator:
    """Return a Philox generator for the stream named by ``(seed, *path)``.

    ``path`` items may be ints or strings, e.g. ``make_rng(7, "dropout", step)``.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_path_word(p) for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Spawn ``n`` independent child generators from ``rng``."""
    return list(rng.spawn(n))
