"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"WLM1"                      magic
    u32 format_version
    repeated sections:
        4-byte ASCII tag         CONF | VOCB | PARM
        u64 payload length
        payload
    u64 checksum                 blake2b-64 of every preceding byte

CONF is UTF-8 JSON with sorted keys (model config, train config, completed
steps, vocabulary sha256). VOCB is the vocabulary text file verbatim. PARM is
``u32 count`` followed by, per parameter in model order: ``u16 name length``,
name, ``u8 ndim``, ``u32`` dims, ``u64`` Adam step count, ``u8`` dtype code
(0 = float32, 1 = float64), then the raw value, first-moment and
second-moment arrays.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

from .model import ModelConfig
from .nncore import Parameter
from .tokenizer import Vocabulary
from .training import Checkpoint, TrainConfig

MAGIC = b"WLM1"
FORMAT_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class CheckpointError(Exception):
    pass


class CheckpointCorruptError(CheckpointError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class IncompatibleCheckpointError(CheckpointError):
    pass


def _checksum(blob: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


def _encode_params(params: dict[str, Parameter]) -> bytes:
    parts = [struct.pack("<I", len(params))]
    for name, p in params.items():
        raw = name.encode("utf-8")
        dt = p.data.dtype
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", p.data.ndim) + struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        parts.append(struct.pack("<QB", p.step_count, _DTYPE_CODES[dt]))
        le = dt.newbyteorder("<")
        for arr in (p.data, p.adam_m, p.adam_v):
            parts.append(np.ascontiguousarray(arr, dtype=le).tobytes())
    return b"".join(parts)


def dumps(ckpt: Checkpoint, format_version: int = FORMAT_VERSION) -> bytes:
    vocab_text = ckpt.vocab.to_text().encode("utf-8")
    conf = {
        "model_config": ckpt.model_config.to_dict(),
        "train_config": ckpt.train_config.to_dict() if ckpt.train_config else None,
        "steps_done": ckpt.steps_done,
        "vocab_sha256": hashlib.sha256(vocab_text).hexdigest(),
    }
    body = (MAGIC + struct.pack("<I", format_version)
            + _section(b"CONF", json.dumps(conf, sort_keys=True).encode("utf-8"))
            + _section(b"VOCB", vocab_text)
            + _section(b"PARM", _encode_params(ckpt.params)))
    return body + struct.pack("<Q", _checksum(body))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps(ckpt))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, blob: bytes, offset: int = 0, end: int | None = None):
        self.blob = blob
        self.pos = offset
        self.end = len(blob) if end is None else end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise CheckpointCorruptError(f"truncated: need {n} bytes, {self.end - self.pos} available", self.pos)
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode_params(r: _Reader) -> dict[str, Parameter]:
    (count,) = r.unpack("<I")
    params = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        step, code = r.unpack("<QB")
        if code not in _DTYPES:
            raise CheckpointCorruptError(f"unknown dtype code {code}", r.pos - 1)
        dt = _DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        arrays = [np.frombuffer(r.take(nbytes), dtype=dt).reshape(shape).astype(dt.newbyteorder("="))
                  for _ in range(3)]
        p = Parameter(arrays[0], name=name)
        p.data = arrays[0]
        p.adam_m, p.adam_v = arrays[1], arrays[2]
        p.step_count = step
        params[name] = p
    return params


def loads(blob: bytes) -> Checkpoint:
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise CheckpointCorruptError("bad magic bytes", 0)
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(
            f"checkpoint format version {version}; this code reads version {FORMAT_VERSION}")
    sections: dict[bytes, tuple[int, int]] = {}
    while len(blob) - r.pos > 8:
        tag = r.take(4)
        (length,) = r.unpack("<Q")
        start = r.pos
        if start + length > len(blob) - 8:
            raise CheckpointCorruptError(f"truncated {tag!r} section: declared {length} bytes", start)
        sections[tag] = (start, start + length)
        r.pos += length
    if len(blob) - r.pos != 8:
        raise CheckpointCorruptError("truncated: missing checksum", r.pos)
    (stored,) = r.unpack("<Q")
    if stored != _checksum(blob[:-8]):
        raise CheckpointCorruptError("checksum mismatch", len(blob) - 8)
    for tag in (b"CONF", b"VOCB", b"PARM"):
        if tag not in sections:
            raise CheckpointCorruptError(f"missing {tag.decode()} section", len(blob) - 8)

    conf = json.loads(blob[slice(*sections[b"CONF"])].decode("utf-8"))
    vocab_bytes = blob[slice(*sections[b"VOCB"])]
    if hashlib.sha256(vocab_bytes).hexdigest() != conf["vocab_sha256"]:
        raise CheckpointCorruptError("vocabulary hash mismatch", sections[b"VOCB"][0])
    pr = _Reader(blob, *sections[b"PARM"])
    params = _decode_params(pr)
    if pr.pos != pr.end:
        raise CheckpointCorruptError("trailing bytes in PARM section", pr.pos)
    train = conf["train_config"]
    return Checkpoint(
        model_config=ModelConfig.from_dict(conf["model_config"]),
        train_config=TrainConfig(**train) if train else None,
        vocab=Vocabulary.from_text(vocab_bytes.decode("utf-8")),
        params=params,
        steps_done=conf["steps_done"],
    )


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return loads(fh.read())
