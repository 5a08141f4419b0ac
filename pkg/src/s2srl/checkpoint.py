"""Checkpoint container for model parameters.

Byte layout (all integers little-endian)::

    magic       8 bytes   b"S2SRLCKP"
    version     uint32    currently 1
    header_len  uint64    length of the JSON header in bytes
    header      UTF-8 JSON, keys sorted, no extra whitespace
    payload     float64 little-endian, row-major, tensors in header order

The header holds ``model_config``, ``vocab`` (words and labels),
``vocab_sha256``, ``tensors`` (list of ``{"name", "shape"}``) and a free-form
``meta`` dict.  See ``docs/checkpoint_format.md``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .model import ModelConfig, Seq2SeqModel
from .vocab import Vocab

MAGIC = b"S2SRLCKP"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(model: Seq2SeqModel, vocab: Vocab, meta=None) -> bytes:
    header = {
        "model_config": model.config.to_dict(),
        "vocab": vocab.to_dict(),
        "vocab_sha256": vocab.digest(),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in model.params.items()],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<IQ", VERSION, len(blob)), blob]
    for t in model.params.values():
        parts.append(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(path, model, vocab, meta=None):
    atomic_write(path, dumps(model, vocab, meta))


def loads(data: bytes, expect_vocab: Vocab | None = None):
    """Return (model, vocab, meta); raise CheckpointError on any mismatch."""
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, n = struct.unpack_from("<IQ", data, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = 8 + 12
    header = json.loads(data[start : start + n].decode("utf-8"))
    vocab = Vocab.from_dict(header["vocab"])
    if vocab.digest() != header["vocab_sha256"]:
        raise CheckpointError("vocabulary hash does not match checkpoint contents")
    if expect_vocab is not None and expect_vocab.digest() != header["vocab_sha256"]:
        raise CheckpointError(
            "vocabulary mismatch: checkpoint was trained with a different vocab "
            f"({header['vocab_sha256'][:12]} vs {expect_vocab.digest()[:12]})"
        )
    model = Seq2SeqModel(ModelConfig(**header["model_config"]))
    offset = start + n
    for spec in header["tensors"]:
        name, shape = spec["name"], tuple(spec["shape"])
        if name not in model.params or model.params[name].shape != shape:
            raise CheckpointError(f"tensor {name} {shape} does not fit the model config")
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        model.params[name].data = arr.reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise CheckpointError("trailing bytes after tensor payload")
    return model, vocab, header["meta"]


def load_checkpoint(path, expect_vocab=None):
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    return loads(path.read_bytes(), expect_vocab)
