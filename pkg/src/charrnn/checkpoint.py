"""Flat binary model checkpoints with a bit-exact round trip.

Layout (all integers little-endian):

    magic      8 bytes  b"CHARRNN\\0"
    version    u32      currently 1
    precision  u8       4 (float32) or 8 (float64)
    scheme     u8       1..4, the scheme the model was trained with
    k1, k2     u32 x2
    rotation   u64      dataset rotation used for the train/test split
    test_len   u32      test-set length used for the split
    num_layers u32
    hidden     u32
    dense      u32
    vocab_size u32
    leakiness  f64
    vocab      u32 count, then one u32 code point per character
    tensors    raw little-endian arrays in Parameters declaration order

The vocabulary travels inside the checkpoint so token ids stay stable when
sampling or evaluating against a different copy of the dataset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .data import Vocabulary
from .model import ModelConfig, Parameters, zero_parameters

MAGIC = b"CHARRNN\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIBBIIQIIIIId")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    params: Parameters
    vocab: Vocabulary
    scheme: int
    k1: int
    k2: int
    rotation: int
    test_len: int = 11_100


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    dtype = ckpt.params.dtype
    width = dtype.itemsize
    cfg = ckpt.model_cfg
    header = _HEADER.pack(
        MAGIC, VERSION, width, ckpt.scheme, ckpt.k1, ckpt.k2, ckpt.rotation,
        ckpt.test_len, cfg.num_layers, cfg.hidden_size, cfg.dense_size,
        cfg.vocab_size, cfg.leakiness)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", len(ckpt.vocab)))
        fh.write(np.array([ord(c) for c in ckpt.vocab.chars],
                          dtype="<u4").tobytes())
        for _, arr in ckpt.params.tensors():
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise CheckpointError(f"{path}: truncated header")
        (magic, version, width, scheme, k1, k2, rotation, test_len,
         layers, hidden, dense, vocab_size, leakiness) = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        if width not in (4, 8):
            raise CheckpointError(f"{path}: bad precision byte {width}")
        dtype = np.dtype("<f4") if width == 4 else np.dtype("<f8")
        (count,) = struct.unpack("<I", fh.read(4))
        codes = np.frombuffer(fh.read(4 * count), dtype="<u4")
        if len(codes) != count or count != vocab_size:
            raise CheckpointError(f"{path}: vocabulary block corrupt")
        vocab = Vocabulary([chr(int(c)) for c in codes])
        cfg = ModelConfig(vocab_size=vocab_size, num_layers=layers,
                          hidden_size=hidden, dense_size=dense,
                          leakiness=leakiness)
        params = zero_parameters(cfg, np.dtype(f"f{width}"))
        for _, arr in params.tensors():
            buf = fh.read(arr.size * width)
            if len(buf) != arr.size * width:
                raise CheckpointError(f"{path}: truncated tensor data")
            arr[...] = np.frombuffer(buf, dtype=dtype).reshape(arr.shape)
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes")
    return Checkpoint(model_cfg=cfg, params=params, vocab=vocab,
                      scheme=scheme, k1=k1, k2=k2, rotation=rotation,
                      test_len=test_len)
