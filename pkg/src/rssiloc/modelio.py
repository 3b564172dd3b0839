"""Versioned binary model files.

Layout (all little-endian, documented byte-exactly in the README):

    offset  size
    0       4        magic "MLPL"
    4       2        format version (u16), currently 1
    6       8        seed (u64)
    14      1        layer count L including the input layer (u8)
    15      4*L      layer sizes (u32 each)
    ...     L-1      activation tags (u8 each): 1 = tansig, 2 = purelin
    ...     16*n_in  input normalization, (min, max) f64 pairs per input
    ...     16*n_out output normalization, (min, max) f64 pairs per output
    ...     ...      per layer: weight matrix row-major f64, bias f64
    end-4   4        CRC32 (u32) of every preceding byte

Round trips are bit-exact: the loaded model's forward outputs are
identical to the saved model's.
"""

from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptModel, DimensionMismatch, FormatError
from .mlp import Activation, MlpModel

MAGIC = b"MLPL"
FORMAT_VERSION = 1

_ACT_TO_TAG = {Activation.TANSIG: 1, Activation.PURELIN: 2}
_TAG_TO_ACT = {v: k for k, v in _ACT_TO_TAG.items()}


def model_bytes(model: MlpModel) -> bytes:
    """Serialize a model to its binary file representation."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HQB", FORMAT_VERSION, model.seed,
                          len(model.layer_sizes)))
    buf.write(struct.pack(f"<{len(model.layer_sizes)}I", *model.layer_sizes))
    buf.write(bytes(_ACT_TO_TAG[a] for a in model.activations))
    buf.write(np.ascontiguousarray(model.input_norm, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(model.output_norm, dtype="<f8").tobytes())
    for w, b in zip(model.weights, model.biases):
        buf.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    payload = buf.getvalue()
    return payload + struct.pack("<I", zlib.crc32(payload))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CorruptModel("model file is truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def model_from_bytes(blob: bytes) -> MlpModel:
    """Parse a model file; raises FormatError / CorruptModel."""
    if len(blob) < len(MAGIC):
        raise CorruptModel("model file is truncated")
    if blob[:len(MAGIC)] != MAGIC:
        raise FormatError("not a model file (bad magic)")
    if len(blob) < len(MAGIC) + 2:
        raise CorruptModel("model file is truncated")
    (version,) = struct.unpack_from("<H", blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version}")
    if len(blob) < 4:
        raise CorruptModel("model file is truncated")
    body, stored = blob[:-4], blob[-4:]
    if struct.pack("<I", zlib.crc32(body)) != stored:
        raise CorruptModel("checksum mismatch")

    r = _Reader(body)
    r.take(len(MAGIC) + 2)  # magic + version already checked
    seed, layer_count = r.unpack("<QB")
    if layer_count < 2:
        raise CorruptModel("layer count must be at least 2")
    sizes = r.unpack(f"<{layer_count}I")
    if any(s < 1 for s in sizes):
        raise CorruptModel("layer sizes must be positive")
    tags = r.take(layer_count - 1)
    try:
        activations = [_TAG_TO_ACT[t] for t in tags]
    except KeyError as exc:
        raise CorruptModel(f"unknown activation tag {exc.args[0]}") from None

    def norm_block(count):
        raw = r.take(16 * count)
        return np.frombuffer(raw, dtype="<f8").reshape(count, 2)

    input_norm = norm_block(sizes[0])
    output_norm = norm_block(sizes[-1])
    weights, biases = [], []
    for k in range(layer_count - 1):
        w_raw = r.take(8 * sizes[k] * sizes[k + 1])
        b_raw = r.take(8 * sizes[k + 1])
        weights.append(np.frombuffer(w_raw, dtype="<f8")
                       .reshape(sizes[k], sizes[k + 1]))
        biases.append(np.frombuffer(b_raw, dtype="<f8"))
    if r.pos != len(body):
        raise CorruptModel(f"{len(body) - r.pos} trailing bytes")
    try:
        return MlpModel(sizes, weights, biases, activations, input_norm,
                        output_norm, seed)
    except (ValueError, DimensionMismatch) as exc:
        raise CorruptModel(f"inconsistent model contents: {exc}") from exc


def save_model(model: MlpModel, sink) -> None:
    """Write a model to a path or binary file object."""
    blob = model_bytes(model)
    if hasattr(sink, "write"):
        sink.write(blob)
    else:
        Path(sink).write_bytes(blob)


def load_model(source) -> MlpModel:
    """Read a model from a path or binary file object."""
    if hasattr(source, "read"):
        blob = source.read()
    else:
        blob = Path(source).read_bytes()
    return model_from_bytes(blob)
