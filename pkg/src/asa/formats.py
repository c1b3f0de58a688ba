"""Binary dataset (``ASAD``) and checkpoint (``ASAM``) files.

Both formats are little-endian. Dataset layout::

    b"ASAD" | u32 version | u32 T | u32 r_x | u32 num_senones
    | u32 len + utf-8 speaker_id | f64[T * r_x] features (row-major) | u32[T] labels

Checkpoint layout::

    b"ASAM" | u32 version | u32 len + utf-8 JSON metadata (sorted keys)
    | u32 tensor count | per tensor: u32 len + utf-8 name, u32 rank, u32[rank] dims, f64[...] values
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .datagen import FrameDataset
from .errors import FormatError, ShapeError, UnsupportedVersionError
from .models import AcousticModel, Discriminator, ModelRole
from .nn import DenseLayer, Network

DATASET_MAGIC = b"ASAD"
CHECKPOINT_MAGIC = b"ASAM"
DATASET_VERSION = 1
CHECKPOINT_VERSION = 1


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what: str) -> str:
        n = self.u32(f"{what} length")
        start = self.pos
        raw = self.take(n, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{what} is not valid UTF-8", start) from None

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        size = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * size, what), dtype=dtype).copy()

    def header(self, magic: bytes, version: int) -> None:
        got = self.take(4, "magic")
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}", 0)
        v = self.u32("version")
        if v != version:
            raise UnsupportedVersionError(f"unsupported format version {v}", 4)

    def finish(self) -> None:
        if self.pos != len(self.buf):
            raise FormatError("trailing bytes after payload", self.pos)


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def dataset_bytes(d: FrameDataset) -> bytes:
    T, r_x = d.features.shape
    return b"".join([
        DATASET_MAGIC,
        struct.pack("<IIII", DATASET_VERSION, T, r_x, d.num_senones),
        _string(d.speaker_id),
        np.ascontiguousarray(d.features, dtype="<f8").tobytes(),
        np.ascontiguousarray(d.labels, dtype="<u4").tobytes(),
    ])


def save_dataset(d: FrameDataset, path) -> None:
    Path(path).write_bytes(dataset_bytes(d))


def parse_dataset(buf: bytes) -> FrameDataset:
    r = _Reader(buf)
    r.header(DATASET_MAGIC, DATASET_VERSION)
    T = r.u32("frame count")
    r_x = r.u32("feature dimension")
    k = r.u32("senone count")
    speaker = r.string("speaker id")
    feats = r.array("<f8", T * r_x, "features").reshape(T, r_x)
    label_pos = r.pos
    labels = r.array("<u4", T, "labels")
    r.finish()
    if T and labels.max() >= k:
        raise FormatError(f"label out of range for {k} senones", label_pos)
    return FrameDataset(feats.astype(np.float64), labels.astype(np.int64), speaker, k)


def load_dataset(path) -> FrameDataset:
    return parse_dataset(Path(path).read_bytes())


# ---------------------------------------------------------------- checkpoints

def _net_tensors(prefix: str, net: Network) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, layer in enumerate(net.layers):
        out.append((f"{prefix}.{i}.weight", layer.weight))
        out.append((f"{prefix}.{i}.bias", layer.bias))
    return out


def checkpoint_bytes(m: AcousticModel | Discriminator) -> bytes:
    if isinstance(m, AcousticModel):
        meta = {
            "kind": "acoustic_model",
            "role": m.role.value,
            "n_h": m.split_index,
            "num_senones": m.num_senones,
            "r_x": m.input_dim,
            "r_f": m.feature_dim,
            "extractor_activations": m.feature_extractor.activations,
            "classifier_activations": m.senone_classifier.activations,
        }
        tensors = _net_tensors("f", m.feature_extractor) + _net_tensors("y", m.senone_classifier)
    elif isinstance(m, Discriminator):
        meta = {"kind": "discriminator", "input_dim": m.input_dim, "activations": m.net.activations}
        tensors = _net_tensors("d", m.net)
    else:
        raise TypeError(f"cannot checkpoint {type(m).__name__}")
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        _string(json.dumps(meta, sort_keys=True, separators=(",", ":"))),
        struct.pack("<I", len(tensors)),
    ]
    for name, arr in tensors:
        parts.append(_string(name))
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(m: AcousticModel | Discriminator, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(m))


def _build_net(tensors: dict[str, np.ndarray], prefix: str, activations: list[str], offset: int) -> Network:
    layers = []
    for i, act in enumerate(activations):
        try:
            w = tensors.pop(f"{prefix}.{i}.weight")
            b = tensors.pop(f"{prefix}.{i}.bias")
        except KeyError as e:
            raise FormatError(f"missing tensor {e.args[0]}", offset) from None
        layers.append(DenseLayer(w, b, act))
    try:
        return Network(layers)
    except ShapeError as e:
        raise FormatError(f"inconsistent tensors for {prefix!r}: {e}", offset) from None


def parse_checkpoint(buf: bytes) -> AcousticModel | Discriminator:
    r = _Reader(buf)
    r.header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    meta_pos = r.pos
    try:
        meta = json.loads(r.string("metadata"))
    except json.JSONDecodeError:
        raise FormatError("metadata is not valid JSON", meta_pos) from None
    count = r.u32("tensor count")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.string("tensor name")
        rank = r.u32("tensor rank")
        dims = [r.u32("tensor dim") for _ in range(rank)]
        tensors[name] = r.array("<f8", int(np.prod(dims)), name).reshape(dims).astype(np.float64)
    end = r.pos
    r.finish()

    kind = meta.get("kind")
    if kind == "discriminator":
        net = _build_net(tensors, "d", meta["activations"], end)
        if net.input_dim != meta["input_dim"]:
            raise FormatError("discriminator input_dim disagrees with its metadata", meta_pos)
        out: AcousticModel | Discriminator = Discriminator(net)
    elif kind == "acoustic_model":
        f = _build_net(tensors, "f", meta["extractor_activations"], end)
        y = _build_net(tensors, "y", meta["classifier_activations"], end)
        try:
            out = AcousticModel(f, y, meta["n_h"], ModelRole(meta["role"]))
        except ShapeError as e:
            raise FormatError(f"inconsistent acoustic model: {e}", end) from None
        for key, got in (("r_x", out.input_dim), ("r_f", out.feature_dim), ("num_senones", out.num_senones)):
            if meta[key] != got:
                raise FormatError(f"metadata {key}={meta[key]} but tensors give {got}", meta_pos)
    else:
        raise FormatError(f"unknown checkpoint kind {kind!r}", meta_pos)
    if tensors:
        raise FormatError(f"unexpected tensors {sorted(tensors)}", end)
    return out


def load_checkpoint(path) -> AcousticModel | Discriminator:
    return parse_checkpoint(Path(path).read_bytes())


def check_compatible(m: AcousticModel, d: FrameDataset) -> None:
    """Raise ShapeError when a dataset cannot be fed to a model."""
    if d.input_dim != m.input_dim:
        raise ShapeError(f"dataset frames are {d.input_dim}-dim but the model expects r_x={m.input_dim}")
    if d.num_senones != m.num_senones:
        raise ShapeError(f"dataset has {d.num_senones} senones but the model has {m.num_senones}")
