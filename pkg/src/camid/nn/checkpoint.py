"""CMID checkpoint format.

Layout: magic b"CMID", uint32 version, uint32 header length, UTF-8 JSON
header (model config, element precision, layer names with shapes), then the
raw little-endian parameter payloads in header order. Round-trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointFormatError
from .model import DTYPES, MicroDenseNet, ModelConfig

MAGIC = b"CMID"
VERSION = 1

_NUMPY_DTYPES = {"f32": "<f4", "f64": "<f8"}


def save_checkpoint(model: MicroDenseNet, path: str | Path) -> None:
    """Write atomically: temp file in place, then rename."""
    params = model.params()
    header = {
        "config": model.config.to_dict(),
        "precision": model.precision,
        "layers": [{"name": name, "shape": list(arr.shape)} for name, arr in params],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header_bytes)))
        f.write(header_bytes)
        wire = _NUMPY_DTYPES[model.precision]
        for _, arr in params:
            f.write(np.ascontiguousarray(arr, dtype=wire).tobytes())
    tmp.replace(path)


def load_checkpoint(path: str | Path, expect_classes: int | None = None) -> MicroDenseNet:
    """Rebuild a model from a CMID file; shapes are validated layer by layer."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise CheckpointFormatError("bad magic: not a CMID checkpoint")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported version {version}")
    if len(data) < 12 + header_len:
        raise CheckpointFormatError("truncated header")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        precision = header["precision"]
        layers = header["layers"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"malformed header: {exc}") from exc
    if precision not in DTYPES:
        raise CheckpointFormatError(f"unknown precision {precision!r}")
    if expect_classes is not None and config.num_classes != expect_classes:
        raise CheckpointFormatError(
            f"layer fc.w: checkpoint has {config.num_classes} classes, "
            f"task needs {expect_classes}"
        )
    model = MicroDenseNet(config, precision=precision)
    own = model.param_dict()
    if [l["name"] for l in layers] != [name for name, _ in model.params()]:
        raise CheckpointFormatError("layer names do not match the model config")
    wire = np.dtype(_NUMPY_DTYPES[precision])
    pos = 12 + header_len
    values = {}
    for layer in layers:
        name, shape = layer["name"], tuple(layer["shape"])
        if own[name].shape != shape:
            raise CheckpointFormatError(
                f"layer {name}: checkpoint shape {shape}, model expects {own[name].shape}"
            )
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * wire.itemsize
        if pos + nbytes > len(data):
            raise CheckpointFormatError(f"truncated payload at layer {name}")
        values[name] = np.frombuffer(data[pos : pos + nbytes], dtype=wire).reshape(shape)
        pos += nbytes
    if pos != len(data):
        raise CheckpointFormatError(f"{len(data) - pos} trailing bytes after payload")
    model.set_params(values)
    return model
