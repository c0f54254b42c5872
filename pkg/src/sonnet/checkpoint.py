"""Flat binary checkpoint format for model parameters.

Layout (all integers little-endian):

    magic   4 bytes  b"SNN1"
    version u32      currently 1
    cfg_len u32      followed by cfg_len bytes of UTF-8 JSON (ModelConfig)
    count   u32      number of named tensors, then per tensor:
        name_len u16, name bytes (UTF-8)
        ndim     u16, ndim x u32 extents
        data     float64 little-endian, C order

Parameter order is the model's own parameters() order, which is a pure
function of the config, so files written from equal states are
byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .model import ModelConfig, SonnetModel

__all__ = ["save_checkpoint", "load_checkpoint", "CheckpointError"]

MAGIC = b"SNN1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: SonnetModel):
    cfg_json = json.dumps(dataclasses.asdict(model.cfg), sort_keys=True).encode()
    params = model.parameters()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(cfg_json)))
        fh.write(cfg_json)
        fh.write(struct.pack("<I", len(params)))
        for name, p in params.items():
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<H", p.ndim))
            fh.write(struct.pack(f"<{p.ndim}I", *p.shape))
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> SonnetModel:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path} is not a model checkpoint")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (cfg_len,) = struct.unpack("<I", fh.read(4))
        cfg = ModelConfig(**json.loads(fh.read(cfg_len).decode()))
        model = SonnetModel(cfg)
        params = model.parameters()
        (count,) = struct.unpack("<I", fh.read(4))
        if count != len(params):
            raise CheckpointError(
                f"checkpoint holds {count} tensors, model expects {len(params)}")
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<H", fh.read(2))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(shape)
            if name not in params:
                raise CheckpointError(f"unexpected tensor {name!r} in checkpoint")
            if params[name].shape != shape:
                raise CheckpointError(
                    f"tensor {name!r} shape {shape} does not match model "
                    f"{params[name].shape}")
            params[name].data = data.astype(np.float64).copy()
    return model
