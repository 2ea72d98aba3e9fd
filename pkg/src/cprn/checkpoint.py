"""Bit-exact binary checkpoints.

Layout: magic "CPRN", format version u32 LE, length-prefixed (u32 LE) UTF-8
JSON header, tensor count u32 LE, then per tensor: name length u16 LE + UTF-8
name, ndim u8, dims u32 LE each, payload as raw little-endian float32; the file
ends with a CRC32 (u32 LE) of all preceding bytes.

The JSON header carries the model config echo, the model seed, the optimizer
step count and the trainer RNG/epoch state; Adam moments travel as extra
tensors under the reserved "opt.m." / "opt.v." prefixes.
"""

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .model import Model, ModelConfig, build

MAGIC = b"CPRN"
VERSION = 1
_OPT_M = "opt.m."
_OPT_V = "opt.v."


@dataclass
class OptimizerState:
    """Adam moments per parameter plus the global step count."""

    m: dict
    v: dict
    step: int = 0

    @classmethod
    def fresh(cls, params):
        return cls(m={k: np.zeros(t.dims, dtype=np.float32) for k, t in params.items()},
                   v={k: np.zeros(t.dims, dtype=np.float32) for k, t in params.items()},
                   step=0)


@dataclass
class LoadedCheckpoint:
    model: Model
    optimizer: OptimizerState
    trainer_state: dict  # rng/epoch bookkeeping; None when saved outside training


def _pack_tensor(name, arr):
    nb = name.encode("utf-8")
    out = [struct.pack("<H", len(nb)), nb, struct.pack("B", arr.ndim)]
    out += [struct.pack("<I", d) for d in arr.shape]
    out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def save_checkpoint(path, model, optimizer=None, trainer_state=None):
    """Write the model (and optionally optimizer/trainer state) to ``path``."""
    header = {
        "config": model.config.to_dict(),
        "seed": model.seed,
        "step": optimizer.step if optimizer is not None else 0,
        "trainer": trainer_state,
        "has_optimizer": optimizer is not None,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    entries = [(name, t.data) for name, t in model.params.items()]
    if optimizer is not None:
        entries += [(_OPT_M + name, optimizer.m[name]) for name in model.params]
        entries += [(_OPT_V + name, optimizer.v[name]) for name in model.params]

    blob = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(header_bytes)), header_bytes,
            struct.pack("<I", len(entries))]
    blob += [_pack_tensor(name, arr) for name, arr in entries]
    body = b"".join(blob)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint: ran out of bytes reading {what} "
                                  f"at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u16(self, what):
        return struct.unpack("<H", self.take(2, what))[0]

    def u8(self, what):
        return self.take(1, what)[0]


def load_checkpoint(path):
    """Load a checkpoint: rebuilds the model from the config echo, then restores
    every parameter (and optimizer moments) bit-exactly."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise CheckpointError("truncated checkpoint: shorter than the magic")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CheckpointError(f"checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")

    r = _Reader(data[:-4])
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {VERSION}")
    header_len = r.u32("header length")
    try:
        header = json.loads(r.take(header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc

    config = ModelConfig(**header["config"])
    model = build(config, seed=header["seed"])
    optimizer = OptimizerState.fresh(model.params) if header.get("has_optimizer") else None
    if optimizer is not None:
        optimizer.step = header.get("step", 0)

    seen = set()
    count = r.u32("tensor count")
    for _ in range(count):
        name_len = r.u16("name length")
        name = r.take(name_len, "name").decode("utf-8")
        ndim = r.u8("ndim")
        dims = tuple(r.u32("dim") for _ in range(ndim))
        size = int(np.prod(dims)) if dims else 1
        payload = r.take(4 * size, f"payload of {name}")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
        if name in seen:
            raise CheckpointError(f"duplicate tensor name {name}")
        seen.add(name)

        if name.startswith(_OPT_M) or name.startswith(_OPT_V):
            if optimizer is None:
                raise CheckpointError(f"optimizer tensor {name} in a checkpoint without optimizer state")
            target, key = (optimizer.m, name[len(_OPT_M):]) if name.startswith(_OPT_M) \
                else (optimizer.v, name[len(_OPT_V):])
            if key not in model.params:
                raise CheckpointError(f"unknown parameter name {key} (from {name})")
            if dims != model.params[key].dims:
                raise CheckpointError(f"{name}: dims {dims} != parameter dims {model.params[key].dims}")
            target[key] = arr
        else:
            if name not in model.params:
                raise CheckpointError(f"unknown parameter name {name}")
            if dims != model.params[name].dims:
                raise CheckpointError(f"{name}: dims {dims} != expected {model.params[name].dims}")
            model.params[name].data = arr

    missing = [k for k in model.params if k not in seen]
    if missing:
        raise CheckpointError(f"checkpoint is missing parameters: {missing[:3]}{'...' if len(missing) > 3 else ''}")
    if r.pos != len(r.data):
        raise CheckpointError(f"{len(r.data) - r.pos} trailing bytes after the last tensor")
    return LoadedCheckpoint(model=model, optimizer=optimizer, trainer_state=header.get("trainer"))
