"""Single-file checkpoint container.

Layout: magic, little-endian u32 header length, JSON header, raw array
payload. The header carries array manifest (name, shape, dtype, offset),
all configs, vocabularies, rng states and the latest validation metrics;
the payload holds the named arrays, floats stored as little-endian f32.
A sha256 of the payload guards against truncation; saves are atomic.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"SGEDITCKPT1\x00"

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class CheckpointError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add_state_dict(self, prefix: str, state: dict) -> None:
        for name, tensor in state.items():
            arr = tensor.detach().cpu().numpy()
            if arr.dtype.kind == "f":
                arr = arr.astype("<f4")
            elif arr.dtype.kind in "iu":
                arr = arr.astype("<i8")
            else:
                raise CheckpointError(f"unsupported dtype {arr.dtype} for {name}")
            self.arrays[f"{prefix}.{name}"] = arr

    def state_dict(self, prefix: str) -> dict[str, np.ndarray]:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in self.arrays.items() if k.startswith(prefix + ".")}


def save(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    manifest = []
    chunks = []
    offset = 0
    for name in sorted(ckpt.arrays):
        # note: ascontiguousarray would promote 0-d arrays to 1-d
        arr = np.asarray(ckpt.arrays[name], order="C")
        raw = arr.tobytes()
        manifest.append({"name": name, "shape": list(arr.shape),
                         "dtype": arr.dtype.str, "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = dict(ckpt.meta)
    header["format_version"] = 1
    header["arrays"] = manifest
    header["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    header_bytes = json.dumps(header).encode()
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)
    os.replace(tmp, path)


def load(path) -> Checkpoint:
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack("<I", blob[len(MAGIC):len(MAGIC) + 4])
    header_start = len(MAGIC) + 4
    try:
        header = json.loads(blob[header_start:header_start + header_len])
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from e
    payload = blob[header_start + header_len:]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise CheckpointError(f"{path}: payload checksum mismatch (truncated or corrupt)")
    arrays = {}
    for item in header["arrays"]:
        dtype = _DTYPES.get(item["dtype"])
        if dtype is None:
            raise CheckpointError(f"{path}: unknown array dtype {item['dtype']}")
        start, n = item["offset"], item["nbytes"]
        arr = np.frombuffer(payload[start:start + n], dtype=dtype).reshape(item["shape"])
        arrays[item["name"]] = arr.copy()
    meta = {k: v for k, v in header.items()
            if k not in ("arrays", "payload_sha256", "format_version")}
    return Checkpoint(arrays=arrays, meta=meta)


def encode_rng(rng: np.random.Generator) -> dict:
    return {"numpy": json.loads(json.dumps(rng.bit_generator.state))}


def decode_rng(state: dict) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state["numpy"]
    return rng


def encode_bytes(b: bytes) -> str:
    return base64.b64encode(b).decode()


def decode_bytes(s: str) -> bytes:
    return base64.b64decode(s)
