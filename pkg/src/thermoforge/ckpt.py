"""Self-describing checkpoint container shared by all trained models.

Layout: magic ``TCK1``, little-endian u32 header length, a JSON header
(kind, architecture config, metadata, tensor directory), then the raw
little-endian tensor payload in sorted-name order. Serialization is
deterministic so identical training runs produce identical files.
"""

import json
import struct
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path

import numpy as np

from .errors import MissingCheckpoint

CKPT_MAGIC = b"TCK1"


@dataclass
class Checkpoint:
    kind: str
    config: dict
    meta: dict
    tensors: dict

    def tensor(self, name: str) -> np.ndarray:
        return self.tensors[name]


def save_checkpoint(path, kind: str, config: dict, tensors: dict, meta: dict) -> str:
    """Write a checkpoint; returns its content hash."""
    names = sorted(tensors)
    directory = {}
    offset = 0
    blobs = []
    for name in names:
        arr = np.asarray(tensors[name])
        if arr.dtype == np.float64:
            arr = arr.astype(np.float32)
        blob = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        directory[name] = {
            "dtype": str(arr.dtype),
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(blob),
        }
        offset += len(blob)
        blobs.append(blob)

    header = json.dumps(
        {"kind": kind, "config": config, "meta": meta, "tensors": directory},
        sort_keys=True,
    ).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)
    return checkpoint_hash(path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise MissingCheckpoint(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        if f.read(4) != CKPT_MAGIC:
            raise MissingCheckpoint(f"{path}: not a TCK1 checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        payload = f.read()
    tensors = {}
    for name, info in header["tensors"].items():
        raw = payload[info["offset"] : info["offset"] + info["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(info["dtype"])).reshape(info["shape"])
        tensors[name] = arr.copy()
    return Checkpoint(kind=header["kind"], config=header["config"],
                      meta=header["meta"], tensors=tensors)


def checkpoint_hash(path) -> str:
    """64-bit content hash of the checkpoint file."""
    return blake2b(Path(path).read_bytes(), digest_size=8).hexdigest()
