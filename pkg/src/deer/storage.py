"""Deterministic on-disk artifacts: binary array containers, JSON-lines, hashes.

Every artifact must be byte-identical across reruns with the same config and
seed, so nothing here may embed timestamps or nondeterministic ordering.  The
binary container is a magic string, a length-prefixed canonical-JSON header
(sorted keys, fixed separators), and the raw little-endian array bytes in
header order.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Iterable

import numpy as np

MAGIC = b"DEERBIN1"


def canonical_json(obj) -> str:
    """Stable text form: sorted keys, no whitespace, round-trippable floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_arrays(path: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write metadata plus named arrays; bit-exact round trip, stable bytes."""
    manifest = []
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        manifest.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = canonical_json({"meta": meta, "arrays": manifest}).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(8, "little"))
        f.write(header)
        for blob in blobs:
            f.write(blob)
    os.replace(tmp, path)


def load_arrays(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a recognized array container")
        n = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(n).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * dtype.itemsize)
            arrays[entry["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return header["meta"], arrays


def write_jsonl(path: str, rows: Iterable[dict]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(canonical_json(row))
            f.write("\n")
    os.replace(tmp, path)


def read_jsonl(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


class JsonlWriter:
    """Incremental JSON-lines writer with the same canonical row encoding."""

    def __init__(self, path: str):
        self.path = path
        self._f = open(path, "w", encoding="utf-8")

    def write(self, row: dict) -> None:
        self._f.write(canonical_json(row))
        self._f.write("\n")

    def close(self) -> None:
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
