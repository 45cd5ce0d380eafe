"""Self-describing file: a magic line, one JSON header line, then raw LE arrays.

The header lists every array (name, dtype, shape) in payload order, so the
file can be inspected with ``head -2`` and read back without this package.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError


def write_container(path, magic: str, header: dict, arrays: dict) -> None:
    specs = []
    blobs = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype=np.asarray(arr).dtype.newbyteorder("<"))
        specs.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape)})
        blobs.append(a.tobytes(order="C"))
    doc = dict(header)
    doc["arrays"] = specs
    text = f"{magic} 1\n" + json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    try:
        with open(path, "wb") as fh:
            fh.write(text.encode("utf-8"))
            for b in blobs:
                fh.write(b)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_container(path, magic: str):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    first = blob.find(b"\n")
    second = blob.find(b"\n", first + 1)
    if first < 0 or second < 0:
        raise FormatError(f"{path}: missing header")
    if blob[:first].decode("ascii", "replace") != f"{magic} 1":
        raise FormatError(f"{path}: expected a {magic} v1 file")
    try:
        doc = json.loads(blob[first + 1:second])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad header: {exc}") from exc
    offset = second + 1
    arrays = {}
    for spec in doc.pop("arrays", []):
        dtype = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(blob):
            raise FormatError(f"{path}: truncated payload for {spec['name']}")
        arrays[spec["name"]] = (
            np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(spec["shape"]).copy()
        )
        offset += nbytes
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return doc, arrays
