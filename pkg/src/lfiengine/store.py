"""Content-addressed persistence of per-node batch outputs.

Keys combine the node's subgraph digest with (root_seed, batch_size,
batch_index), so cached simulator output survives any downstream edit that
leaves the simulator's ancestor closure untouched ("change the summary,
keep the simulations").

On-disk layout::

    <store_dir>/manifest.json
    <store_dir>/blobs/<hex digest>/<seed>_<bsize>_<bindex>.bin

Blob format: 16-byte magic ("LFI0" zero-padded), u32 element rank, one u64
per dimension, raw little-endian float64 data (batch_size x element size),
then a trailing SHA-256 over all preceding bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumMismatchError, CorruptionError, StoreError

MAGIC = b"LFI0" + b"\x00" * 12
FORMAT_VERSION = 1


@dataclass(frozen=True)
class StoreKey:
    digest: bytes        # 32-byte subgraph digest
    root_seed: int
    batch_size: int
    batch_index: int

    def blob_path(self) -> str:
        return os.path.join(
            "blobs", self.digest.hex(),
            f"{self.root_seed}_{self.batch_size}_{self.batch_index}.bin")


def encode_blob(data: np.ndarray) -> bytes:
    """Serialize a (batch_size, *elem_shape) float array."""
    data = np.ascontiguousarray(data, dtype="<f8")
    elem_shape = data.shape[1:]
    head = MAGIC + struct.pack("<I", len(elem_shape))
    head += b"".join(struct.pack("<Q", d) for d in elem_shape)
    body = head + data.tobytes()
    return body + hashlib.sha256(body).digest()


def decode_blob(raw: bytes, batch_size: int) -> np.ndarray:
    if len(raw) < len(MAGIC) + 4 + 32 or raw[: len(MAGIC)] != MAGIC:
        raise CorruptionError("bad blob magic")
    body, check = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != check:
        raise ChecksumMismatchError("blob checksum mismatch")
    off = len(MAGIC)
    (rank,) = struct.unpack_from("<I", body, off)
    off += 4
    dims = struct.unpack_from(f"<{rank}Q", body, off)
    off += 8 * rank
    arr = np.frombuffer(body[off:], dtype="<f8")
    return arr.reshape((batch_size,) + tuple(int(d) for d in dims)).copy()


class Store:
    """Single-writer, multi-reader cache of node outputs.

    ``node_allowlist`` selects which nodes get persisted on record();
    None means simulator nodes only (they dominate cost).
    """

    def __init__(self, directory: str, node_allowlist=None):
        self.directory = directory
        self.node_allowlist = None if node_allowlist is None else set(node_allowlist)
        self._lock = threading.Lock()
        os.makedirs(os.path.join(directory, "blobs"), exist_ok=True)
        self._entries: dict = {}
        self._load_manifest()

    # -- manifest ----------------------------------------------------------

    @property
    def _manifest_path(self) -> str:
        return os.path.join(self.directory, "manifest.json")

    def _load_manifest(self):
        if not os.path.exists(self._manifest_path):
            return
        with open(self._manifest_path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        if doc.get("format_version") != FORMAT_VERSION:
            raise StoreError(f"unsupported manifest version {doc.get('format_version')}")
        for e in doc["entries"]:
            key = StoreKey(bytes.fromhex(e["digest"]), e["root_seed"],
                           e["batch_size"], e["batch_index"])
            self._entries[key] = e

    def _write_manifest(self):
        doc = {"format_version": FORMAT_VERSION,
               "entries": sorted(self._entries.values(),
                                 key=lambda e: (e["digest"], e["root_seed"],
                                                e["batch_size"], e["batch_index"]))}
        tmp = self._manifest_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=1)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self._manifest_path)

    # -- primitives --------------------------------------------------------

    def put(self, key: StoreKey, data) -> None:
        """Durable write: temp file, rename, then manifest update.  A second
        put with the same key is a no-op when the data matches and a
        CorruptionError when it does not."""
        data = np.asarray(data, dtype=float)
        if data.shape[0] != key.batch_size:
            raise StoreError(
                f"data has {data.shape[0]} rows, key says batch_size {key.batch_size}")
        blob = encode_blob(data)
        checksum = blob[-32:].hex()
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                if existing["checksum"] != checksum:
                    raise CorruptionError(
                        f"key {key.digest.hex()[:12]}.../{key.batch_index} already stored "
                        "with different contents")
                return
            rel = key.blob_path()
            path = os.path.join(self.directory, rel)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            tmp = path + ".tmp"
            with open(tmp, "wb") as f:
                f.write(blob)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
            self._entries[key] = {
                "digest": key.digest.hex(),
                "root_seed": int(key.root_seed),
                "batch_size": int(key.batch_size),
                "batch_index": int(key.batch_index),
                "path": rel,
                "shape": [int(d) for d in data.shape[1:]],
                "checksum": checksum,
            }
            self._write_manifest()

    def get(self, key: StoreKey):
        """Stored values, checksum-verified, or None when absent."""
        with self._lock:
            entry = self._entries.get(key)
        if entry is None:
            return None
        path = os.path.join(self.directory, entry["path"])
        try:
            with open(path, "rb") as f:
                raw = f.read()
        except OSError as e:
            raise StoreError(f"cannot read blob {entry['path']}: {e}") from e
        data = decode_blob(raw, key.batch_size)
        if raw[-32:].hex() != entry["checksum"]:
            raise ChecksumMismatchError("manifest checksum does not match blob")
        return data

    # -- graph-level reuse -------------------------------------------------

    def plan_reuse(self, cg, root_seed: int, batch_size: int, batch_index: int) -> dict:
        """Load every cached node of this batch; the executor skips them."""
        out = {}
        for name in cg.topo:
            key = StoreKey(cg.digests[name], root_seed, batch_size, batch_index)
            data = self.get(key)
            if data is not None:
                out[name] = data
        return out

    def record(self, cg, root_seed: int, batch_size: int, batch) -> None:
        """Persist the allowlisted nodes of a finished batch."""
        for name in cg.topo:
            if self.node_allowlist is None:
                if cg.node(name).kind != "simulator":
                    continue
            elif name not in self.node_allowlist:
                continue
            key = StoreKey(cg.digests[name], root_seed, batch_size, batch.batch_index)
            self.put(key, batch.values[name])
