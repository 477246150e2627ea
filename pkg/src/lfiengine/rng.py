"""Counter-based random number streams.

Every stochastic node draws from its own keyed Philox4x32-10 stream.  The
key is derived from ``(root_seed, batch_index, node_name)`` with SHA-256,
so any batch of any node can be generated independently, in any order, on
any worker, with bit-identical results.

Counter budget per draw is fixed: one 128-bit counter block yields one
uniform double (53 high bits) or one standard normal (Box-Muller on the
two 64-bit halves of the block, the sine partner is discarded).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)

_TWO_NEG53 = 2.0 ** -53


def philox4x32(counter: np.ndarray, key0: int, key1: int) -> np.ndarray:
    """Philox4x32 with 10 rounds.

    Parameters
    ----------
    counter : (n, 4) uint32 array of counter blocks.
    key0, key1 : 32-bit key words.

    Returns
    -------
    (n, 4) uint32 array of output blocks.
    """
    c0 = counter[:, 0].astype(np.uint64)
    c1 = counter[:, 1].astype(np.uint32)
    c2 = counter[:, 2].astype(np.uint64)
    c3 = counter[:, 3].astype(np.uint32)
    # keys may be scalars or per-row arrays
    k0 = np.asarray(key0, dtype=np.uint64)
    k1 = np.asarray(key1, dtype=np.uint64)
    for _ in range(10):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
        lo0 = (p0 & _MASK32).astype(np.uint32)
        hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
        lo1 = (p1 & _MASK32).astype(np.uint32)
        c0 = (hi1 ^ c1 ^ k0.astype(np.uint32)).astype(np.uint64)
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1.astype(np.uint32)).astype(np.uint64)
        c3 = lo0
        k0 = (k0 + np.uint64(0x9E3779B9)) & _MASK32
        k1 = (k1 + np.uint64(0xBB67AE85)) & _MASK32
    out = np.empty((counter.shape[0], 4), dtype=np.uint32)
    out[:, 0] = c0.astype(np.uint32)
    out[:, 1] = c1
    out[:, 2] = c2.astype(np.uint32)
    out[:, 3] = c3
    return out


def derive_key(root_seed: int, batch_index: int, node_name: str) -> bytes:
    """SHA-256 digest of the stream coordinates (full 32 bytes)."""
    h = hashlib.sha256()
    h.update(struct.pack("<Q", root_seed & 0xFFFFFFFFFFFFFFFF))
    h.update(struct.pack("<Q", batch_index & 0xFFFFFFFFFFFFFFFF))
    h.update(node_name.encode("utf-8"))
    return h.digest()


def derive_seed64(root_seed: int, batch_index: int, node_name: str) -> int:
    """64-bit seed handed to external simulators (little-endian head of the
    stream key digest)."""
    return struct.unpack("<Q", derive_key(root_seed, batch_index, node_name)[:8])[0]


@dataclass
class RngStream:
    """A deterministic sub-stream addressed by (root_seed, batch_index,
    node_name).  State is the 128-bit monotone counter only."""

    root_seed: int
    batch_index: int
    node_name: str
    counter: int = 0
    _key: tuple = field(init=False, repr=False)

    def __post_init__(self):
        digest = derive_key(self.root_seed, self.batch_index, self.node_name)
        k0, k1 = struct.unpack("<II", digest[:8])
        self._key = (k0, k1)

    def _blocks(self, n: int) -> np.ndarray:
        """Consume n counter blocks, returning (n, 4) uint32 outputs."""
        start = self.counter
        self.counter += n
        idx = start + np.arange(n, dtype=np.uint64)
        ctr = np.zeros((n, 4), dtype=np.uint32)
        ctr[:, 0] = (idx & _MASK32).astype(np.uint32)
        ctr[:, 1] = (idx >> np.uint64(32)).astype(np.uint32)
        return philox4x32(ctr, *self._key)

    def uniform(self, n: int = 1) -> np.ndarray:
        """n uniform doubles in [0, 1); one counter block each."""
        blocks = self._blocks(n)
        lo = blocks[:, 0].astype(np.uint64)
        hi = blocks[:, 1].astype(np.uint64)
        v = (lo | (hi << np.uint64(32))) >> np.uint64(11)
        return v.astype(np.float64) * _TWO_NEG53

    def normal(self, n: int = 1) -> np.ndarray:
        """n standard normals; one counter block each (paired Box-Muller,
        cosine branch)."""
        blocks = self._blocks(n)
        a = blocks[:, 0].astype(np.uint64) | (blocks[:, 1].astype(np.uint64) << np.uint64(32))
        b = blocks[:, 2].astype(np.uint64) | (blocks[:, 3].astype(np.uint64) << np.uint64(32))
        # u1 in (0, 1] keeps the log finite; u2 in [0, 1)
        u1 = ((a >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_NEG53
        u2 = (b >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def rng_stream(root_seed: int, batch_index: int, node_name: str) -> RngStream:
    """The stream for one node in one batch of one run."""
    return RngStream(root_seed, batch_index, node_name)
