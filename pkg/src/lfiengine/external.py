"""Subprocess bridge for simulators written in other languages.

One process per batch.  The engine writes a single JSON document to the
child's stdin and reads a single JSON document from its stdout:

    -> {"protocol": 1, "batch_index": I, "seed": S, "batch_size": B,
        "parameters": {"<name>": [... B values ...], ...}}
    <- {"protocol": 1, "output": [[...], ... B rows ...]}

The child must derive all of its randomness from ``seed``; bit-equality
across language implementations is not promised, determinism per request
is.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field

import numpy as np

from .errors import ExternalTimeoutError, NonzeroExitError, ProtocolError

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class ExternalCommand:
    argv: tuple
    timeout_seconds: float = 60.0
    working_dir: str = None

    def __post_init__(self):
        object.__setattr__(self, "argv", tuple(str(a) for a in self.argv))
        if not self.argv:
            raise ValueError("argv must be nonempty")
        if not self.timeout_seconds > 0:
            raise ValueError("timeout must be positive")


def build_request(batch_index: int, seed: int, batch_size: int, parameters: dict) -> dict:
    params = {}
    for name, values in parameters.items():
        arr = np.asarray(values, dtype=float)
        if arr.shape[0] != batch_size:
            raise ProtocolError(
                f"parameter '{name}' has {arr.shape[0]} values, expected {batch_size}")
        params[name] = arr.tolist()
    return {
        "protocol": PROTOCOL_VERSION,
        "batch_index": int(batch_index),
        "seed": int(seed),
        "batch_size": int(batch_size),
        "parameters": params,
    }


def invoke_external(cmd: ExternalCommand, request: dict) -> np.ndarray:
    """Run one batch through an external simulator.

    Returns a (batch_size, ...) float array, one row per element.
    """
    payload = json.dumps(request).encode("utf-8")
    try:
        proc = subprocess.run(
            list(cmd.argv),
            input=payload,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=cmd.working_dir,
            timeout=cmd.timeout_seconds,
        )
    except subprocess.TimeoutExpired as e:
        raise ExternalTimeoutError(
            f"{cmd.argv[0]} exceeded {cmd.timeout_seconds}s") from e
    if proc.returncode != 0:
        raise NonzeroExitError(proc.returncode, proc.stderr.decode("utf-8", "replace"))
    try:
        reply = json.loads(proc.stdout.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise ProtocolError(f"malformed reply from {cmd.argv[0]}: {e}") from e
    if not isinstance(reply, dict) or reply.get("protocol") != PROTOCOL_VERSION:
        raise ProtocolError(f"wrong or missing protocol version in reply: "
                            f"{reply.get('protocol') if isinstance(reply, dict) else reply!r}")
    rows = reply.get("output")
    if not isinstance(rows, list) or len(rows) != request["batch_size"]:
        got = len(rows) if isinstance(rows, list) else type(rows).__name__
        raise ProtocolError(f"expected {request['batch_size']} output rows, got {got}")
    try:
        arr = np.asarray(rows, dtype=float)
    except ValueError as e:
        raise ProtocolError(f"non-numeric or ragged output rows: {e}") from e
    return arr
