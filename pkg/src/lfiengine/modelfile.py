"""Declarative model files: a versioned JSON schema that parses into a
graph, so problem definitions can be saved and shared."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import ModelParseError, ModelSchemaError
from .external import ExternalCommand
from .graph import NODE_KINDS, GraphSpec, NodeSpec, validate

SCHEMA_VERSION = 1


def _require(cond, msg):
    if not cond:
        raise ModelSchemaError(msg)


def _parse_op(raw, node_name):
    if raw is None or isinstance(raw, str):
        return raw
    if isinstance(raw, dict):
        _require("command" in raw, f"node '{node_name}': external op needs 'command'")
        cmd = raw["command"]
        _require(isinstance(cmd, list) and cmd and all(isinstance(c, str) for c in cmd),
                 f"node '{node_name}': op.command must be a nonempty list of strings")
        return ExternalCommand(tuple(cmd),
                               timeout_seconds=float(raw.get("timeout", 60.0)),
                               working_dir=raw.get("working_dir"))
    raise ModelSchemaError(f"node '{node_name}': op must be a string or external descriptor")


def _load_observed(raw, base_dir, name):
    if isinstance(raw, dict):
        _require("csv" in raw, f"observed['{name}'] object needs a 'csv' path")
        path = os.path.join(base_dir, raw["csv"])
        try:
            with open(path, newline="") as f:
                rows = [[float(v) for v in row] for row in csv.reader(f) if row]
        except (OSError, ValueError) as e:
            raise ModelParseError(f"cannot read observed CSV {path}: {e}") from e
        arr = np.asarray(rows, dtype=float)
        return arr.ravel() if 1 in arr.shape or arr.ndim == 1 else arr
    try:
        return np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as e:
        raise ModelSchemaError(f"observed['{name}'] is not numeric: {e}") from e


def parse_model(path: str) -> GraphSpec:
    """Load and validate a model file; raises with field context on any
    schema or graph violation."""
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ModelParseError(f"cannot read model file: {e}") from e
    except ValueError as e:
        raise ModelParseError(f"model file is not valid JSON: {e}") from e

    _require(isinstance(doc, dict), "model file must be a JSON object")
    _require(doc.get("schema") == SCHEMA_VERSION,
             f"field 'schema': expected {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    _require(isinstance(doc.get("nodes"), list) and doc["nodes"],
             "field 'nodes': must be a nonempty list")

    # nodes may appear in any order; unknown parents and cycles are left to
    # graph validation, which reports them with their proper diagnostics
    specs = []
    for i, raw in enumerate(doc["nodes"]):
        where = f"nodes[{i}]"
        _require(isinstance(raw, dict), f"{where}: must be an object")
        _require(isinstance(raw.get("name"), str), f"{where}.name: required string")
        kind = raw.get("kind")
        _require(kind in NODE_KINDS,
                 f"{where}.kind: unknown kind {kind!r} (one of {', '.join(NODE_KINDS)})")
        try:
            specs.append(NodeSpec(
                name=raw["name"],
                kind=kind,
                op=_parse_op(raw.get("op"), raw["name"]),
                parents=tuple(raw.get("parents", ())),
                args=tuple(raw.get("args", ())),
                vectorized=bool(raw.get("vectorized", False)),
            ))
        except ModelSchemaError:
            raise
        except Exception as e:
            raise ModelSchemaError(f"{where}: {e}") from e
    graph = GraphSpec(tuple(specs))

    base_dir = os.path.dirname(os.path.abspath(path))
    for name, raw in (doc.get("observed") or {}).items():
        _require(graph.has_node(name), f"observed['{name}']: no such node")
        graph = graph.with_observed(name, _load_observed(raw, base_dir, name))

    violations = validate(graph)
    if violations:
        raise ModelParseError(
            "model fails validation: " + "; ".join(str(v) for v in violations))
    return graph


def model_parameters(path: str) -> list:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    return list(doc.get("parameters", []))
