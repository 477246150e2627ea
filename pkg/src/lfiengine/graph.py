"""Declarative DAG of inference components and its compiled form.

A graph is a value: every mutation-style operation returns a new graph and
leaves the original untouched, so graphs can be shared freely across
workers.  Each node gets a Merkle-style content digest over its ancestor
closure; the digest is the key under which node outputs are cached.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass, field, replace as dc_replace
from typing import Optional, Union

import numpy as np

from .errors import (
    CycleError,
    DuplicateNameError,
    GraphValidationError,
    ObservedMissingError,
    ShapeInferenceError,
    UnknownNodeError,
    UnknownParentError,
)
from .external import ExternalCommand

NODE_KINDS = ("constant", "prior", "simulator", "summary", "distance", "operation")

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

#: Reserved batch index used for the one-off shape probe at compile time.
PROBE_BATCH_INDEX = 2**63 - 1


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: str
    op: Union[str, ExternalCommand, None] = None
    parents: tuple = ()
    args: tuple = ()
    vectorized: bool = False

    def __post_init__(self):
        if not _NAME_RE.match(self.name or ""):
            raise ValueError(f"invalid node name {self.name!r}")
        if self.kind not in NODE_KINDS:
            raise ValueError(f"invalid node kind {self.kind!r}")
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class GraphSpec:
    nodes: tuple = ()
    observed: tuple = ()   # ((node_name, ndarray), ...)

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise UnknownNodeError(f"unknown node '{name}'")

    def has_node(self, name: str) -> bool:
        return any(n.name == name for n in self.nodes)

    @property
    def names(self) -> tuple:
        return tuple(n.name for n in self.nodes)

    def observed_map(self) -> dict:
        return {k: v for k, v in self.observed}

    def with_observed(self, name: str, value) -> "GraphSpec":
        value = np.asarray(value, dtype=float)
        obs = tuple((k, v) for k, v in self.observed if k != name) + ((name, value),)
        return GraphSpec(self.nodes, obs)


@dataclass(frozen=True)
class Violation:
    code: str
    nodes: tuple
    message: str

    def __str__(self):
        return f"{self.code}[{','.join(self.nodes)}]: {self.message}"


@dataclass(frozen=True)
class CompiledGraph:
    """Frozen, ready-to-run form of a graph.

    observed_values holds the observed data and every summary computed from
    it; observed_reference holds, per distance node, the concatenated
    reference vector its parents compare against.
    """

    graph: GraphSpec
    topo: tuple
    digests: dict
    observed_values: dict
    observed_reference: dict
    output_shape: dict

    def node(self, name: str) -> NodeSpec:
        return self.graph.node(name)

    @property
    def parameter_names(self) -> tuple:
        return tuple(n.name for n in self.graph.nodes if n.kind == "prior")

    @property
    def distance_name(self) -> Optional[str]:
        for n in self.graph.nodes:
            if n.kind == "distance":
                return n.name
        return None

    @property
    def simulator_name(self) -> Optional[str]:
        for n in self.graph.nodes:
            if n.kind == "simulator":
                return n.name
        return None


# -- construction -----------------------------------------------------------

def add_node(graph: GraphSpec, spec: NodeSpec) -> GraphSpec:
    """Append a node; value semantics (the input graph is unmodified)."""
    if graph.has_node(spec.name):
        raise DuplicateNameError(f"node '{spec.name}' already present")
    for p in spec.parents:
        if not graph.has_node(p):
            raise UnknownParentError(f"node '{spec.name}' references missing parent '{p}'")
    return GraphSpec(graph.nodes + (spec,), graph.observed)


def replace_node(graph: GraphSpec, name: str, spec: NodeSpec) -> GraphSpec:
    """Swap one node in place, keeping descendants wired to the same name."""
    if not graph.has_node(name):
        raise UnknownNodeError(f"unknown node '{name}'")
    if spec.name != name:
        spec = dc_replace(spec, name=name)
    for p in spec.parents:
        if p != name and not graph.has_node(p):
            raise UnknownParentError(f"replacement for '{name}' references missing parent '{p}'")
    nodes = tuple(spec if n.name == name else n for n in graph.nodes)
    out = GraphSpec(nodes, graph.observed)
    topo_order(out)   # raises CycleError if the replacement closed a loop
    return out


# -- structure --------------------------------------------------------------

def _parent_map(graph: GraphSpec) -> dict:
    return {n.name: n.parents for n in graph.nodes}


def topo_order(graph: GraphSpec) -> list:
    """Dependency order with ties broken by node insertion order."""
    parents = _parent_map(graph)
    emitted: list = []
    done: set = set()
    pending = [n.name for n in graph.nodes]
    while pending:
        progressed = False
        for name in pending:
            if all(p in done for p in parents[name]):
                emitted.append(name)
                done.add(name)
                pending.remove(name)
                progressed = True
                break
        if not progressed:
            raise CycleError(f"cycle involving nodes {{{', '.join(sorted(pending))}}}")
    return emitted


def ancestors(graph: GraphSpec, name: str) -> set:
    """Strict ancestor set of a node."""
    node = graph.node(name)
    out: set = set()
    stack = list(node.parents)
    while stack:
        p = stack.pop()
        if p not in out:
            out.add(p)
            stack.extend(graph.node(p).parents)
    return out


def _find_cycle_nodes(graph: GraphSpec) -> tuple:
    parents = _parent_map(graph)
    done: set = set()
    changed = True
    while changed:
        changed = False
        for name, ps in parents.items():
            if name not in done and all(p in done for p in ps if p in parents):
                done.add(name)
                changed = True
    return tuple(n.name for n in graph.nodes if n.name not in done)


# -- validation -------------------------------------------------------------

def validate(graph: GraphSpec) -> list:
    """All violations as data; empty list iff the graph is usable."""
    out: list = []
    names = [n.name for n in graph.nodes]
    seen: set = set()
    for n in names:
        if n in seen:
            out.append(Violation("DuplicateName", (n,), "duplicate node name"))
        seen.add(n)

    for n in graph.nodes:
        for p in n.parents:
            if p not in seen:
                out.append(Violation("UnknownParent", (n.name,), f"missing parent '{p}'"))

    cyc = _find_cycle_nodes(graph)
    if cyc:
        out.append(Violation("CycleDetected", cyc, "edge relation is cyclic"))
        return out   # downstream checks assume a DAG

    kinds = {n.name: n.kind for n in graph.nodes}
    for n in graph.nodes:
        if n.kind == "constant" and n.parents:
            out.append(Violation("KindConstraint", (n.name,), "constant nodes take no parents"))
        if n.kind == "distance":
            if not n.parents:
                out.append(Violation("KindConstraint", (n.name,), "distance needs >= 1 parent"))
            bad = [p for p in n.parents if kinds.get(p) != "summary"]
            if bad:
                out.append(Violation(
                    "KindConstraint", (n.name,),
                    f"distance parents must be summaries, got {bad}"))
        if n.kind == "prior":
            bad = [p for p in n.parents
                   if kinds.get(p) not in ("constant", "prior", "operation")]
            if bad:
                out.append(Violation(
                    "KindConstraint", (n.name,),
                    f"prior parents must be constant/prior/operation, got {bad}"))

    obs = graph.observed_map()
    sim_obs = [k for k in obs if kinds.get(k) == "simulator"]
    non_sim_obs = [k for k in obs if kinds.get(k) != "simulator"]
    if non_sim_obs:
        out.append(Violation("ObservedPlacement", tuple(non_sim_obs),
                             "observed data may only attach to a simulator node"))
    if len(sim_obs) > 1:
        out.append(Violation("ObservedPlacement", tuple(sim_obs),
                             "only one simulator may carry observed data"))

    distances = [n for n in graph.nodes if n.kind == "distance"]
    if distances:
        if len(distances) > 1:
            out.append(Violation("KindConstraint", tuple(d.name for d in distances),
                                 "inference graphs have exactly one distance node"))
        if not any(n.kind == "prior" for n in graph.nodes):
            out.append(Violation("KindConstraint", (), "inference graphs need >= 1 prior"))
        if not sim_obs:
            out.append(Violation("ObservedMissing", tuple(d.name for d in distances),
                                 "graph has a distance node but no observed data"))
        else:
            root = sim_obs[0]
            for d in distances:
                for p in d.parents:
                    if kinds.get(p) == "summary" and root not in ancestors(graph, p):
                        out.append(Violation(
                            "ObservedBranch", (d.name, p),
                            f"summary '{p}' is not downstream of observed simulator '{root}'"))
    return out


# -- digests ----------------------------------------------------------------

def _enc(b: bytes) -> bytes:
    return struct.pack("<Q", len(b)) + b


def _op_bytes(op) -> bytes:
    if op is None:
        return b""
    if isinstance(op, str):
        return op.encode("utf-8")
    if isinstance(op, ExternalCommand):
        parts = [a.encode("utf-8") for a in op.argv]
        body = b"\x00".join(parts)
        wd = (op.working_dir or "").encode("utf-8")
        return b"external\x00" + body + b"\x00\x00" + wd
    raise TypeError(f"unsupported op {op!r}")


def _args_bytes(args) -> bytes:
    out = [struct.pack("<Q", len(args))]
    for a in args:
        arr = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
        out.append(_enc(arr.astype("<f8").tobytes()))
    return b"".join(out)


def _node_digest(node: NodeSpec, parent_digests: list) -> bytes:
    h = hashlib.sha256()
    h.update(_enc(node.kind.encode("utf-8")))
    h.update(_enc(_op_bytes(node.op)))
    h.update(_enc(_args_bytes(node.args)))
    h.update(_enc(b"\x01" if node.vectorized else b"\x00"))
    h.update(struct.pack("<Q", len(parent_digests)))
    for d in parent_digests:
        h.update(_enc(d))
    return h.digest()


def all_digests(graph: GraphSpec) -> dict:
    """Merkle digest of every node (name -> 32 bytes)."""
    out: dict = {}
    for name in topo_order(graph):
        node = graph.node(name)
        out[name] = _node_digest(node, [out[p] for p in node.parents])
    return out


def subgraph_digest(graph: GraphSpec, name: str) -> bytes:
    """Content digest of a node's ancestor closure; independent of node
    names and of everything outside that closure."""
    if not graph.has_node(name):
        raise UnknownNodeError(f"unknown node '{name}'")
    return all_digests(graph)[name]


# -- compilation ------------------------------------------------------------

def _observed_branch(graph: GraphSpec, topo: list) -> dict:
    """Evaluate every summary reachable from the observed simulator on the
    observed data (plus constants the summaries may reference)."""
    from .components import get_operation

    obs = graph.observed_map()
    values: dict = {}
    for name, v in obs.items():
        values[name] = np.asarray(v, dtype=float)
    for name in topo:
        node = graph.node(name)
        if node.kind == "constant":
            values[name] = _constant_value(node)
        elif node.kind == "summary" and node.parents and all(p in values for p in node.parents):
            op = get_operation(node.op)
            parent_vals = [values[p] for p in node.parents]
            values[name] = np.asarray(op.fn(*parent_vals, *node.args), dtype=float)
    # constants only matter if a summary consumed them
    for name in list(values):
        if graph.node(name).kind == "constant":
            used = any(name in graph.node(s).parents for s in values
                       if graph.node(s).kind == "summary")
            if not used:
                del values[name]
    return values


def _constant_value(node: NodeSpec):
    if len(node.args) == 1:
        return np.asarray(node.args[0], dtype=float)
    return np.asarray(node.args, dtype=float)


def compile_graph(graph: GraphSpec, probe_seed: int = 0) -> CompiledGraph:
    """Freeze a validated graph: fix the topological order, digests,
    observed-branch values and per-element output shapes.

    Shapes come from a discarded probe evaluation of one element at the
    reserved batch index, so every node's output size is known before any
    real batch runs.
    """
    violations = validate(graph)
    if violations:
        raise GraphValidationError(violations)
    topo = topo_order(graph)
    digests = all_digests(graph)
    observed_values = _observed_branch(graph, topo)

    observed_reference: dict = {}
    for n in graph.nodes:
        if n.kind == "distance":
            missing = [p for p in n.parents if p not in observed_values]
            if missing:
                raise ObservedMissingError(
                    f"no observed value for summaries {missing} of distance '{n.name}'")
            observed_reference[n.name] = np.concatenate(
                [np.atleast_1d(observed_values[p]) for p in n.parents])

    cg = CompiledGraph(graph, tuple(topo), digests, observed_values,
                       observed_reference, {})

    from .executor import run_batch
    try:
        probe = run_batch(cg, PROBE_BATCH_INDEX, probe_seed, 1, check_shapes=False)
    except Exception as e:
        raise ShapeInferenceError(f"shape probe failed: {e}") from e
    shapes = {name: tuple(np.asarray(vals[0]).shape)
              for name, vals in probe.values.items()}
    return CompiledGraph(graph, tuple(topo), digests, observed_values,
                         observed_reference, shapes)
