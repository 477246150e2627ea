"""Batch evaluation of compiled graphs.

Parallelism is across batches only; a batch is always computed whole, by
one worker, from immutable inputs.  Because every stochastic node draws
from its own (root_seed, batch_index, node_name)-keyed stream, results are
bit-identical for any worker count and any scheduling order.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .components import get_operation
from .errors import OpFailureError, ShapeMismatchError
from .external import ExternalCommand, build_request, invoke_external
from .rng import derive_seed64, rng_stream


@dataclass
class Batch:
    batch_index: int
    values: dict   # node name -> (batch_size, *elem_shape) float array

    def size(self) -> int:
        return next(iter(self.values.values())).shape[0] if self.values else 0


def _eval_builtin(node, op, parent_arrays, batch_size, root_seed, batch_index):
    stream = rng_stream(root_seed, batch_index, node.name) if op.stochastic else None
    if node.vectorized:
        if op.batch_fn is None:
            raise OpFailureError(node.name,
                                 f"operation '{node.op}' has no vectorized form",
                                 batch_index=batch_index)
        kwargs = {"size": batch_size}
        if op.stochastic:
            kwargs["stream"] = stream
        try:
            out = op.batch_fn(*parent_arrays, *node.args, **kwargs)
        except OpFailureError:
            raise
        except Exception as e:
            raise OpFailureError(node.name, str(e), batch_index=batch_index) from e
        out = np.asarray(out, dtype=float)
        if out.shape[0] != batch_size:
            raise OpFailureError(
                node.name,
                f"vectorized op returned {out.shape[0]} rows for batch size {batch_size}",
                batch_index=batch_index)
        return out

    rows = []
    for i in range(batch_size):
        elems = [arr[i] for arr in parent_arrays]
        try:
            if op.stochastic:
                v = op.fn(*elems, *node.args, stream=stream)
            else:
                v = op.fn(*elems, *node.args)
        except OpFailureError:
            raise
        except Exception as e:
            raise OpFailureError(node.name, str(e), element=i,
                                 batch_index=batch_index) from e
        rows.append(np.asarray(v, dtype=float))
    return _stack(rows, node.name, batch_index)


def _stack(rows, name, batch_index):
    shapes = {r.shape for r in rows}
    if len(shapes) != 1:
        raise OpFailureError(name, f"inconsistent element shapes {sorted(shapes)}",
                             batch_index=batch_index)
    return np.stack(rows)


def _eval_external(node, parent_arrays, parent_names, batch_size, root_seed, batch_index):
    cmd: ExternalCommand = node.op
    argv = cmd.argv + tuple(_arg_str(a) for a in node.args)
    cmd = ExternalCommand(argv, cmd.timeout_seconds, cmd.working_dir)
    seed = derive_seed64(root_seed, batch_index, node.name)
    params = {n: arr for n, arr in zip(parent_names, parent_arrays)}
    request = build_request(batch_index, seed, batch_size, params)
    try:
        return invoke_external(cmd, request)
    except Exception as e:
        raise OpFailureError(node.name, str(e), batch_index=batch_index) from e


def _arg_str(a):
    f = float(a)
    return str(int(f)) if f == int(f) else repr(f)


def run_batch(cg, batch_index: int, root_seed: int, batch_size: int,
              precomputed: dict = None, check_shapes: bool = True) -> Batch:
    """Evaluate one batch of every node, in topological order.

    Nodes present in ``precomputed`` are taken as-is and their operations
    are never invoked (the store's reuse path).
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    values: dict = {}
    precomputed = precomputed or {}
    for name in cg.topo:
        node = cg.node(name)
        if name in precomputed:
            arr = np.asarray(precomputed[name], dtype=float)
            if arr.shape[0] != batch_size:
                raise ShapeMismatchError(
                    f"precomputed '{name}' has {arr.shape[0]} rows, expected {batch_size}")
            _check_shape(cg, name, arr, check_shapes)
            values[name] = arr
            continue

        if node.kind == "constant":
            from .graph import _constant_value
            v = _constant_value(node)
            arr = np.broadcast_to(v, (batch_size,) + v.shape).copy()
        elif node.kind == "distance":
            ref = cg.observed_reference[name]
            op = get_operation(node.op)
            rows = []
            for i in range(batch_size):
                sim = np.concatenate([np.atleast_1d(values[p][i]) for p in node.parents])
                try:
                    rows.append(np.asarray(op.fn(sim, ref, *node.args), dtype=float))
                except Exception as e:
                    raise OpFailureError(name, str(e), element=i,
                                         batch_index=batch_index) from e
            arr = _stack(rows, name, batch_index)
        elif isinstance(node.op, ExternalCommand):
            parent_arrays = [values[p] for p in node.parents]
            arr = _eval_external(node, parent_arrays, node.parents,
                                 batch_size, root_seed, batch_index)
        else:
            op = get_operation(node.op)
            parent_arrays = [values[p] for p in node.parents]
            arr = _eval_builtin(node, op, parent_arrays, batch_size,
                                root_seed, batch_index)
        _check_shape(cg, name, arr, check_shapes)
        values[name] = arr
    return Batch(batch_index, values)


def _check_shape(cg, name, arr, check_shapes):
    if not check_shapes or name not in cg.output_shape:
        return
    expect = cg.output_shape[name]
    if tuple(arr.shape[1:]) != tuple(expect):
        raise ShapeMismatchError(
            f"node '{name}' produced element shape {tuple(arr.shape[1:])}, "
            f"expected {tuple(expect)}")


def generate(cg, root_seed: int, batch_size: int, node_names=None,
             start_index: int = 0, store=None):
    """Lazy stream of consecutive batches; stop whenever you have enough."""
    index = start_index
    while True:
        batch = _run_with_store(cg, index, root_seed, batch_size, store)
        if node_names is not None:
            batch = Batch(batch.batch_index,
                          {k: v for k, v in batch.values.items() if k in node_names})
        yield batch
        index += 1


def _run_with_store(cg, index, root_seed, batch_size, store):
    precomputed = None
    if store is not None:
        precomputed = store.plan_reuse(cg, root_seed, batch_size, index)
    batch = run_batch(cg, index, root_seed, batch_size, precomputed)
    if store is not None:
        store.record(cg, root_seed, batch_size, batch)
    return batch


def parallel_run(cg, root_seed: int, batch_size: int, indices, workers: int = 1,
                 store=None) -> list:
    """Compute the given batch indices on ``workers`` threads.

    Indices are assigned round-robin; the result list is ordered by batch
    index and byte-identical for every worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    indices = sorted(int(i) for i in indices)
    if not indices:
        return []
    results: dict = {}
    errors: dict = {}

    def work(worker_id):
        for idx in indices[worker_id::workers]:
            if errors:
                return
            try:
                results[idx] = _run_with_store(cg, idx, root_seed, batch_size, store)
            except Exception as e:
                errors[idx] = e
                return

    if workers == 1:
        work(0)
    else:
        threads = [threading.Thread(target=work, args=(w,)) for w in range(workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if errors:
        raise errors[min(errors)]
    return [results[i] for i in indices]
