"""Command-line front end.

``lfi run`` executes an inference method against a model file and writes a
JSON result file (plus an optional samples CSV); ``lfi summarize`` prints
per-parameter statistics and text histograms from a result file.  Progress
goes to stderr, machine output to files only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bolfi import fit_bolfi, sample_posterior, surrogate_argmin
from .errors import LfiError
from .graph import compile_graph, subgraph_digest
from .modelfile import parse_model
from .rejection import sample_rejection
from .results import InferenceResult
from .smc import sample_smc
from .store import Store

STORE_ENV = "LFI_STORE"


def _progress(msg):
    print(msg, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfi", description="likelihood-free inference engine")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run inference against a model file")
    run.add_argument("model")
    run.add_argument("--method", required=True, choices=("rejection", "smc", "bolfi"))
    run.add_argument("--n-samples", type=int, required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--batch-size", type=int, default=100)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--store", default=os.environ.get(STORE_ENV))
    run.add_argument("--store-nodes", help="comma-separated node allowlist for the store")
    run.add_argument("--quantile", type=float)
    run.add_argument("--threshold", type=float)
    run.add_argument("--budget", type=int)
    run.add_argument("--schedule", help="comma-separated SMC quantiles, e.g. 0.5,0.5,0.5")
    run.add_argument("--bounds", help="per-parameter box lo1:hi1,lo2:hi2,... (bolfi)")
    run.add_argument("--n-init", type=int, default=10)
    run.add_argument("--n-total", type=int)
    run.add_argument("--out", default="result.json")
    run.add_argument("--csv", help="also write a samples CSV here")

    summ = sub.add_parser("summarize", help="report statistics from a result file")
    summ.add_argument("result")
    summ.add_argument("--csv", help="write a tidy samples CSV here")
    return p


def _parse_bounds(text):
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        out.append((float(lo), float(hi)))
    return out


def result_to_doc(result: InferenceResult, model_digest: str, invocation: dict) -> dict:
    return {
        "engine_version": __version__,
        "model_digest": model_digest,
        "invocation": invocation,
        "method": result.method,
        "parameter_names": list(result.parameter_names),
        "samples": result.samples.tolist(),
        "weights": result.weights.tolist(),
        "distances": np.asarray(result.distances).tolist(),
        "threshold": result.threshold,
        "n_sim": result.n_sim,
        "seed": result.root_seed,
        "batch_size": result.batch_size,
        "elapsed_seconds": result.elapsed_seconds,
        "partial": result.partial,
        "ess": result.ess() if result.n_accept else 0.0,
    }


def write_samples_csv(path, parameter_names, samples, weights, distances):
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(list(parameter_names) + ["weight", "distance"]) + "\n")
        for row, w, d in zip(samples, weights, distances):
            vals = [f"{v:.17g}" for v in np.atleast_1d(row)]
            f.write(",".join(vals + [f"{w:.17g}", f"{d:.17g}"]) + "\n")


def _cmd_run(args) -> int:
    graph = parse_model(args.model)
    cg = compile_graph(graph)
    store = None
    if args.store:
        allow = args.store_nodes.split(",") if args.store_nodes else None
        store = Store(args.store, node_allowlist=allow)

    if args.method == "rejection":
        if (args.quantile is None) == (args.threshold is None):
            raise UsageError("rejection needs exactly one of --quantile / --threshold")
        _progress(f"rejection: n={args.n_samples} seed={args.seed} "
                  f"batch={args.batch_size} workers={args.workers}")
        result = sample_rejection(
            cg, args.n_samples, quantile=args.quantile, threshold=args.threshold,
            budget=args.budget, seed=args.seed, batch_size=args.batch_size,
            workers=args.workers, store=store)
        _progress(f"rejection: accepted {result.n_accept} of {result.n_sim} "
                  f"at threshold {result.threshold:.6g}")
    elif args.method == "smc":
        if not args.schedule:
            raise UsageError("smc requires --schedule")
        schedule = [float(q) for q in args.schedule.split(",")]
        result = sample_smc(cg, args.n_samples, schedule, seed=args.seed,
                            batch_size=args.batch_size, workers=args.workers,
                            budget=args.budget, store=store)
        for pop in result.extras["populations"]:
            _progress(f"smc round {pop.round_index}: threshold {pop.threshold:.6g} "
                      f"ess {pop.ess():.1f}")
    else:
        if not args.bounds:
            raise UsageError("bolfi requires --bounds")
        if args.n_total is None:
            raise UsageError("bolfi requires --n-total")
        bounds = _parse_bounds(args.bounds)
        _progress(f"bolfi: init {args.n_init}, total {args.n_total}")
        post = fit_bolfi(cg, bounds, args.n_init, args.n_total, seed=args.seed,
                         store=store)
        _progress(f"bolfi: epsilon {post.epsilon:.6g}, "
                  f"surrogate argmin {surrogate_argmin(post)}")
        result = sample_posterior(post, args.n_samples, seed=args.seed)
        _progress(f"bolfi: chain acceptance {result.extras['acceptance_rate']:.3f}")

    digest = subgraph_digest(graph, cg.distance_name).hex()
    invocation = {k: v for k, v in vars(args).items() if k != "command"}
    doc = result_to_doc(result, digest, invocation)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
    if args.csv:
        write_samples_csv(args.csv, result.parameter_names, result.samples,
                          result.weights, result.distances)
    _progress(f"wrote {args.out}")
    return 0


def weighted_quantile(values, weights, q) -> float:
    """Smallest value whose cumulative weight reaches q."""
    order = np.argsort(values, kind="stable")
    v = np.asarray(values)[order]
    cw = np.cumsum(np.asarray(weights)[order])
    cw = cw / cw[-1]
    idx = int(np.searchsorted(cw, q, side="left"))
    return float(v[min(idx, v.size - 1)])


def _histogram_text(values, weights, bins=20, width=40) -> list:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(np.digitize(values, edges) - 1, 0, bins - 1)
    mass = np.zeros(bins)
    np.add.at(mass, idx, weights)
    top = mass.max() if mass.max() > 0 else 1.0
    lines = []
    for b in range(bins):
        bar = "#" * int(round(width * mass[b] / top))
        lines.append(f"  [{edges[b]:+10.4g}, {edges[b + 1]:+10.4g}) {bar}")
    return lines


def _cmd_summarize(args) -> int:
    try:
        with open(args.result, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, ValueError) as e:
        raise LfiError(f"cannot read result file: {e}") from e
    names = doc["parameter_names"]
    samples = np.asarray(doc["samples"], dtype=float).reshape(len(doc["samples"]), -1)
    weights = np.asarray(doc["weights"], dtype=float)
    print(f"method: {doc['method']}   n_accept: {samples.shape[0]}   "
          f"n_sim: {doc['n_sim']}   threshold: {doc['threshold']:.6g}")
    for j, name in enumerate(names):
        col = samples[:, j]
        mean = float(weights @ col)
        sd = float(np.sqrt(weights @ (col - mean) ** 2))
        q05 = weighted_quantile(col, weights, 0.05)
        q95 = weighted_quantile(col, weights, 0.95)
        print(f"\n{name}: mean {mean:.6g}  sd {sd:.6g}  "
              f"5% {q05:.6g}  95% {q95:.6g}")
        for line in _histogram_text(col, weights):
            print(line)
    if args.csv:
        write_samples_csv(args.csv, names, samples, weights,
                          np.asarray(doc["distances"], dtype=float))
    return 0


class UsageError(Exception):
    pass


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_summarize(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except LfiError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
