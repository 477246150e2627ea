#!/usr/bin/env node
/**
 * Protocol conformance checker for external simulators.
 *
 * Usage: conformance.js [--] <command> [args...]
 *
 * Drives the command through a series of protocol-1 requests and prints a
 * JSON report to stdout:
 *
 *   { "passed": bool, "checks": [{ "name", "ok", "detail" }, ...] }
 *
 * Exit code 0 when every check passes, 1 otherwise.  Checks:
 *
 *   framing           one valid JSON reply with protocol 1 and an output array
 *   row-count         rows match batch_size (sizes 1 and 7), rectangular, finite
 *   determinism       byte-identical replies to a repeated request
 *   seed-sensitivity  different seeds produce different output
 */

import { spawnSync } from "node:child_process";
import { PROTOCOL_VERSION, SimRequest } from "./protocol.js";

export interface CheckResult {
  name: string;
  ok: boolean;
  detail: string;
}

export interface Report {
  passed: boolean;
  checks: CheckResult[];
}

function request(seed: number, batchSize: number, batchIndex = 0): SimRequest {
  const ramp = (lo: number, hi: number) =>
    Array.from({ length: batchSize }, (_, i) =>
      lo + ((i + 0.5) / batchSize) * (hi - lo));
  return {
    protocol: PROTOCOL_VERSION,
    batch_index: batchIndex,
    seed,
    batch_size: batchSize,
    parameters: { t1: ramp(0.1, 1.2), t2: ramp(-0.4, 0.4) },
  };
}

function invoke(argv: string[], req: SimRequest): { stdout: string; status: number } {
  const proc = spawnSync(argv[0], argv.slice(1), {
    input: JSON.stringify(req),
    encoding: "utf-8",
    timeout: 60_000,
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.error) throw proc.error;
  return { stdout: proc.stdout, status: proc.status ?? -1 };
}

export function runConformance(argv: string[]): Report {
  const checks: CheckResult[] = [];
  const add = (name: string, ok: boolean, detail: string) =>
    checks.push({ name, ok, detail });

  // framing
  let framedRows: unknown = null;
  try {
    const { stdout, status } = invoke(argv, request(11, 3));
    if (status !== 0) {
      add("framing", false, `exit code ${status}`);
    } else {
      const doc = JSON.parse(stdout);
      const ok =
        typeof doc === "object" && doc !== null &&
        doc.protocol === PROTOCOL_VERSION && Array.isArray(doc.output);
      framedRows = ok ? doc.output : null;
      add("framing", ok,
        ok ? "single JSON reply with protocol 1 and an output array"
           : `bad reply shape: ${stdout.slice(0, 120)}`);
    }
  } catch (e) {
    add("framing", false, `${e}`);
  }

  // row-count / rectangularity / finiteness
  try {
    let ok = true;
    let detail = "";
    for (const size of [1, 7]) {
      const { stdout } = invoke(argv, request(5, size));
      const rows = JSON.parse(stdout).output as unknown[];
      if (!Array.isArray(rows) || rows.length !== size) {
        ok = false;
        detail = `batch_size ${size}: got ${Array.isArray(rows) ? rows.length : typeof rows} rows`;
        break;
      }
      const widths = new Set(rows.map((r) => (Array.isArray(r) ? r.length : -1)));
      if (widths.size !== 1 || widths.has(-1)) {
        ok = false;
        detail = `batch_size ${size}: ragged rows`;
        break;
      }
      if (!rows.every((r) => (r as unknown[]).every(
            (v) => typeof v === "number" && Number.isFinite(v)))) {
        ok = false;
        detail = `batch_size ${size}: non-finite value`;
        break;
      }
    }
    add("row-count", ok, ok ? "sizes 1 and 7: rectangular, finite, correct count" : detail);
  } catch (e) {
    add("row-count", false, `${e}`);
  }

  // determinism
  try {
    const a = invoke(argv, request(99, 4, 2)).stdout;
    const b = invoke(argv, request(99, 4, 2)).stdout;
    add("determinism", a === b,
      a === b ? "repeated request byte-identical" : "replies differ for identical requests");
  } catch (e) {
    add("determinism", false, `${e}`);
  }

  // seed sensitivity
  try {
    const a = invoke(argv, request(1, 4)).stdout;
    const b = invoke(argv, request(2, 4)).stdout;
    add("seed-sensitivity", a !== b,
      a !== b ? "different seeds give different output"
              : "output ignores the seed");
  } catch (e) {
    add("seed-sensitivity", false, `${e}`);
  }

  void framedRows;
  return { passed: checks.every((c) => c.ok), checks };
}

function main(): void {
  let argv = process.argv.slice(2);
  if (argv[0] === "--") argv = argv.slice(1);
  if (argv.length === 0) {
    process.stderr.write("usage: conformance.js [--] <command> [args...]\n");
    process.exit(2);
  }
  const report = runConformance(argv);
  process.stdout.write(JSON.stringify(report, null, 1) + "\n");
  process.exit(report.passed ? 0 : 1);
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");

if (invokedDirectly) {
  main();
}
