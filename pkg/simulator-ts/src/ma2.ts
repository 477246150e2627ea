#!/usr/bin/env node
/**
 * Reference out-of-process MA(2) simulator.
 *
 * Usage: ma2.js [n_obs]
 *
 * Speaks protocol 1 on stdin/stdout (see protocol.ts).  Expects exactly
 * two parameter vectors; sorted by name they are taken as (theta1,
 * theta2) of
 *
 *     y_t = w_t + theta1 * w_{t-1} + theta2 * w_{t-2},   w ~ N(0, 1)
 *
 * and each reply row holds n_obs observations.  Randomness is derived
 * per element from the request seed, so a repeated request reproduces the
 * reply byte for byte.
 */

import { SplitMix64 } from "./rng.js";
import { makeReply, ProtocolError, readStdin, validateRequest } from "./protocol.js";

export function simulateMa2(
  theta1: number,
  theta2: number,
  nObs: number,
  rng: SplitMix64,
): number[] {
  if (!Number.isInteger(nObs) || nObs < 3) {
    throw new ProtocolError(`n_obs must be an integer >= 3, got ${nObs}`);
  }
  const w = rng.normals(nObs + 2);
  const y = new Array<number>(nObs);
  for (let t = 0; t < nObs; t++) {
    y[t] = w[t + 2] + theta1 * w[t + 1] + theta2 * w[t];
  }
  return y;
}

export function handleRequest(doc: unknown, nObs: number): number[][] {
  const req = validateRequest(doc);
  const names = Object.keys(req.parameters).sort();
  if (names.length !== 2) {
    throw new ProtocolError(
      `expected exactly 2 parameters (theta1, theta2), got [${names.join(", ")}]`,
    );
  }
  const t1 = req.parameters[names[0]];
  const t2 = req.parameters[names[1]];
  const rows: number[][] = [];
  for (let i = 0; i < req.batch_size; i++) {
    rows.push(simulateMa2(t1[i], t2[i], nObs, SplitMix64.forElement(req.seed, i)));
  }
  return rows;
}

async function main(): Promise<void> {
  const nObs = process.argv.length > 2 ? Number(process.argv[2]) : 100;
  const raw = await readStdin();
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch (e) {
    throw new ProtocolError(`stdin is not valid JSON: ${e}`);
  }
  const rows = handleRequest(doc, nObs);
  process.stdout.write(JSON.stringify(makeReply(rows)));
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");

if (invokedDirectly) {
  main().catch((e) => {
    process.stderr.write(`${e instanceof Error ? e.message : e}\n`);
    process.exit(1);
  });
}
