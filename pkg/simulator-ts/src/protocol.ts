/**
 * Wire protocol, version 1: one JSON request on stdin, one JSON reply on
 * stdout.
 *
 *   -> { protocol: 1, batch_index, seed, batch_size,
 *        parameters: { name: [batch_size values], ... } }
 *   <- { protocol: 1, output: [batch_size rows] }
 *
 * All randomness on this side must derive from `seed` (plus the batch
 * index baked into it by the caller), so the same request always yields
 * the same reply.
 */

export const PROTOCOL_VERSION = 1;

export interface SimRequest {
  protocol: number;
  batch_index: number;
  seed: number;
  batch_size: number;
  parameters: Record<string, number[]>;
}

export interface SimReply {
  protocol: number;
  output: number[][];
}

export class ProtocolError extends Error {}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/** Validate a parsed request document, with field names in every error. */
export function validateRequest(doc: unknown): SimRequest {
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolError("request must be a JSON object");
  }
  const d = doc as Record<string, unknown>;
  if (d.protocol !== PROTOCOL_VERSION) {
    throw new ProtocolError(
      `field 'protocol': expected ${PROTOCOL_VERSION}, got ${JSON.stringify(d.protocol)}`,
    );
  }
  for (const field of ["batch_index", "seed", "batch_size"] as const) {
    if (!isFiniteNumber(d[field]) || !Number.isInteger(d[field])) {
      throw new ProtocolError(`field '${field}': must be an integer`);
    }
  }
  const batchSize = d.batch_size as number;
  if (batchSize < 1) {
    throw new ProtocolError(`field 'batch_size': must be >= 1, got ${batchSize}`);
  }
  const params = d.parameters;
  if (typeof params !== "object" || params === null || Array.isArray(params)) {
    throw new ProtocolError("field 'parameters': must be an object");
  }
  const out: Record<string, number[]> = {};
  for (const [name, values] of Object.entries(params)) {
    if (!Array.isArray(values) || values.length !== batchSize) {
      throw new ProtocolError(
        `parameter '${name}': expected ${batchSize} values`,
      );
    }
    if (!values.every(isFiniteNumber)) {
      throw new ProtocolError(`parameter '${name}': non-numeric value`);
    }
    out[name] = values as number[];
  }
  return {
    protocol: PROTOCOL_VERSION,
    batch_index: d.batch_index as number,
    seed: d.seed as number,
    batch_size: batchSize,
    parameters: out,
  };
}

export function makeReply(output: number[][]): SimReply {
  return { protocol: PROTOCOL_VERSION, output };
}

export async function readStdin(): Promise<string> {
  const chunks: Buffer[] = [];
  for await (const chunk of process.stdin) {
    chunks.push(chunk as Buffer);
  }
  return Buffer.concat(chunks).toString("utf-8");
}
