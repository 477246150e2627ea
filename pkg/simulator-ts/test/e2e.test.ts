import { spawnSync } from "node:child_process";
import { dirname, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { runConformance } from "../src/conformance.js";

// `npm test` builds dist/ first (see package.json); these tests exercise
// the shipped artifacts exactly as an engine subprocess would.

const here = dirname(fileURLToPath(import.meta.url));
const MA2 = resolve(here, "..", "dist", "ma2.js");
const CONFORMANCE = resolve(here, "..", "dist", "conformance.js");

function run(args: string[], input: string) {
  return spawnSync("node", args, { input, encoding: "utf-8", timeout: 30_000 });
}

const req = JSON.stringify({
  protocol: 1,
  batch_index: 3,
  seed: 123,
  batch_size: 4,
  parameters: { t1: [0.1, 0.4, 0.8, 1.2], t2: [-0.3, 0.0, 0.2, 0.5] },
});

describe("ma2.js over the wire", () => {
  it("answers a request with the right frame", () => {
    const proc = run([MA2, "50"], req);
    expect(proc.status).toBe(0);
    const reply = JSON.parse(proc.stdout);
    expect(reply.protocol).toBe(1);
    expect(reply.output).toHaveLength(4);
    expect(reply.output[0]).toHaveLength(50);
  });

  it("is byte-deterministic", () => {
    expect(run([MA2, "40"], req).stdout).toBe(run([MA2, "40"], req).stdout);
  });

  it("fails loudly on a protocol mismatch", () => {
    const proc = run([MA2], req.replace('"protocol":1', '"protocol":9'));
    expect(proc.status).toBe(1);
    expect(proc.stderr).toContain("protocol");
  });

  it("fails loudly on malformed JSON", () => {
    const proc = run([MA2], "{not json");
    expect(proc.status).toBe(1);
    expect(proc.stderr).toContain("JSON");
  });
});

describe("conformance checker", () => {
  it("passes the reference simulator", () => {
    const report = runConformance(["node", MA2, "30"]);
    expect(report.checks.map((c) => [c.name, c.ok])).toEqual([
      ["framing", true],
      ["row-count", true],
      ["determinism", true],
      ["seed-sensitivity", true],
    ]);
    expect(report.passed).toBe(true);
  });

  it("flags a simulator that ignores the seed", () => {
    const report = runConformance([
      "node", "-e",
      `let s="";process.stdin.on("data",d=>s+=d).on("end",()=>{
         const r=JSON.parse(s);
         const rows=Array.from({length:r.batch_size},()=>[1,2,3]);
         process.stdout.write(JSON.stringify({protocol:1,output:rows}));})`,
    ]);
    expect(report.passed).toBe(false);
    const bad = report.checks.find((c) => c.name === "seed-sensitivity");
    expect(bad?.ok).toBe(false);
  });

  it("flags a simulator with the wrong row count", () => {
    const report = runConformance([
      "node", "-e",
      `let s="";process.stdin.on("data",d=>s+=d).on("end",()=>{
         process.stdout.write(JSON.stringify({protocol:1,output:[[1]]}));})`,
    ]);
    const bad = report.checks.find((c) => c.name === "row-count");
    expect(bad?.ok).toBe(false);
  });

  it("exits 0 from the command line on success", () => {
    const proc = spawnSync("node", [CONFORMANCE, "--", "node", MA2, "25"], {
      encoding: "utf-8",
      timeout: 60_000,
    });
    expect(proc.status).toBe(0);
    expect(JSON.parse(proc.stdout).passed).toBe(true);
  });
});
