/**
 * Low-level bridge to the serieskit command-line interface.
 *
 * The frontend talks to the core exclusively through its external
 * interfaces: CLI subcommands, raw little-endian float32 dataset files,
 * and plain-text answer files.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

/** Command used to invoke the core; override with SERIESKIT_CLI. */
export function cliCommand(): string[] {
  const override = process.env.SERIESKIT_CLI;
  if (override) {
    return override.split(" ");
  }
  return ["python3", "-m", "serieskit.cli"];
}

export function runCli(args: string[]): { stdout: string; stderr: string } {
  const [cmd, ...prefix] = cliCommand();
  const proc = spawnSync(cmd as string, [...prefix, ...args], {
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.error) {
    throw proc.error;
  }
  if (proc.status !== 0) {
    throw new Error(
      `serieskit ${args[0]} exited with code ${proc.status}: ${proc.stderr.trim()}`
    );
  }
  return { stdout: proc.stdout, stderr: proc.stderr };
}

export function makeWorkDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "serieskit-frontend-"));
}

/** Write values as raw little-endian float32, the core's dataset format. */
export function writeFloat32File(filePath: string, values: Float32Array): void {
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i] as number, i * 4);
  }
  fs.writeFileSync(filePath, buf);
}

export interface AnswerFile {
  nQueries: number;
  k: number;
  dim: number;
  measure: string;
  radius: number;
  /** ids[qi][rank]; -1 marks a sentinel row (k exceeded N). */
  ids: number[][];
  /** dists[qi][rank]; Infinity on sentinel rows. */
  dists: number[][];
}

export function parseAnswerFile(filePath: string): AnswerFile {
  const text = fs.readFileSync(filePath, "utf-8");
  const lines = text.trim().split("\n");
  const header = lines[0];
  if (!header || !header.startsWith("# serieskit-answers v1 ")) {
    throw new Error(`${filePath}: not a serieskit answers file`);
  }
  const meta = new Map<string, string>();
  for (const kv of header.split(" ").slice(3)) {
    const [key, value] = kv.split("=");
    meta.set(key as string, value as string);
  }
  const nQueries = Number(meta.get("n_q"));
  const k = Number(meta.get("k"));
  const ids: number[][] = Array.from({ length: nQueries }, () =>
    new Array<number>(k).fill(-1)
  );
  const dists: number[][] = Array.from({ length: nQueries }, () =>
    new Array<number>(k).fill(Infinity)
  );
  for (const line of lines.slice(1)) {
    const [qi, rank, id, dist] = line.split(" ");
    const q = Number(qi);
    const r = Number(rank);
    (ids[q] as number[])[r] = Number(id);
    (dists[q] as number[])[r] = dist === "inf" ? Infinity : Number(dist);
  }
  return {
    nQueries,
    k,
    dim: Number(meta.get("dim")),
    measure: meta.get("measure") as string,
    radius: Number(meta.get("radius")),
    ids,
    dists,
  };
}
