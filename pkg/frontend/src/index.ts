/**
 * Exact k-nearest-neighbor search over fixed-length data series,
 * delegating all computation to the serieskit core through its CLI.
 *
 * Usage mirrors the core facade:
 *
 *   const index = new ParallelIndexSearch(DistanceType.L2_SQUARED);
 *   index.buildIndex(matrixFromRows(db));
 *   const [I, D] = index.searchIndex(matrixFromRows(queries), 10);
 */

import * as fs from "node:fs";
import * as path from "node:path";

import {
  makeWorkDir,
  parseAnswerFile,
  runCli,
  writeFloat32File,
} from "./cli";

export enum DistanceType {
  L2_SQUARED = "l2sq",
  DTW = "dtw",
}

export type EngineName =
  | "bruteforce"
  | "lb-bruteforce"
  | "serial"
  | "parallel"
  | "disk";

export interface EngineOptions {
  dtwRadius?: number;
  segments?: number;
  maxBits?: number;
  leafCapacity?: number;
  threads?: number;
  normalize?: boolean;
}

/** Row-major 2-D float32 matrix: the only accepted array layout. */
export interface FloatMatrix {
  data: Float32Array;
  rows: number;
  cols: number;
}

export function matrixFromRows(rows: ArrayLike<number>[]): FloatMatrix {
  if (rows.length < 1) {
    throw new Error("expected at least one row, got shape (0, ?)");
  }
  const cols = rows[0]!.length;
  const data = new Float32Array(rows.length * cols);
  rows.forEach((row, i) => {
    if (row.length !== cols) {
      throw new Error(
        `ragged input: row ${i} has length ${row.length}, expected ${cols}`
      );
    }
    data.set(Array.from(row), i * cols);
  });
  return { data, rows: rows.length, cols };
}

function checkMatrix(m: FloatMatrix, what: string): void {
  if (
    !(m && m.data instanceof Float32Array) ||
    !Number.isInteger(m.rows) ||
    !Number.isInteger(m.cols)
  ) {
    throw new Error(
      `${what} must be a FloatMatrix (use matrixFromRows to convert row lists)`
    );
  }
  if (m.rows < 1 || m.cols < 1) {
    throw new Error(`${what} has empty shape (${m.rows}, ${m.cols})`);
  }
  if (m.data.length !== m.rows * m.cols) {
    throw new Error(
      `${what} data length ${m.data.length} does not match shape ` +
        `(${m.rows}, ${m.cols})`
    );
  }
}

/** Top-k result: I[qi][rank] ids (-1 sentinel), D[qi][rank] distances. */
export type SearchResult = [number[][], number[][]];

const INDEXED_ENGINES: ReadonlySet<string> = new Set([
  "serial",
  "parallel",
  "disk",
]);

export class SearchEngine {
  private workDir: string | null = null;
  private datasetPath: string | null = null;
  private indexPath: string | null = null;
  private dim = 0;
  private count = 0;

  constructor(
    readonly engine: EngineName,
    readonly distance: DistanceType = DistanceType.L2_SQUARED,
    readonly options: EngineOptions = {}
  ) {}

  get built(): boolean {
    return this.datasetPath !== null;
  }

  buildIndex(db: FloatMatrix): void {
    checkMatrix(db, "db");
    this.workDir = makeWorkDir();
    this.datasetPath = path.join(this.workDir, "dataset.f32");
    writeFloat32File(this.datasetPath, db.data);
    this.dim = db.cols;
    this.count = db.rows;
    if (INDEXED_ENGINES.has(this.engine)) {
      this.indexPath = path.join(this.workDir, "index.bin");
      runCli([
        "build",
        ...this.commonArgs(),
        "--index-file",
        this.indexPath,
      ]);
    }
  }

  searchIndex(q: FloatMatrix, k: number): SearchResult {
    if (!this.built || !this.workDir || !this.datasetPath) {
      throw new Error("searchIndex called before buildIndex");
    }
    checkMatrix(q, "queries");
    if (q.cols !== this.dim) {
      throw new Error(
        `query width ${q.cols} does not match dataset width ${this.dim}`
      );
    }
    if (!Number.isInteger(k) || k < 1) {
      throw new Error(`k must be a positive integer, got ${k}`);
    }
    const queriesPath = path.join(this.workDir, "queries.f32");
    const answersPath = path.join(this.workDir, "answers.txt");
    writeFloat32File(queriesPath, q.data);
    const args = [
      "search",
      ...this.commonArgs(),
      "--queries",
      queriesPath,
      "--k",
      String(k),
      "--engine",
      this.engine,
      "--output",
      answersPath,
    ];
    if (this.indexPath) {
      args.push("--index-file", this.indexPath);
    }
    runCli(args);
    const answers = parseAnswerFile(answersPath);
    return [answers.ids, answers.dists];
  }

  /** Remove this session's temporary dataset/index/answer files. */
  dispose(): void {
    if (this.workDir) {
      fs.rmSync(this.workDir, { recursive: true, force: true });
      this.workDir = null;
      this.datasetPath = null;
      this.indexPath = null;
    }
  }

  private commonArgs(): string[] {
    const o = this.options;
    const args = [
      "--dataset",
      this.datasetPath as string,
      "--dim",
      String(this.dim),
      "--distance",
      this.distance,
    ];
    if (this.engine === "disk") {
      args.push("--storage", "disk");
    }
    if (o.dtwRadius !== undefined) args.push("--dtw-radius", String(o.dtwRadius));
    if (o.segments !== undefined) args.push("--segments", String(o.segments));
    if (o.maxBits !== undefined) args.push("--max-bits", String(o.maxBits));
    if (o.leafCapacity !== undefined)
      args.push("--leaf-capacity", String(o.leafCapacity));
    if (o.threads !== undefined) args.push("--threads", String(o.threads));
    if (o.normalize) args.push("--normalize");
    return args;
  }
}

/** Exhaustive scan; the reference every other engine must match. */
export class ExhaustiveSearch extends SearchEngine {
  constructor(distance?: DistanceType, options?: EngineOptions) {
    super("bruteforce", distance, options);
  }
}

/** Exhaustive scan skipping candidates via summary lower bounds. */
export class LowerBoundedSearch extends SearchEngine {
  constructor(distance?: DistanceType, options?: EngineOptions) {
    super("lb-bruteforce", distance, options);
  }
}

/** Single-threaded index-guided search. */
export class SerialIndexSearch extends SearchEngine {
  constructor(distance?: DistanceType, options?: EngineOptions) {
    super("serial", distance, options);
  }
}

/** Multi-worker in-memory index-guided search. */
export class ParallelIndexSearch extends SearchEngine {
  constructor(distance?: DistanceType, options?: EngineOptions) {
    super("parallel", distance, options);
  }
}

/** Index-guided search reading raw series from disk in bounded batches. */
export class DiskIndexSearch extends SearchEngine {
  constructor(distance?: DistanceType, options?: EngineOptions) {
    super("disk", distance, options);
  }
}

export { parseAnswerFile, writeFloat32File } from "./cli";
export type { AnswerFile } from "./cli";
