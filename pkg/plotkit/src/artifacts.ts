import { readFileSync } from "node:fs";
import { SchemaError, Table, column, numericColumn, readCsv } from "./csv.js";

/** Loaders for the documented run-directory file formats. Everything is
 * read-only; no file is ever written back. */

export interface RasterData {
    steps: number[];
    labels: number[][]; // [checkpoint][seed]
}

export function loadRaster(path: string): RasterData {
    const table = readCsv(path);
    if (table.columns[0] !== "step") {
        throw new SchemaError(`${path}: missing required column 'step'`);
    }
    const steps = table.rows.map(r => Number(r[0]));
    const labels = table.rows.map(r => r.slice(1).map(Number));
    for (const [i, row] of labels.entries()) {
        if (row.some(v => !Number.isInteger(v) || v < 0 || v > 3)) {
            throw new SchemaError(`${path}: row ${i + 1} has a state code outside 0..3`);
        }
    }
    return { steps, labels };
}

export interface SnapshotData {
    steps: number[];
    sampleAcc: number[];
    sampleMem: number[];
    invalidFrac: number[];
    nanFrac: number[];
}

export function loadSnapshots(path: string): SnapshotData {
    const t = readCsv(path);
    return {
        steps: numericColumn(t, "step", path),
        sampleAcc: numericColumn(t, "sample_acc", path),
        sampleMem: numericColumn(t, "sample_mem", path),
        invalidFrac: numericColumn(t, "invalid_frac", path),
        nanFrac: numericColumn(t, "nan_frac", path),
    };
}

export interface SpectrumRow {
    split: string;
    sigma: number;
    step: number;
    loss: number;
    se: number;
}

export function loadSpectra(path: string): SpectrumRow[] {
    const t = readCsv(path);
    const split = column(t, "split", path);
    const sigma = numericColumn(t, "sigma", path);
    const step = numericColumn(t, "step", path);
    const loss = numericColumn(t, "loss", path);
    const se = numericColumn(t, "se", path);
    return split.map((s, i) => ({ split: s, sigma: sigma[i], step: step[i], loss: loss[i], se: se[i] }));
}

export interface BasinRow {
    direction: string;
    sigma: number;
    t: number;
    metric: string;
    mean: number;
    lo: number | null;
    hi: number | null;
}

export function loadBasins(path: string): BasinRow[] {
    const t = readCsv(path);
    const direction = column(t, "direction", path);
    const sigma = numericColumn(t, "sigma", path);
    const tt = numericColumn(t, "t", path);
    const metric = column(t, "metric", path);
    const mean = numericColumn(t, "mean", path);
    // confidence columns are optional: bands are simply omitted when absent
    const hasBands = t.columns.includes("lo") && t.columns.includes("hi");
    const lo = hasBands ? numericColumn(t, "lo", path) : null;
    const hi = hasBands ? numericColumn(t, "hi", path) : null;
    return direction.map((d, i) => ({
        direction: d, sigma: sigma[i], t: tt[i], metric: metric[i], mean: mean[i],
        lo: lo ? lo[i] : null, hi: hi ? hi[i] : null,
    }));
}

export interface ClocksData {
    tauRule: number | null;
    tauMem: number | null;
}

export function loadClocks(path: string): ClocksData {
    const raw = JSON.parse(readFileSync(path, "utf8"));
    return { tauRule: raw.tau_rule ?? null, tauMem: raw.tau_mem ?? null };
}

export interface Matrix {
    rows: number;
    cols: number;
    data: Float64Array;
    meta: Record<string, unknown>;
}

/** Raw little-endian float64 matrix with its JSON sidecar. */
export function loadMatrix(basePath: string): Matrix {
    const meta = JSON.parse(readFileSync(`${basePath}.json`, "utf8"));
    const shape = meta.shape as number[];
    if (!Array.isArray(shape) || shape.length !== 2) {
        throw new SchemaError(`${basePath}.json: missing 2-D 'shape'`);
    }
    const buf = readFileSync(`${basePath}.bin`);
    const expected = shape[0] * shape[1] * 8;
    if (buf.length !== expected) {
        throw new SchemaError(`${basePath}.bin: expected ${expected} bytes for shape ${shape}, found ${buf.length}`);
    }
    const data = new Float64Array(shape[0] * shape[1]);
    for (let i = 0; i < data.length; i++) data[i] = buf.readDoubleLE(i * 8);
    return { rows: shape[0], cols: shape[1], data, meta };
}

export interface ScalingData {
    points: [number, number][];
    fit: { c: number; alpha: number; r2: number } | null;
}

export function loadScaling(path: string): ScalingData {
    const raw = JSON.parse(readFileSync(path, "utf8"));
    if (!Array.isArray(raw.points)) {
        throw new SchemaError(`${path}: missing 'points' array`);
    }
    return { points: raw.points, fit: raw.fit ?? null };
}
