#!/usr/bin/env node
/** plotkit <kind> --in <path> --out <file.svg> [options]
 *
 * Kinds and their inputs:
 *   raster    --in raster.csv
 *   spectrum  --in spectra.csv [--mode sigma|trace] [--step S] [--no-band]
 *   field     --in <run dir> [--sigma 0.5]
 *   basin     --in basins.csv [--direction NAME]
 *   clocks    --in snapshots.csv [--clocks clocks.json] [--no-guides]
 *   scaling   --in report.json
 *
 * Inputs are read-only; output is deterministic SVG (same input bytes give
 * the same output bytes).
 */

import { existsSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { SchemaError } from "./csv.js";
import {
    loadBasins, loadClocks, loadMatrix, loadRaster, loadScaling,
    loadSnapshots, loadSpectra,
} from "./artifacts.js";
import { renderBasin } from "./render/basin.js";
import { renderClocks } from "./render/clocks.js";
import { renderField } from "./render/field.js";
import { renderRaster } from "./render/raster.js";
import { renderScaling } from "./render/scaling.js";
import { renderSpectrum } from "./render/spectrum.js";

const KINDS = ["raster", "spectrum", "field", "basin", "clocks", "scaling"];

function fail(message: string): never {
    process.stderr.write(`error: ${message}\n`);
    process.exit(2);
}

export function run(argv: string[]): void {
    const kind = argv[0];
    if (!kind || !KINDS.includes(kind)) {
        fail(`usage: plotkit <${KINDS.join("|")}> --in <path> --out <file.svg>`);
    }
    const { values } = parseArgs({
        args: argv.slice(1),
        options: {
            in: { type: "string" },
            out: { type: "string" },
            mode: { type: "string", default: "sigma" },
            step: { type: "string" },
            sigma: { type: "string", default: "0.5" },
            direction: { type: "string" },
            clocks: { type: "string" },
            "no-band": { type: "boolean", default: false },
            "no-guides": { type: "boolean", default: false },
        },
    });
    const input = values.in;
    const output = values.out;
    if (!input || !output) fail("--in and --out are required");
    if (!existsSync(input)) fail(`input not found: ${input}`);

    let svg: string;
    try {
        switch (kind) {
            case "raster":
                svg = renderRaster(loadRaster(input));
                break;
            case "spectrum": {
                const mode = values.mode === "trace" ? "trace" : "sigma";
                svg = renderSpectrum(loadSpectra(input), {
                    mode,
                    step: values.step !== undefined ? Number(values.step) : undefined,
                    shadeBand: !values["no-band"],
                });
                break;
            }
            case "field": {
                const sigma = Number(values.sigma);
                const tag = String(sigma).replace(".", "p");
                const magPath = join(input, `field_mag_${tag}`);
                const projPath = join(input, `field_proj_${tag}`);
                if (!existsSync(`${magPath}.bin`)) {
                    fail(`no field slice at sigma=${sigma} under ${input} (expected ${magPath}.bin)`);
                }
                const planeRaw = JSON.parse(readFileSync(join(input, "plane.json"), "utf8"));
                svg = renderField(loadMatrix(magPath), loadMatrix(projPath), {
                    alphaRange: planeRaw.alpha_range,
                    betaRange: planeRaw.beta_range,
                }, sigma);
                break;
            }
            case "basin": {
                let rows = loadBasins(input);
                if (values.direction) rows = rows.filter(r => r.direction === values.direction);
                if (!rows.length) fail(`no basin rows${values.direction ? ` for direction ${values.direction}` : ""}`);
                svg = renderBasin(rows);
                break;
            }
            case "clocks": {
                const clocks = values.clocks ? loadClocks(values.clocks) : null;
                svg = renderClocks(loadSnapshots(input), { clocks, guides: !values["no-guides"] });
                break;
            }
            default:
                svg = renderScaling(loadScaling(input));
        }
    } catch (err) {
        if (err instanceof SchemaError) fail(err.message);
        throw err;
    }
    writeFileSync(output, svg);
    process.stdout.write(`wrote ${output}\n`);
}

run(process.argv.slice(2));
