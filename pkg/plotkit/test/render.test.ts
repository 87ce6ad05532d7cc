import { createHash } from "node:crypto";
import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
    loadBasins, loadClocks, loadMatrix, loadRaster, loadScaling,
    loadSnapshots, loadSpectra,
} from "../src/artifacts.js";
import { SchemaError, readCsv, numericColumn } from "../src/csv.js";
import { renderBasin } from "../src/render/basin.js";
import { renderClocks } from "../src/render/clocks.js";
import { renderField } from "../src/render/field.js";
import { renderRaster } from "../src/render/raster.js";
import { renderScaling } from "../src/render/scaling.js";
import { renderSpectrum } from "../src/render/spectrum.js";

const GOLDEN = join(__dirname, "golden");
const EMP = join(GOLDEN, "empirical");
const MLP = join(GOLDEN, "mlp");

function sha(text: string): string {
    return createHash("sha256").update(text).digest("hex");
}

function renderAll(): Record<string, string> {
    const plane = JSON.parse(readFileSync(join(EMP, "plane.json"), "utf8"));
    return {
        raster: renderRaster(loadRaster(join(MLP, "raster.csv"))),
        spectrum: renderSpectrum(loadSpectra(join(EMP, "spectra.csv")), { mode: "sigma" }),
        trace: renderSpectrum(loadSpectra(join(EMP, "spectra.csv")), { mode: "trace" }),
        field: renderField(
            loadMatrix(join(EMP, "field_mag_0p5")),
            loadMatrix(join(EMP, "field_proj_0p5")),
            { alphaRange: plane.alpha_range, betaRange: plane.beta_range }, 0.5),
        basin: renderBasin(loadBasins(join(EMP, "basins.csv"))),
        traceMultiStep: renderSpectrum(loadSpectra(join(MLP, "spectra.csv")), { mode: "trace" }),
        clocks: renderClocks(loadSnapshots(join(MLP, "snapshots.csv")),
            { clocks: loadClocks(join(MLP, "clocks.json")) }),
        scaling: renderScaling(loadScaling(join(GOLDEN, "scaling.json"))),
    };
}

describe("rendering the golden artifacts", () => {
    it("produces well-formed SVG for all six figure kinds", () => {
        const figs = renderAll();
        expect(Object.keys(figs).length).toBe(8); // six kinds, spectrum traces in both modes
        for (const [kind, svg] of Object.entries(figs)) {
            expect(svg.startsWith("<svg "), kind).toBe(true);
            expect(svg.trimEnd().endsWith("</svg>"), kind).toBe(true);
            // no unescaped ampersands or stray NaN coordinates
            expect(svg.includes("NaN"), kind).toBe(false);
            expect(svg.includes("undefined"), kind).toBe(false);
        }
    });

    it("is deterministic: two renders of the same inputs are byte-identical", () => {
        const first = renderAll();
        const second = renderAll();
        for (const kind of Object.keys(first)) {
            expect(sha(second[kind])).toBe(sha(first[kind]));
        }
    });

    it("does not modify its inputs", () => {
        const files = [
            join(MLP, "raster.csv"), join(EMP, "spectra.csv"),
            join(EMP, "basins.csv"), join(EMP, "field_mag_0p5.bin"),
        ];
        const before = files.map(f => sha(readFileSync(f, "latin1")));
        renderAll();
        const after = files.map(f => sha(readFileSync(f, "latin1")));
        expect(after).toEqual(before);
    });
});

describe("schema validation", () => {
    it("names the missing column", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
        const bad = join(dir, "bad.csv");
        writeFileSync(bad, "step,sample_acc\n1,0.5\n");
        expect(() => loadSnapshots(bad)).toThrowError(/sample_mem/);
    });

    it("rejects non-numeric cells with row context", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
        const bad = join(dir, "bad.csv");
        writeFileSync(bad, "split,sigma,step,loss,se\ntrain,oops,0,1.0,0.1\n");
        expect(() => loadSpectra(bad)).toThrowError(/sigma/);
    });

    it("rejects rasters with out-of-range state codes", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
        const bad = join(dir, "bad.csv");
        writeFileSync(bad, "step,seed0,seed1\n1,0,7\n");
        expect(() => loadRaster(bad)).toThrowError(/state code/);
    });

    it("rejects binary matrices whose size disagrees with the sidecar", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
        writeFileSync(join(dir, "m.json"), JSON.stringify({ shape: [3, 3], dtype: "float64" }));
        writeFileSync(join(dir, "m.bin"), Buffer.alloc(8));
        expect(() => loadMatrix(join(dir, "m"))).toThrowError(/expected 72 bytes/);
    });
});

describe("optional confidence bands", () => {
    it("renders basins without lo/hi columns and omits the bands", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
        const path = join(dir, "basins.csv");
        const rows = ["direction,sigma,t,metric,mean"];
        for (let i = 0; i < 10; i++) {
            rows.push(`hamming1_invalid,0.5,${i / 10},exact_match,${1 - i / 10}`);
        }
        writeFileSync(path, rows.join("\n") + "\n");
        const svg = renderBasin(loadBasins(path));
        expect(svg).toContain("<svg ");
        expect(svg.includes("<polygon")).toBe(false); // no band polygons
    });
});

describe("command line", () => {
    const cli = join(__dirname, "..", "dist", "cli.js");

    it("renders pixel-deterministically across two invocations", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
        const a = join(dir, "a.svg");
        const b = join(dir, "b.svg");
        execFileSync("node", [cli, "raster", "--in", join(MLP, "raster.csv"), "--out", a]);
        execFileSync("node", [cli, "raster", "--in", join(MLP, "raster.csv"), "--out", b]);
        expect(readFileSync(a, "utf8")).toBe(readFileSync(b, "utf8"));
    });

    it("exits 2 on schema errors, naming the column", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
        const bad = join(dir, "bad.csv");
        writeFileSync(bad, "step,sample_acc\n1,0.5\n");
        let code = 0;
        let stderr = "";
        try {
            execFileSync("node", [cli, "clocks", "--in", bad, "--out", join(dir, "x.svg")],
                { stdio: ["ignore", "pipe", "pipe"] });
        } catch (e: any) {
            code = e.status;
            stderr = String(e.stderr);
        }
        expect(code).toBe(2);
        expect(stderr).toMatch(/sample_mem/);
    });

    it("exits 2 on a missing input file", () => {
        let code = 0;
        try {
            execFileSync("node", [cli, "scaling", "--in", "/nonexistent.json", "--out", "/tmp/x.svg"],
                { stdio: "ignore" });
        } catch (e: any) {
            code = e.status;
        }
        expect(code).toBe(2);
    });
});

describe("display geometry", () => {
    it("spectrum band shading spans exactly the critical band", () => {
        const svg = renderSpectrum(loadSpectra(join(EMP, "spectra.csv")),
            { mode: "sigma", shadeBand: true });
        expect(svg).toContain("#fff3cd");
        const noBand = renderSpectrum(loadSpectra(join(EMP, "spectra.csv")),
            { mode: "sigma", shadeBand: false });
        expect(noBand.includes("#fff3cd")).toBe(false);
    });

    it("clocks figure marks both onsets when present", () => {
        const clocks = loadClocks(join(MLP, "clocks.json"));
        const svg = renderClocks(loadSnapshots(join(MLP, "snapshots.csv")), { clocks });
        if (clocks.tauRule !== null) expect(svg).toContain("rule onset");
        if (clocks.tauMem !== null) expect(svg).toContain("mem onset");
    });

    it("scaling figure annotates the supplied fit without refitting", () => {
        const data = loadScaling(join(GOLDEN, "scaling.json"));
        const svg = renderScaling(data);
        expect(svg).toContain("R2");
        expect(svg).toContain("N^");
    });

    it("numeric columns in the golden artifacts parse cleanly", () => {
        const t = readCsv(join(EMP, "basins.csv"));
        const means = numericColumn(t, "mean", "basins.csv");
        expect(means.every(Number.isFinite)).toBe(true);
    });
});
