import { SpectrumRow } from "../artifacts.js";
import { SPLIT_COLORS } from "../color.js";
import { Scale, extent, fmt, linearScale, logScale } from "../scale.js";
import { axes, legend, polyline, rect, svgDocument, text } from "../svg.js";

export interface SpectrumOptions {
    mode: "sigma" | "trace";
    step?: number;           // sigma mode: checkpoint to slice (default: last)
    band?: [number, number]; // shaded / averaged noise band
    shadeBand?: boolean;
}

const DEFAULT_BAND: [number, number] = [0.2, 2.0];

function splitColor(name: string, i: number): string {
    return SPLIT_COLORS[name] ?? ["#1f77b4", "#d62728", "#7f7f7f", "#2ca02c"][i % 4];
}

/** Denoising-loss spectra: loss against noise level at one checkpoint, or the
 * in-band average traced across checkpoints. */
export function renderSpectrum(rows: SpectrumRow[], opts: SpectrumOptions): string {
    const band = opts.band ?? DEFAULT_BAND;
    const W = 560;
    const H = 400;
    const xr: [number, number] = [65, W - 25];
    const yr: [number, number] = [H - 55, 40];
    const splits = [...new Set(rows.map(r => r.split))];
    const body: string[] = [];

    if (opts.mode === "sigma") {
        const steps = [...new Set(rows.map(r => r.step))].sort((a, b) => a - b);
        const step = opts.step ?? steps[steps.length - 1];
        const sel = rows.filter(r => r.step === step);
        if (!sel.length) throw new Error(`no spectrum rows at step ${step} (available: ${steps.join(", ")})`);
        const positive = sel.filter(r => r.loss > 0);
        const yDomain = positive.length ? extent(positive.map(r => r.loss)) : [1e-6, 1];
        const x = logScale(extent(sel.map(r => r.sigma)), xr);
        const y = logScale([Math.max(yDomain[0], 1e-12), yDomain[1]], yr);
        if (opts.shadeBand !== false) {
            body.push(rect(x(band[0]), yr[1], x(band[1]) - x(band[0]), yr[0] - yr[1], "#fff3cd"));
        }
        for (const [i, split] of splits.entries()) {
            const pts = sel.filter(r => r.split === split && r.loss > 0)
                .sort((a, b) => a.sigma - b.sigma)
                .map(r => [x(r.sigma), y(r.loss)] as [number, number]);
            const dash = split === "uniform_cube" ? ' stroke-dasharray="5,3"' : "";
            body.push(polyline(pts, splitColor(split, i), ` stroke-width="1.5"${dash}`));
        }
        body.push(...axes(x, y, { xLabel: "noise level", yLabel: "denoising loss", title: `loss spectrum at step ${step}` }));
    } else {
        // in-band average traced over checkpoints (display aggregation only)
        const inBand = rows.filter(r => r.sigma >= band[0] && r.sigma <= band[1]);
        if (!inBand.length) throw new Error(`no spectrum rows inside the band [${band[0]}, ${band[1]}]`);
        const steps = [...new Set(inBand.map(r => r.step))].sort((a, b) => a - b);
        const series = splits.map(split => steps.map(step => {
            const sel = inBand.filter(r => r.split === split && r.step === step);
            return sel.reduce((acc, r) => acc + r.loss, 0) / Math.max(sel.length, 1);
        }));
        const x: Scale = steps.length > 1 && steps[0] > 0
            ? logScale([steps[0], steps[steps.length - 1]], xr)
            : linearScale([steps[0] - 1, steps[steps.length - 1] + 1], xr);
        const y = linearScale([0, Math.max(...series.flat()) * 1.05 || 1], yr);
        for (const [i, split] of splits.entries()) {
            const pts = steps.map((s, k) => [x(s), y(series[i][k])] as [number, number]);
            const dash = split === "uniform_cube" ? ' stroke-dasharray="5,3"' : "";
            body.push(polyline(pts, splitColor(split, i), ` stroke-width="1.5"${dash}`));
            if (steps.length === 1) {
                body.push(rect(x(steps[0]) - 2, y(series[i][0]) - 2, 4, 4, splitColor(split, i)));
            }
        }
        body.push(...axes(x, y, {
            xLabel: "training step",
            yLabel: `loss (mean over noise band ${fmt(band[0])}..${fmt(band[1])})`,
            title: "in-band loss across training",
        }));
    }
    body.push(...legend(xr[0] + 10, 52, splits.map((s, i) => [s, splitColor(s, i)] as [string, string]),
        { uniform_cube: "5,3" }));
    return svgDocument(W, H, body);
}
