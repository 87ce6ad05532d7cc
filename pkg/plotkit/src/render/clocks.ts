import { ClocksData, SnapshotData } from "../artifacts.js";
import { Scale, linearScale, logScale } from "../scale.js";
import { axes, legend, line, polyline, svgDocument, text } from "../svg.js";

export interface ClocksOptions {
    clocks?: ClocksData | null;
    guides?: boolean; // 0.1 / 0.9 threshold guide lines
}

/** Two-clock trajectory: rule accuracy, memorization ratio, and the invalid
 * fraction against training step, with onset markers when a clock report is
 * supplied. */
export function renderClocks(data: SnapshotData, opts: ClocksOptions = {}): string {
    const W = 620;
    const H = 400;
    const xr: [number, number] = [60, W - 20];
    const yr: [number, number] = [H - 55, 45];
    const positive = data.steps.filter(s => s > 0);
    const x: Scale = positive.length > 1
        ? logScale([positive[0], positive[positive.length - 1]], xr)
        : linearScale([0, Math.max(...data.steps, 1)], xr);
    const y = linearScale([0, 1.02], yr);
    const body: string[] = [];
    body.push(text(W / 2, 25, "rule accuracy and memorization across training",
        ' font-size="13" text-anchor="middle" font-weight="bold"'));

    if (opts.guides !== false) {
        for (const g of [0.1, 0.9]) {
            body.push(line(xr[0], y(g), xr[1], y(g), "#999", ' stroke-dasharray="2,4"'));
            body.push(text(xr[1] + 2, y(g) + 3, String(g), ' font-size="8" fill="#777"'));
        }
    }
    const series: [string, number[], string, string][] = [
        ["rule accuracy", data.sampleAcc, "#1f77b4", ""],
        ["memorization ratio", data.sampleMem, "#ff7f0e", ' stroke-dasharray="6,3"'],
        ["invalid fraction", data.invalidFrac, "#2ca02c", ""],
    ];
    for (const [, vals, color, dash] of series) {
        const pts = data.steps.map((s, i) => [x(Math.max(s, x.domain[0])), y(vals[i])] as [number, number]);
        body.push(polyline(pts, color, ` stroke-width="1.5"${dash}`));
    }
    const tau = opts.clocks;
    if (tau?.tauRule != null) {
        body.push(line(x(tau.tauRule), yr[0], x(tau.tauRule), yr[1], "#1f77b4", ' stroke-dasharray="2,3"'));
        body.push(text(x(tau.tauRule), yr[1] - 4, "rule onset", ' font-size="9" text-anchor="middle" fill="#1f77b4"'));
    }
    if (tau?.tauMem != null) {
        body.push(line(x(tau.tauMem), yr[0], x(tau.tauMem), yr[1], "#ff7f0e", ' stroke-dasharray="2,3"'));
        body.push(text(x(tau.tauMem), yr[1] - 4, "mem onset", ' font-size="9" text-anchor="middle" fill="#ff7f0e"'));
    }
    body.push(...axes(x, y, { xLabel: "training step", yLabel: "fraction" }));
    body.push(...legend(xr[0] + 10, 58,
        series.map(([label, , color]) => [label, color] as [string, string]),
        { "memorization ratio": "6,3" }));
    return svgDocument(W, H, body);
}
