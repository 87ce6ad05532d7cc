import { ScalingData } from "../artifacts.js";
import { extent, fmt, logScale } from "../scale.js";
import { axes, circle, polyline, svgDocument, text } from "../svg.js";

/** Memorization-time scaling: log-log scatter of (dataset size, onset step)
 * with the supplied power-law fit drawn and annotated. The fit parameters
 * come from the input file; nothing is refit here. */
export function renderScaling(data: ScalingData): string {
    const W = 520;
    const H = 400;
    const xr: [number, number] = [65, W - 25];
    const yr: [number, number] = [H - 55, 45];
    if (!data.points.length) throw new Error("scaling input has no points");
    const ns = data.points.map(p => p[0]);
    const taus = data.points.map(p => p[1]);
    const [nLo, nHi] = extent(ns);
    const x = logScale([nLo / 1.3, nHi * 1.3], xr);
    const y = logScale(extent(taus).map((v, i) => (i === 0 ? v / 1.5 : v * 1.5)) as [number, number], yr);
    const body: string[] = [];
    body.push(text(W / 2, 25, "memorization onset vs dataset size",
        ' font-size="13" text-anchor="middle" font-weight="bold"'));
    if (data.fit) {
        const { c, alpha, r2 } = data.fit;
        const pts: [number, number][] = [];
        for (let k = 0; k <= 40; k++) {
            const n = nLo * Math.pow(nHi / nLo, k / 40);
            pts.push([x(n), y(c * Math.pow(n, alpha))]);
        }
        body.push(polyline(pts, "#444", ' stroke-width="1.2" stroke-dasharray="5,3"'));
        body.push(text(xr[0] + 12, yr[1] + 14,
            `fit: ${fmt(c)} * N^${fmt(alpha)}  (R2 = ${fmt(r2)}, n = ${data.points.length})`,
            ' font-size="10"'));
    }
    for (const [n, tau] of data.points) {
        body.push(circle(x(n), y(tau), 3.2, "#ff7f0e", ' stroke="#000" stroke-width="0.5"'));
    }
    body.push(...axes(x, y, { xLabel: "dataset size N", yLabel: "memorization onset step" }));
    return svgDocument(W, H, body);
}
