import { BasinRow } from "../artifacts.js";
import { extent, linearScale } from "../scale.js";
import { axes, legend, polygon, polyline, svgDocument, text } from "../svg.js";

const DIRECTION_COLORS: Record<string, string> = {
    hamming1_invalid: "#d62728",
    hamming2_valid_novel: "#2ca02c",
    nearest_other_train: "#8e44ad",
};

const METRICS = ["exact_match", "hamming", "l2_from_start"];
const METRIC_LABELS: Record<string, string> = {
    exact_match: "exact match to anchor",
    hamming: "bits flipped from anchor",
    l2_from_start: "distance of output from anchor",
};

/** Basin probes: one panel per metric, one curve per probe direction, with
 * bootstrap bands when the lo/hi columns are present. */
export function renderBasin(rows: BasinRow[]): string {
    const directions = [...new Set(rows.map(r => r.direction))];
    const W = 560;
    const H = 720;
    const body: string[] = [];
    const sigma = rows[0]?.sigma;
    body.push(text(W / 2, 22, `attractor basin profiles (noise level ${sigma})`,
        ' font-size="13" text-anchor="middle" font-weight="bold"'));

    METRICS.forEach((metric, mi) => {
        const sel = rows.filter(r => r.metric === metric);
        if (!sel.length) return;
        const top = 45 + mi * 220;
        const xr: [number, number] = [65, W - 25];
        const yr: [number, number] = [top + 185, top + 15];
        const x = linearScale(extent(sel.map(r => r.t)), xr);
        const yVals = sel.flatMap(r => [r.mean, r.lo ?? r.mean, r.hi ?? r.mean]);
        const [lo, hi] = extent(yVals);
        const y = linearScale([Math.min(lo, 0), hi * 1.05 || 1], yr);
        for (const [i, dir] of directions.entries()) {
            const pts = sel.filter(r => r.direction === dir).sort((a, b) => a.t - b.t);
            if (!pts.length) continue;
            const color = DIRECTION_COLORS[dir] ?? ["#1f77b4", "#ff7f0e"][i % 2];
            const hasBand = pts.every(p => p.lo !== null && p.hi !== null);
            if (hasBand) {
                const band: [number, number][] = [
                    ...pts.map(p => [x(p.t), y(p.lo as number)] as [number, number]),
                    ...[...pts].reverse().map(p => [x(p.t), y(p.hi as number)] as [number, number]),
                ];
                body.push(polygon(band, color, ' opacity="0.18"'));
            }
            body.push(polyline(pts.map(p => [x(p.t), y(p.mean)] as [number, number]), color, ' stroke-width="1.5"'));
        }
        body.push(...axes(x, y, {
            xLabel: mi === METRICS.length - 1 ? "interpolation position t" : undefined,
            yLabel: METRIC_LABELS[metric],
        }));
    });
    body.push(...legend(75, 52, directions.map(d =>
        [d, DIRECTION_COLORS[d] ?? "#1f77b4"] as [string, string])));
    return svgDocument(W, H, body);
}
