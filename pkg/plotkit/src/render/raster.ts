import { RasterData } from "../artifacts.js";
import { STATE_COLORS, STATE_NAMES } from "../color.js";
import { line, rect, svgDocument, text } from "../svg.js";

/** Per-seed state raster with a stacked-count top panel.
 *
 * Seeds are sorted by the checkpoint at which they first become memorized
 * (never-memorized seeds last), which makes the memorization front visible.
 * Columns are checkpoints; within a column identical consecutive states
 * merge into one rectangle.
 */
export function renderRaster(data: RasterData): string {
    const W = 640;
    const H = 480;
    const left = 60;
    const right = W - 20;
    const topPanel = { y0: 40, y1: 170 };
    const rasterPanel = { y0: 190, y1: 440 };
    const T = data.steps.length;
    const S = data.labels[0]?.length ?? 0;
    const colW = (right - left) / T;

    // stable sort by first-memorized checkpoint
    const firstMem = Array.from({ length: S }, (_, s) => {
        for (let t = 0; t < T; t++) if (data.labels[t][s] === 3) return t;
        return T;
    });
    const order = Array.from({ length: S }, (_, s) => s).sort((a, b) => firstMem[a] - firstMem[b] || a - b);

    const body: string[] = [];
    body.push(text(W / 2, 20, "Generation states across training", ' font-size="13" text-anchor="middle" font-weight="bold"'));

    // stacked counts
    const panelH = topPanel.y1 - topPanel.y0;
    for (let t = 0; t < T; t++) {
        const counts = [0, 0, 0, 0];
        for (let s = 0; s < S; s++) counts[data.labels[t][s]]++;
        let yCursor = topPanel.y1;
        for (let state = 0; state < 4; state++) {
            const h = (counts[state] / S) * panelH;
            if (h <= 0) continue;
            body.push(rect(left + t * colW, yCursor - h, Math.max(colW - 0.5, 0.5), h, STATE_COLORS[state]));
            yCursor -= h;
        }
    }
    body.push(line(left, topPanel.y1, right, topPanel.y1, "#000"));
    body.push(line(left, topPanel.y1, left, topPanel.y0, "#000"));
    body.push(text(left - 8, topPanel.y0 + 5, "1", ' font-size="9" text-anchor="end"'));
    body.push(text(left - 8, topPanel.y1 + 3, "0", ' font-size="9" text-anchor="end"'));
    body.push(text(left - 45, (topPanel.y0 + topPanel.y1) / 2, "fraction", ' font-size="10" transform="rotate(-90 15 105)"'));

    // per-seed raster with column-wise run-length merging
    const rasterH = rasterPanel.y1 - rasterPanel.y0;
    const rowH = rasterH / Math.max(S, 1);
    for (let t = 0; t < T; t++) {
        let runStart = 0;
        let runState = data.labels[t][order[0]];
        for (let i = 1; i <= S; i++) {
            const state = i < S ? data.labels[t][order[i]] : -1;
            if (state !== runState) {
                body.push(rect(left + t * colW, rasterPanel.y0 + runStart * rowH,
                    Math.max(colW - 0.5, 0.5), (i - runStart) * rowH, STATE_COLORS[runState]));
                runStart = i;
                runState = state;
            }
        }
    }
    body.push(text(left - 45, (rasterPanel.y0 + rasterPanel.y1) / 2, "seed", ' font-size="10"'));

    // step ticks under the raster
    const tickEvery = Math.max(1, Math.floor(T / 8));
    for (let t = 0; t < T; t += tickEvery) {
        const x = left + (t + 0.5) * colW;
        body.push(line(x, rasterPanel.y1, x, rasterPanel.y1 + 4, "#000"));
        body.push(text(x, rasterPanel.y1 + 15, String(data.steps[t]), ' font-size="8" text-anchor="middle"'));
    }
    body.push(text((left + right) / 2, rasterPanel.y1 + 30, "training step", ' font-size="11" text-anchor="middle"'));

    // legend
    STATE_NAMES.forEach((name, i) => {
        const x = left + i * 145;
        body.push(rect(x, 26, 10, 10, STATE_COLORS[i]));
        body.push(text(x + 14, 35, name, ' font-size="9"'));
    });

    return svgDocument(W, H, body);
}
