import { Matrix } from "../artifacts.js";
import { magma, rdbuR } from "../color.js";
import { extent, fmt, linearScale } from "../scale.js";
import { circle, line, polygon, rect, svgDocument, text } from "../svg.js";

export interface PlaneMeta {
    alphaRange: [number, number];
    betaRange: [number, number];
}

const SQRT2 = Math.SQRT2;

// in-plane coordinates of the four cube-face anchors
const ANCHORS: { a: number; b: number; label: string; color: string }[] = [
    { a: 0, b: 0, label: "a", color: "#ffffff" },
    { a: 2 * SQRT2, b: 0, label: "b", color: "#00c8ff" },
    { a: SQRT2, b: SQRT2, label: "c", color: "#ffd700" },
    { a: SQRT2, b: -SQRT2, label: "d", color: "#ff9000" },
];

function heatPanel(body: string[], m: Matrix, plane: PlaneMeta,
                   px: [number, number], py: [number, number],
                   colormap: (t: number) => string, lo: number, hi: number): void {
    const x = linearScale(plane.alphaRange, px);
    const y = linearScale(plane.betaRange, [py[1], py[0]]); // beta increases upward
    const cw = (px[1] - px[0]) / m.rows;
    const ch = (py[1] - py[0]) / m.cols;
    const span = hi - lo || 1;
    for (let i = 0; i < m.rows; i++) {
        for (let j = 0; j < m.cols; j++) {
            const v = m.data[i * m.cols + j];
            const t = (v - lo) / span;
            body.push(rect(px[0] + i * cw, py[1] - (j + 1) * ch, cw + 0.3, ch + 0.3, colormap(t)));
        }
    }
    for (const an of ANCHORS) {
        body.push(circle(x(an.a), y(an.b), 3.5, an.color, ' stroke="#000" stroke-width="0.7"'));
        body.push(text(x(an.a) + 6, y(an.b) + 3, an.label, ' font-size="10" fill="#000"'));
    }
}

/** Two heatmap panels over the cube-face slice: score magnitude (sequential
 * colormap) and the signed projected velocity along the a-to-b axis
 * (diverging colormap, blue = attracted to the base anchor, red = to its
 * valid neighbor), with arrows showing the attraction direction and
 * strength along that axis. */
export function renderField(mag: Matrix, proj: Matrix, plane: PlaneMeta, sigma: number): string {
    const W = 700;
    const H = 420;
    const panelW = 280;
    const py: [number, number] = [70, 70 + panelW];
    const body: string[] = [];
    body.push(text(W / 2, 25, `score field slice at noise level ${fmt(sigma)}`,
        ' font-size="13" text-anchor="middle" font-weight="bold"'));

    const [mLo, mHi] = extent(Array.from(mag.data));
    heatPanel(body, mag, plane, [50, 50 + panelW], py, magma, mLo, mHi);
    body.push(text(50 + panelW / 2, 60, "score magnitude", ' font-size="11" text-anchor="middle"'));
    body.push(text(50 + panelW / 2, py[1] + 18, `min ${fmt(mLo)}  max ${fmt(mHi)}`, ' font-size="9" text-anchor="middle"'));

    const pAbs = Math.max(...Array.from(proj.data).map(Math.abs), 1e-12);
    const px2: [number, number] = [390, 390 + panelW];
    heatPanel(body, proj, plane, px2, py, rdbuR, -pAbs, pAbs);
    body.push(text(390 + panelW / 2, 60, "projected velocity (a to b)", ' font-size="11" text-anchor="middle"'));

    // arrows: direction and strength of the attraction along the a-b axis
    const step = Math.max(1, Math.floor(proj.rows / 10));
    const cw = panelW / proj.rows;
    const ch = panelW / proj.cols;
    for (let i = Math.floor(step / 2); i < proj.rows; i += step) {
        for (let j = Math.floor(step / 2); j < proj.cols; j += step) {
            const v = proj.data[i * proj.cols + j];
            const cx = px2[0] + (i + 0.5) * cw;
            const cy = py[1] - (j + 0.5) * ch;
            const len = (v / pAbs) * cw * step * 0.45;
            if (Math.abs(len) < 0.5) continue;
            body.push(line(cx - len, cy, cx + len, cy, "#ffffff", ' stroke-width="1"'));
            const tip = cx + len;
            const dir = Math.sign(len) * 2.4;
            body.push(polygon([[tip, cy], [tip - dir, cy - 1.7], [tip - dir, cy + 1.7]], "#ffffff"));
        }
    }
    body.push(text(390 + panelW / 2, py[1] + 18, `range +-${fmt(pAbs)}`, ' font-size="9" text-anchor="middle"'));
    return svgDocument(W, H, body);
}
