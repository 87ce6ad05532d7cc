import type { Scale } from "./scale.js";
import { fmt } from "./scale.js";

/** Minimal SVG assembly; output is a plain string so identical inputs give
 * byte-identical files. Numbers are fixed to 2 decimals to keep the output
 * stable across platforms. */

export function num(v: number): string {
    return (Math.round(v * 100) / 100).toString();
}

export function esc(text: string): string {
    return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function rect(x: number, y: number, w: number, h: number, fill: string, extra = ""): string {
    return `<rect x="${num(x)}" y="${num(y)}" width="${num(w)}" height="${num(h)}" fill="${fill}"${extra}/>`;
}

export function line(x1: number, y1: number, x2: number, y2: number, stroke: string, extra = ""): string {
    return `<line x1="${num(x1)}" y1="${num(y1)}" x2="${num(x2)}" y2="${num(y2)}" stroke="${stroke}"${extra}/>`;
}

export function polyline(pts: [number, number][], stroke: string, extra = ""): string {
    const d = pts.filter(p => Number.isFinite(p[0]) && Number.isFinite(p[1]))
        .map(p => `${num(p[0])},${num(p[1])}`).join(" ");
    return `<polyline points="${d}" fill="none" stroke="${stroke}"${extra}/>`;
}

export function polygon(pts: [number, number][], fill: string, extra = ""): string {
    const d = pts.map(p => `${num(p[0])},${num(p[1])}`).join(" ");
    return `<polygon points="${d}" fill="${fill}" stroke="none"${extra}/>`;
}

export function text(x: number, y: number, content: string, extra = ""): string {
    return `<text x="${num(x)}" y="${num(y)}" font-family="Helvetica,Arial,sans-serif"${extra}>${esc(content)}</text>`;
}

export function circle(x: number, y: number, r: number, fill: string, extra = ""): string {
    return `<circle cx="${num(x)}" cy="${num(y)}" r="${num(r)}" fill="${fill}"${extra}/>`;
}

export function svgDocument(width: number, height: number, body: string[]): string {
    return [
        `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
        rect(0, 0, width, height, "#ffffff"),
        ...body,
        "</svg>",
        "",
    ].join("\n");
}

/** Standard axes with tick marks and labels for a plot panel. */
export function axes(x: Scale, y: Scale, opts: { xLabel?: string; yLabel?: string; title?: string } = {}): string[] {
    const [x0, x1] = x.range;
    const [y0, y1] = y.range; // y0 is bottom (larger pixel value)
    const out: string[] = [];
    out.push(line(x0, y0, x1, y0, "#000", ' stroke-width="1"'));
    out.push(line(x0, y0, x0, y1, "#000", ' stroke-width="1"'));
    for (const t of x.ticks()) {
        const px = x(t);
        out.push(line(px, y0, px, y0 + 4, "#000"));
        out.push(text(px, y0 + 15, fmt(t), ' font-size="9" text-anchor="middle"'));
    }
    for (const t of y.ticks()) {
        const py = y(t);
        out.push(line(x0 - 4, py, x0, py, "#000"));
        out.push(text(x0 - 6, py + 3, fmt(t), ' font-size="9" text-anchor="end"'));
    }
    if (opts.xLabel) out.push(text((x0 + x1) / 2, y0 + 30, opts.xLabel, ' font-size="11" text-anchor="middle"'));
    if (opts.yLabel) {
        const cx = x0 - 38;
        const cy = (y0 + y1) / 2;
        out.push(`<g transform="rotate(-90 ${num(cx)} ${num(cy)})">` +
            text(cx, cy, opts.yLabel, ' font-size="11" text-anchor="middle"') + "</g>");
    }
    if (opts.title) out.push(text((x0 + x1) / 2, y1 - 8, opts.title, ' font-size="12" text-anchor="middle" font-weight="bold"'));
    return out;
}

export function legend(x: number, y: number, entries: [string, string][], dashes: Record<string, string> = {}): string[] {
    const out: string[] = [];
    entries.forEach(([label, color], i) => {
        const yy = y + i * 14;
        out.push(line(x, yy, x + 18, yy, color, ` stroke-width="2"${dashes[label] ? ` stroke-dasharray="${dashes[label]}"` : ""}`));
        out.push(text(x + 23, yy + 3, label, ' font-size="9"'));
    });
    return out;
}
