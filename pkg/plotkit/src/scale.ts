export interface Scale {
    (v: number): number;
    domain: [number, number];
    range: [number, number];
    ticks(): number[];
    isLog: boolean;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
    const [d0, d1] = domain;
    const [r0, r1] = range;
    const span = d1 - d0 || 1;
    const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
    f.domain = domain;
    f.range = range;
    f.isLog = false;
    f.ticks = () => niceLinearTicks(d0, d1);
    return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
    const [d0, d1] = domain;
    if (d0 <= 0 || d1 <= 0) throw new Error(`log scale needs positive domain, got [${d0}, ${d1}]`);
    const l0 = Math.log10(d0);
    const l1 = Math.log10(d1);
    const span = l1 - l0 || 1;
    const [r0, r1] = range;
    const f = ((v: number) => r0 + ((Math.log10(v) - l0) / span) * (r1 - r0)) as Scale;
    f.domain = domain;
    f.range = range;
    f.isLog = true;
    f.ticks = () => decadeTicks(d0, d1);
    return f;
}

export function niceLinearTicks(lo: number, hi: number, count = 5): number[] {
    if (lo === hi) return [lo];
    const raw = (hi - lo) / count;
    const mag = Math.pow(10, Math.floor(Math.log10(raw)));
    const step = [1, 2, 5, 10].map(m => m * mag).find(s => (hi - lo) / s <= count) ?? 10 * mag;
    const start = Math.ceil(lo / step) * step;
    const out: number[] = [];
    for (let v = start; v <= hi + 1e-12 * step; v += step) out.push(round12(v));
    return out;
}

export function decadeTicks(lo: number, hi: number): number[] {
    const out: number[] = [];
    for (let e = Math.ceil(Math.log10(lo) - 1e-9); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
        const v = Math.pow(10, e);
        if (v >= lo * (1 - 1e-9)) out.push(v);
    }
    return out.length >= 2 ? out : [lo, hi];
}

function round12(v: number): number {
    return Number(v.toPrecision(12));
}

export function extent(values: number[]): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of values) {
        if (!Number.isFinite(v)) continue;
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    if (lo > hi) throw new Error("no finite values to scale");
    return [lo, hi];
}

export function fmt(v: number): string {
    if (v === 0) return "0";
    const a = Math.abs(v);
    if (a >= 10000 || a < 0.001) return v.toExponential(0).replace("+", "");
    return Number(v.toPrecision(4)).toString();
}
