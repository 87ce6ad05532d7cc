/** Fixed palettes; all colors resolve to deterministic hex strings. */

// four generation states, matching the run raster encoding 0..3
export const STATE_COLORS = ["#f2a33c", "#d62728", "#2ca02c", "#8e44ad"];
export const STATE_NAMES = ["invalid (quantization)", "invalid (rule)", "valid novel", "valid memorized"];

export const SPLIT_COLORS: Record<string, string> = {
    train: "#1f77b4",
    heldout_valid: "#d62728",
    uniform_cube: "#7f7f7f",
};

const MAGMA_STOPS: [number, number, number][] = [
    [0, 0, 4], [28, 16, 68], [79, 18, 123], [129, 37, 129], [181, 54, 122],
    [229, 80, 100], [251, 135, 97], [254, 194, 135], [252, 253, 191],
];

const RDBU_STOPS: [number, number, number][] = [
    [5, 48, 97], [33, 102, 172], [103, 169, 207], [209, 229, 240], [247, 247, 247],
    [253, 219, 199], [239, 138, 98], [178, 24, 43], [103, 0, 31],
];

function interp(stops: [number, number, number][], t: number): string {
    const x = Math.min(1, Math.max(0, t)) * (stops.length - 1);
    const i = Math.min(stops.length - 2, Math.floor(x));
    const f = x - i;
    const a = stops[i];
    const b = stops[i + 1];
    const c = a.map((v, k) => Math.round(v + f * (b[k] - v)));
    return `#${c.map(v => v.toString(16).padStart(2, "0")).join("")}`;
}

export function magma(t: number): string {
    return interp(MAGMA_STOPS, t);
}

/** Diverging red-blue (reversed: low = blue, high = red). */
export function rdbuR(t: number): string {
    return interp(RDBU_STOPS, t);
}
