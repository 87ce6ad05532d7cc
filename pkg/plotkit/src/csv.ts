import { readFileSync } from "node:fs";

export interface Table {
    columns: string[];
    rows: string[][];
}

export class SchemaError extends Error {}

export function readCsv(path: string): Table {
    const text = readFileSync(path, "utf8").trim();
    if (!text) throw new SchemaError(`${path}: empty file`);
    const lines = text.split("\n");
    const columns = lines[0].split(",");
    const rows = lines.slice(1).map(line => line.split(","));
    return { columns, rows };
}

/** Column accessor that names the offending column on schema mismatch. */
export function column(table: Table, name: string, path = "input"): string[] {
    const idx = table.columns.indexOf(name);
    if (idx < 0) {
        throw new SchemaError(`${path}: missing required column '${name}' (found: ${table.columns.join(", ")})`);
    }
    return table.rows.map(r => r[idx]);
}

export function numericColumn(table: Table, name: string, path = "input"): number[] {
    return column(table, name, path).map((v, i) => {
        const x = Number(v);
        if (!Number.isFinite(x) && v !== "nan" && v !== "inf") {
            throw new SchemaError(`${path}: column '${name}' row ${i + 1} is not numeric: '${v}'`);
        }
        return x;
    });
}
