/**
 * Readers and writers for the pointveil text formats the estimator touches.
 *
 * Both formats are line oriented: a one-line JSON header with sorted keys and
 * no whitespace, then one record per line. The estimator reads points files
 * (for descriptors) and neighborhood files (oracle supervision), and writes
 * neighborhood files with provenance "Estimated" that the recovery pipeline
 * consumes unmodified.
 */
import { readFileSync, writeFileSync } from "fs";

export const FORMAT_VERSION = 1;

export interface PointsFile {
    dimension: number;
    descriptorDim: number;
    units: string;
    ids: number[];
    /** Row-major coordinates, one length-`dimension` row per point. */
    coords: number[][];
    /** One length-`descriptorDim` row per point; empty rows when absent. */
    descriptors: number[][];
    metadata: Record<string, unknown>;
}

export interface NeighborhoodFile {
    k: number;
    provenance: string;
    /** One [itemId, slot] pair per record. */
    subjects: Array<[number, number]>;
    /** One length-k row of neighbor item ids per record. */
    neighborIds: number[][];
    metadata: Record<string, unknown>;
}

/** JSON with recursively sorted object keys and no whitespace. */
export function canonicalJson(value: unknown): string {
    if (value === null || typeof value !== "object") {
        return JSON.stringify(value);
    }
    if (Array.isArray(value)) {
        return "[" + value.map(canonicalJson).join(",") + "]";
    }
    const entries = Object.entries(value as Record<string, unknown>)
        .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
        .map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
    return "{" + entries.join(",") + "}";
}

interface SplitFile {
    header: Record<string, any>;
    records: string[];
}

function splitRecords(text: string, expected: string): SplitFile {
    const lines = text.split("\n");
    if (lines.length > 0 && lines[lines.length - 1] === "") {
        lines.pop();
    }
    if (lines.length === 0) {
        throw new Error(`empty file, expected a ${expected} file`);
    }
    let header: Record<string, any>;
    try {
        header = JSON.parse(lines[0]);
    } catch (err) {
        throw new Error(`bad header line: ${(err as Error).message}`);
    }
    if (header.format !== expected) {
        throw new Error(`expected a ${expected} file, got ${JSON.stringify(header.format)}`);
    }
    if (header.version !== FORMAT_VERSION) {
        throw new Error(`unsupported ${expected} version ${header.version}`);
    }
    const records = lines.slice(1);
    const declared = Number(header.n);
    if (!Number.isInteger(declared) || declared < 0) {
        throw new Error(`header field "n" missing or invalid`);
    }
    if (records.length !== declared) {
        throw new Error(`expected ${declared} records, found ${records.length}`);
    }
    return { header, records };
}

function parseNumberTokens(line: string, count: number, lineNo: number): number[] {
    const parts = line.split(/\s+/).filter((t) => t.length > 0);
    if (parts.length !== count) {
        throw new Error(`record ${lineNo}: expected ${count} fields, got ${parts.length}`);
    }
    return parts.map((tok) => {
        const v = Number(tok);
        if (!Number.isFinite(v) && tok !== "inf" && tok !== "-inf") {
            throw new Error(`record ${lineNo}: bad number ${JSON.stringify(tok)}`);
        }
        return tok === "inf" ? Infinity : tok === "-inf" ? -Infinity : v;
    });
}

/** Parse a pointveil points file, including per-point descriptors if present. */
export function readPointsFile(path: string): PointsFile {
    const { header, records } = splitRecords(readFileSync(path, "utf-8"), "points");
    const m = Number(header.m);
    const dim = Number(header.descriptor_dim ?? 0);
    const ids: number[] = [];
    const coords: number[][] = [];
    const descriptors: number[][] = [];
    records.forEach((line, i) => {
        const row = parseNumberTokens(line, 1 + m + dim, i + 1);
        ids.push(row[0]);
        coords.push(row.slice(1, 1 + m));
        descriptors.push(row.slice(1 + m));
    });
    return {
        dimension: m,
        descriptorDim: dim,
        units: String(header.units ?? "m"),
        ids,
        coords,
        descriptors,
        metadata: header.metadata ?? {},
    };
}

/** Parse a pointveil neighborhoods file (oracle, corrupted, or estimated). */
export function readNeighborhoodsFile(path: string): NeighborhoodFile {
    const { header, records } = splitRecords(readFileSync(path, "utf-8"), "neighborhoods");
    const k = Number(header.k);
    const subjects: Array<[number, number]> = [];
    const neighborIds: number[][] = [];
    records.forEach((line, i) => {
        const row = parseNumberTokens(line, 2 + k, i + 1);
        subjects.push([row[0], row[1]]);
        neighborIds.push(row.slice(2));
    });
    return {
        k,
        provenance: String(header.provenance ?? ""),
        subjects,
        neighborIds,
        metadata: header.metadata ?? {},
    };
}

/**
 * Serialize a neighborhood set in the exact byte layout the recovery pipeline
 * reads: canonical JSON header, then `item slot n1..nK` integer records.
 */
export function writeNeighborhoodsFile(path: string, nf: NeighborhoodFile): void {
    const header = canonicalJson({
        format: "neighborhoods",
        version: FORMAT_VERSION,
        k: nf.k,
        n: nf.subjects.length,
        provenance: nf.provenance,
        metadata: nf.metadata,
    });
    const lines = [header];
    nf.subjects.forEach(([item, slot], row) => {
        const ids = nf.neighborIds[row];
        if (ids.length !== nf.k) {
            throw new Error(`record ${row + 1}: ${ids.length} neighbors, expected k=${nf.k}`);
        }
        lines.push(`${item} ${slot} ${ids.join(" ")}`);
    });
    writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}
