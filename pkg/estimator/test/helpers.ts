/**
 * Shared test utilities: running the primary pointveil CLI, building cached
 * scene datasets, and tiny numeric helpers.
 */
import { execFileSync } from "child_process";
import { existsSync, mkdirSync, rmSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join, resolve } from "path";

export const ESTIMATOR_ROOT = resolve(__dirname, "..");

/** Run the primary CLI; throws on nonzero exit, returns stdout. */
export function pointveil(...args: string[]): string {
    return execFileSync("python3", ["-m", "pointveil.cli", ...args], {
        encoding: "utf-8",
        stdio: ["ignore", "pipe", "pipe"],
    });
}

/** Run a short python snippet against the primary library; returns stdout. */
export function python(code: string): string {
    return execFileSync("python3", ["-c", code], {
        encoding: "utf-8",
        stdio: ["ignore", "pipe", "pipe"],
    });
}

export interface DatasetSpec {
    count: number;
    startSeed: number;
    n: number;
    k: number;
    dim?: number;
    clusters?: number;
    noise?: number;
}

/**
 * Build (or reuse) a dataset of scene directories via the primary CLI. The
 * cache key includes every parameter, so changed specs rebuild cleanly.
 */
export function ensureDataset(tag: string, spec: DatasetSpec): string {
    const dim = spec.dim ?? 8;
    const clusters = spec.clusters ?? 10;
    const noise = spec.noise ?? 0.15;
    const key = `${tag}-c${spec.count}-s${spec.startSeed}-n${spec.n}-k${spec.k}-d${dim}-cl${clusters}-no${noise}`;
    const root = join(tmpdir(), "pointveil-estimator-data", key);
    const stamp = join(root, ".complete");
    if (existsSync(stamp)) {
        return root;
    }
    rmSync(root, { recursive: true, force: true });
    mkdirSync(root, { recursive: true });
    execFileSync(
        "python3",
        [
            join(ESTIMATOR_ROOT, "tools", "make_scenes.py"),
            root,
            String(spec.count),
            String(spec.startSeed),
            String(spec.n),
            String(spec.k),
            String(dim),
            String(clusters),
            String(noise),
        ],
        { stdio: ["ignore", "ignore", "pipe"] },
    );
    writeFileSync(stamp, key + "\n");
    return root;
}

/** Deterministic uniform PRNG for test fixtures. */
export function makeRng(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a = (a + 0x6d2b79f5) >>> 0;
        let t = a;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

/** Row indices of the k nearest points to each point (exact, brute force). */
export function spatialKnn(coords: number[][], k: number): number[][] {
    const n = coords.length;
    const out: number[][] = [];
    for (let i = 0; i < n; i++) {
        const dists: Array<[number, number]> = [];
        for (let j = 0; j < n; j++) {
            if (j === i) {
                continue;
            }
            let d2 = 0;
            for (let a = 0; a < coords[i].length; a++) {
                const diff = coords[i][a] - coords[j][a];
                d2 += diff * diff;
            }
            dists.push([d2, j]);
        }
        dists.sort((x, y) => x[0] - y[0] || x[1] - y[1]);
        out.push(dists.slice(0, k).map(([, j]) => j));
    }
    return out;
}

/** Axis-aligned bounding-box diagonal of a coordinate list. */
export function bboxDiameter(coords: number[][]): number {
    const m = coords[0].length;
    const lo = coords[0].slice();
    const hi = coords[0].slice();
    for (const row of coords) {
        for (let a = 0; a < m; a++) {
            lo[a] = Math.min(lo[a], row[a]);
            hi[a] = Math.max(hi[a], row[a]);
        }
    }
    let d2 = 0;
    for (let a = 0; a < m; a++) {
        d2 += (hi[a] - lo[a]) ** 2;
    }
    return Math.sqrt(d2);
}
