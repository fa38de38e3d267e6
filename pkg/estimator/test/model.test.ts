import { describe, it, expect, beforeAll } from "vitest";
import { mkdtempSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import * as tf from "@tensorflow/tfjs";
import { initBackend } from "../src/backend";
import { buildModel, saveModel, loadModel } from "../src/model";
import { estimateRows } from "../src/estimate";
import { meanOverlap } from "../src/data";
import { makeRng, spatialKnn } from "./helpers";

beforeAll(async () => {
    await initBackend();
});

function randomDescriptors(n: number, d: number, seed: number): number[][] {
    const rng = makeRng(seed);
    const rows: number[][] = [];
    for (let i = 0; i < n; i++) {
        const row: number[] = [];
        for (let j = 0; j < d; j++) {
            // Box-Muller: isotropic gaussian descriptors.
            const u = Math.max(rng(), 1e-12);
            const v = rng();
            row.push(Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v));
        }
        rows.push(row);
    }
    return rows;
}

describe("buildModel validation", () => {
    it("rejects a width not divisible by heads", () => {
        expect(() => buildModel(8, 30, 2, 4)).toThrow(/not divisible/);
    });

    it("rejects nonpositive dimensions", () => {
        expect(() => buildModel(0, 16, 1, 1)).toThrow(/positive/);
        expect(() => buildModel(8, 16, 0, 1)).toThrow(/positive/);
    });
});

describe("similarity matrix", () => {
    it("has shape (N, N) with rows summing to 1 within 1e-5", () => {
        const model = buildModel(6, 32, 2, 2, 3);
        const n = 40;
        const x = tf.tensor2d(randomDescriptors(n, 6, 17));
        const sim = model.similarity(x);
        expect(sim.shape).toEqual([n, n]);
        const rowSums = sim.sum(-1).dataSync();
        for (const s of rowSums) {
            expect(Math.abs(s - 1)).toBeLessThan(1e-5);
        }
        const values = sim.dataSync();
        for (const v of values) {
            expect(v).toBeGreaterThanOrEqual(0);
        }
        for (let i = 0; i < n; i++) {
            expect(values[i * n + i]).toBe(0);
        }
        sim.dispose();
        x.dispose();
        model.dispose();
    });

    it("is permutation equivariant", () => {
        const model = buildModel(5, 32, 2, 2, 7);
        const n = 23;
        const desc = randomDescriptors(n, 5, 23);
        const rng = makeRng(99);
        const perm = Array.from({ length: n }, (_, i) => i);
        for (let i = n - 1; i > 0; i--) {
            const j = Math.floor(rng() * (i + 1));
            [perm[i], perm[j]] = [perm[j], perm[i]];
        }
        const x = tf.tensor2d(desc);
        const xp = tf.tensor2d(perm.map((p) => desc[p]));
        const s = model.similarity(x).arraySync() as number[][];
        const sp = model.similarity(xp).arraySync() as number[][];
        let worst = 0;
        for (let i = 0; i < n; i++) {
            for (let j = 0; j < n; j++) {
                worst = Math.max(worst, Math.abs(sp[i][j] - s[perm[i]][perm[j]]));
            }
        }
        expect(worst).toBeLessThan(1e-4);
        x.dispose();
        xp.dispose();
        model.dispose();
    });

    it("gives chance-level neighborhoods untrained on uncorrelated descriptors", () => {
        const model = buildModel(8, 32, 2, 2, 5);
        const n = 200;
        const k = 20;
        const coords = randomDescriptors(n, 3, 555);
        const desc = randomDescriptors(n, 8, 777);
        const ids = Array.from({ length: n }, (_, i) => i);
        const estimated = estimateRows(model, desc, ids, k);
        const truth = spatialKnn(coords, k);
        const ratio = meanOverlap(estimated, truth);
        const chance = k / (n - 1);
        expect(Math.abs(ratio - chance)).toBeLessThan(0.04);
        model.dispose();
    });
});

describe("save / load", () => {
    it("round-trips weights exactly", () => {
        const dir = mkdtempSync(join(tmpdir(), "est-model-"));
        const model = buildModel(4, 16, 1, 2, 9);
        const x = tf.tensor2d(randomDescriptors(12, 4, 31));
        const before = model.similarity(x).dataSync();
        saveModel(model, join(dir, "model.json"));
        const loaded = loadModel(join(dir, "model.json"));
        expect(loaded.config).toEqual(model.config);
        const after = loaded.similarity(x).dataSync();
        for (let i = 0; i < before.length; i++) {
            expect(after[i]).toBe(before[i]);
        }
        x.dispose();
        model.dispose();
        loaded.dispose();
    });
});

describe("estimateRows bounds", () => {
    it("rejects k >= N and k < 1", () => {
        const model = buildModel(4, 16, 1, 2);
        const desc = randomDescriptors(6, 4, 1);
        const ids = [0, 1, 2, 3, 4, 5];
        expect(() => estimateRows(model, desc, ids, 6)).toThrow(/must be smaller/);
        expect(() => estimateRows(model, desc, ids, 0)).toThrow(/positive/);
        model.dispose();
    });

    it("returns every other id at k = N-1 for a perfect ratio of 1", () => {
        const model = buildModel(4, 16, 1, 2, 2);
        const n = 9;
        const desc = randomDescriptors(n, 4, 44);
        const ids = [3, 5, 7, 11, 13, 17, 19, 23, 29];
        const rows = estimateRows(model, desc, ids, n - 1);
        rows.forEach((row, i) => {
            const expected = ids.filter((id) => id !== ids[i]).sort((a, b) => a - b);
            expect(row.slice().sort((a, b) => a - b)).toEqual(expected);
        });
        const truth = rows.map((_, i) => ids.filter((id) => id !== ids[i]));
        expect(meanOverlap(rows, truth)).toBe(1.0);
        model.dispose();
    });
});
