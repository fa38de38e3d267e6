/**
 * Scene loading: pairs a points file (descriptors) with an oracle
 * neighborhood file (spatial K-NN supervision) and maps both onto dense row
 * indices for training.
 */
import * as tf from "@tensorflow/tfjs";
import { readdirSync, statSync, existsSync } from "fs";
import { join } from "path";
import { readPointsFile, readNeighborhoodsFile } from "./format";

export interface TrainingScene {
    name: string;
    /** Point ids in row order. */
    ids: number[];
    /** [N, D] descriptor rows. */
    descriptors: number[][];
    /** Per row, the row indices of its true spatial neighbors. */
    targetRows: number[][];
    oracleK: number;
}

/** Load one scene from a points file plus its oracle neighborhoods. */
export function loadScene(pointsPath: string, oraclePath: string, name = pointsPath): TrainingScene {
    const points = readPointsFile(pointsPath);
    if (points.descriptorDim === 0) {
        throw new Error(`${pointsPath}: points file has no descriptors`);
    }
    const oracle = readNeighborhoodsFile(oraclePath);
    const idToRow = new Map<number, number>();
    points.ids.forEach((id, row) => idToRow.set(id, row));

    const targetRows: number[][] = points.ids.map(() => []);
    oracle.subjects.forEach(([item], rec) => {
        const row = idToRow.get(item);
        if (row === undefined) {
            throw new Error(`${oraclePath}: subject ${item} not present in ${pointsPath}`);
        }
        const mapped: number[] = [];
        for (const nb of oracle.neighborIds[rec]) {
            const nbRow = idToRow.get(nb);
            if (nbRow !== undefined && nbRow !== row) {
                mapped.push(nbRow);
            }
        }
        targetRows[row] = mapped;
    });
    return { name, ids: points.ids, descriptors: points.descriptors, targetRows, oracleK: oracle.k };
}

/**
 * Discover scene subdirectories under `root`, each holding `points.txt` and
 * `oracle.txt`, sorted by name.
 */
export function discoverScenes(root: string): Array<{ points: string; oracle: string; name: string }> {
    const out: Array<{ points: string; oracle: string; name: string }> = [];
    for (const entry of readdirSync(root).sort()) {
        const dir = join(root, entry);
        if (!statSync(dir).isDirectory()) {
            continue;
        }
        const points = join(dir, "points.txt");
        const oracle = join(dir, "oracle.txt");
        if (existsSync(points) && existsSync(oracle)) {
            out.push({ points, oracle, name: entry });
        }
    }
    return out;
}

/** Binary K-NN indicator matrix for a scene, shape [N, N], diagonal zero. */
export function targetMatrix(scene: TrainingScene): tf.Tensor2D {
    const n = scene.ids.length;
    const buf = new Float32Array(n * n);
    scene.targetRows.forEach((rows, i) => {
        for (const j of rows) {
            buf[i * n + j] = 1;
        }
    });
    return tf.tensor2d(buf, [n, n]);
}

/** Descriptor tensor for a scene, shape [N, D]. */
export function descriptorMatrix(scene: TrainingScene): tf.Tensor2D {
    return tf.tensor2d(scene.descriptors);
}

/**
 * Mean fraction of each row's estimate that appears in the reference rows.
 * Both arguments map row/subject index to a list of ids.
 */
export function meanOverlap(estimated: number[][], reference: number[][]): number {
    if (estimated.length !== reference.length) {
        throw new Error(`row count mismatch: ${estimated.length} vs ${reference.length}`);
    }
    let total = 0;
    estimated.forEach((row, i) => {
        const truth = new Set(reference[i]);
        const hits = row.filter((id) => truth.has(id)).length;
        total += row.length === 0 ? 0 : hits / row.length;
    });
    return estimated.length === 0 ? 0 : total / estimated.length;
}
