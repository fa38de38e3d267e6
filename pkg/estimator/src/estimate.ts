/**
 * Neighborhood estimation: run the similarity model over a scene's
 * descriptors and keep the top-K ids per row, packaged in the neighborhood
 * file layout the recovery pipeline reads.
 */
import * as tf from "@tensorflow/tfjs";
import { SimilarityModel } from "./model";
import { PointsFile, NeighborhoodFile, writeNeighborhoodsFile } from "./format";

/**
 * Top-K neighbor ids per descriptor row, by descending similarity. The
 * subject itself is never returned. K must be smaller than the set size.
 */
export function estimateRows(model: SimilarityModel, descriptors: number[][], ids: number[], k: number): number[][] {
    const n = descriptors.length;
    if (k >= n) {
        throw new RangeError(`k=${k} must be smaller than the descriptor count ${n}`);
    }
    if (k < 1) {
        throw new RangeError(`k=${k} must be positive`);
    }
    const indices = tf.tidy(() => {
        const x = tf.tensor2d(descriptors);
        const sim = model.similarity(x);
        // Push the (already zero) diagonal strictly below every off-diagonal
        // entry so a row of underflowed zeros can never select the subject.
        const ranked = tf.sub(sim, tf.eye(n));
        return tf.topk(ranked, k).indices;
    });
    const flat = indices.dataSync() as Int32Array;
    indices.dispose();
    const rows: number[][] = [];
    for (let i = 0; i < n; i++) {
        const row: number[] = [];
        for (let j = 0; j < k; j++) {
            row.push(ids[flat[i * k + j]]);
        }
        rows.push(row);
    }
    return rows;
}

/** Estimate neighborhoods for a parsed points file. */
export function estimateNeighborhoods(model: SimilarityModel, points: PointsFile, k: number): NeighborhoodFile {
    if (points.descriptorDim === 0) {
        throw new Error("points file has no descriptors to estimate from");
    }
    const neighborIds = estimateRows(model, points.descriptors, points.ids, k);
    return {
        k,
        provenance: "Estimated",
        subjects: points.ids.map((id) => [id, 0] as [number, number]),
        neighborIds,
        metadata: { source: "nn_estimator", model_width: model.config.width },
    };
}

/** Estimate and serialize in one step; returns the neighborhood set. */
export function writeEstimatedNeighborhoods(
    model: SimilarityModel,
    points: PointsFile,
    k: number,
    path: string,
): NeighborhoodFile {
    const nf = estimateNeighborhoods(model, points, k);
    writeNeighborhoodsFile(path, nf);
    return nf;
}
