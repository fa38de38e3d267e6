/**
 * Training loop: per-scene gradient steps on binary cross-entropy between the
 * model's similarity entries and the spatial K-NN indicator.
 */
import * as tf from "@tensorflow/tfjs";
import { SimilarityModel } from "./model";
import { TrainingScene, targetMatrix, descriptorMatrix } from "./data";

export interface TrainOptions {
    /** Supervision neighbor count; rows keep at most this many positives. */
    k: number;
    epochs: number;
    initialLr: number;
    /** First epoch (1-based) at which the decay multiplier applies. */
    decayStartEpoch: number;
    decayRate: number;
    lrFloor: number;
    seed: number;
    /** Called once per epoch with progress; defaults to silent. */
    onEpoch?: (epoch: number, meanLoss: number, lr: number) => void;
    warn?: (message: string) => void;
}

export const DEFAULT_TRAIN_OPTIONS: TrainOptions = {
    k: 20,
    epochs: 10,
    initialLr: 5e-4,
    decayStartEpoch: 3,
    decayRate: 0.9,
    lrFloor: 1e-5,
    seed: 0,
};

export interface EpochStats {
    epoch: number;
    meanLoss: number;
    lr: number;
    steps: number;
    skipped: number;
}

/** Learning rate for a 1-based epoch index under the decay schedule. */
export function lrForEpoch(epoch: number, opts: TrainOptions = DEFAULT_TRAIN_OPTIONS): number {
    const decays = Math.max(0, epoch - opts.decayStartEpoch + 1);
    return Math.max(opts.lrFloor, opts.initialLr * Math.pow(opts.decayRate, decays));
}

/** Deterministic 32-bit PRNG for shuffling scene order. */
function mulberry32(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a = (a + 0x6d2b79f5) >>> 0;
        let t = a;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

function shuffled<T>(items: T[], rand: () => number): T[] {
    const out = items.slice();
    for (let i = out.length - 1; i > 0; i--) {
        const j = Math.floor(rand() * (i + 1));
        [out[i], out[j]] = [out[j], out[i]];
    }
    return out;
}

const BCE_EPSILON = 1e-7;

/**
 * Off-diagonal mean binary cross-entropy between similarity entries and the
 * 0/1 neighbor indicator.
 */
export function bceLoss(similarity: tf.Tensor2D, targets: tf.Tensor2D): tf.Scalar {
    return tf.tidy(() => {
        const n = similarity.shape[0];
        const offDiag = tf.sub(tf.ones([n, n]), tf.eye(n));
        const s = tf.clipByValue(similarity, BCE_EPSILON, 1 - BCE_EPSILON);
        const perEntry = tf.add(
            tf.mul(targets, tf.log(s)),
            tf.mul(tf.sub(1, targets), tf.log(tf.sub(1, s))),
        );
        const masked = tf.mul(perEntry, offDiag);
        return tf.neg(tf.div(tf.sum(masked), n * (n - 1))) as tf.Scalar;
    });
}

/**
 * Train `model` in place, one optimizer step per scene per epoch. Scenes with
 * no positive pairs are skipped with a warning. Returns per-epoch stats.
 */
export function trainModel(
    model: SimilarityModel,
    scenes: TrainingScene[],
    options: Partial<TrainOptions> = {},
): EpochStats[] {
    const opts: TrainOptions = { ...DEFAULT_TRAIN_OPTIONS, ...options };
    const warn = opts.warn ?? ((msg: string) => console.warn(msg));
    const rand = mulberry32(opts.seed + 0x5eed);
    const optimizer = tf.train.adam(opts.initialLr);
    const varList = model.trainableVariables();
    const history: EpochStats[] = [];

    // Oracle rows are nearest-first, so trimming to k keeps the k closest.
    const prepared = scenes.map((scene) => {
        const targetRows = scene.targetRows.map((row) => row.slice(0, opts.k));
        const positives = targetRows.reduce((acc, row) => acc + row.length, 0);
        return { scene: { ...scene, targetRows }, positives };
    });

    for (let epoch = 1; epoch <= opts.epochs; epoch++) {
        const lr = lrForEpoch(epoch, opts);
        (optimizer as unknown as { learningRate: number }).learningRate = lr;
        let lossSum = 0;
        let steps = 0;
        let skipped = 0;
        for (const { scene, positives } of shuffled(prepared, rand)) {
            if (positives === 0) {
                warn(`skipping scene ${scene.name}: no positive pairs`);
                skipped += 1;
                continue;
            }
            const x = descriptorMatrix(scene);
            const y = targetMatrix(scene);
            const { value, grads } = tf.variableGrads(
                () => bceLoss(model.similarity(x), y),
                varList,
            );
            optimizer.applyGradients(grads as Record<string, tf.Variable>);
            lossSum += value.dataSync()[0];
            steps += 1;
            value.dispose();
            Object.values(grads).forEach((g) => g.dispose());
            x.dispose();
            y.dispose();
        }
        const meanLoss = steps === 0 ? NaN : lossSum / steps;
        history.push({ epoch, meanLoss, lr, steps, skipped });
        opts.onEpoch?.(epoch, meanLoss, lr);
    }
    optimizer.dispose();
    return history;
}
