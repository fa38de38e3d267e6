/**
 * Similarity model: descriptors in, row-normalized pairwise similarity out.
 *
 * Architecture: a two-layer MLP projects descriptors into the working width,
 * a stack of pre-norm multi-head self-attention blocks mixes information
 * across the set, and pairwise dot products of the final embeddings are
 * row-softmaxed with the diagonal masked. The network never sees coordinates
 * or input order, so the similarity matrix is permutation-equivariant by
 * construction.
 */
import * as tf from "@tensorflow/tfjs";
import { readFileSync, writeFileSync } from "fs";

export interface ModelConfig {
    inputDim: number;
    width: number;
    blocks: number;
    heads: number;
}

const MASK_VALUE = -1e9;
const LN_EPSILON = 1e-5;

function layerNorm(x: tf.Tensor2D, gamma: tf.Variable, beta: tf.Variable): tf.Tensor2D {
    const mean = tf.mean(x, -1, true);
    const centered = tf.sub(x, mean);
    const variance = tf.mean(tf.square(centered), -1, true);
    const normed = tf.div(centered, tf.sqrt(tf.add(variance, LN_EPSILON)));
    return tf.add(tf.mul(normed, gamma), beta) as tf.Tensor2D;
}

let instanceCounter = 0;

export class SimilarityModel {
    readonly config: ModelConfig;
    /** Weights keyed by logical name; registered names carry an instance prefix. */
    readonly variables: Record<string, tf.Variable>;
    private readonly prefix: string;

    constructor(config: ModelConfig, seed = 0) {
        const { inputDim, width, blocks, heads } = config;
        if (inputDim < 1 || width < 1 || blocks < 1 || heads < 1) {
            throw new RangeError(`model dims must be positive, got ${JSON.stringify(config)}`);
        }
        if (width % heads !== 0) {
            throw new RangeError(`width ${width} not divisible by heads ${heads}`);
        }
        this.config = { ...config };
        this.variables = {};
        this.prefix = `m${instanceCounter++}/`;

        let next = seed;
        const dense = (name: string, rows: number, cols: number) => {
            const init = tf.initializers.glorotUniform({ seed: next++ });
            this.add(`${name}/W`, init.apply([rows, cols]) as tf.Tensor);
            this.add(`${name}/b`, tf.zeros([cols]));
        };
        const norm = (name: string) => {
            this.add(`${name}/gamma`, tf.ones([width]));
            this.add(`${name}/beta`, tf.zeros([width]));
        };

        dense("proj/fc1", inputDim, width);
        dense("proj/fc2", width, width);
        for (let b = 0; b < blocks; b++) {
            norm(`block${b}/ln1`);
            for (const part of ["q", "k", "v", "o"]) {
                dense(`block${b}/attn/${part}`, width, width);
            }
            norm(`block${b}/ln2`);
            dense(`block${b}/ffn/fc1`, width, width);
            dense(`block${b}/ffn/fc2`, width, width);
        }
    }

    private add(name: string, value: tf.Tensor): void {
        this.variables[name] = tf.variable(value, true, this.prefix + name);
    }

    private param(name: string): tf.Variable {
        return this.variables[name];
    }

    trainableVariables(): tf.Variable[] {
        return Object.values(this.variables);
    }

    private denseOp(name: string, x: tf.Tensor2D): tf.Tensor2D {
        return tf.add(tf.matMul(x, this.param(`${name}/W`)), this.param(`${name}/b`)) as tf.Tensor2D;
    }

    private attentionOp(block: number, x: tf.Tensor2D): tf.Tensor2D {
        const { width, heads } = this.config;
        const headDim = width / heads;
        const n = x.shape[0];
        const split = (t: tf.Tensor2D) =>
            tf.transpose(tf.reshape(t, [n, heads, headDim]), [1, 0, 2]);

        const q = split(this.denseOp(`block${block}/attn/q`, x));
        const k = split(this.denseOp(`block${block}/attn/k`, x));
        const v = split(this.denseOp(`block${block}/attn/v`, x));
        const scores = tf.div(tf.matMul(q, k, false, true), Math.sqrt(headDim));
        const mixed = tf.matMul(tf.softmax(scores), v);
        const merged = tf.reshape(tf.transpose(mixed, [1, 0, 2]), [n, width]) as tf.Tensor2D;
        return this.denseOp(`block${block}/attn/o`, merged);
    }

    /** Per-descriptor embeddings after the attention stack, shape [N, width]. */
    embed(descriptors: tf.Tensor2D): tf.Tensor2D {
        return tf.tidy(() => {
            let x = this.denseOp("proj/fc2", tf.relu(this.denseOp("proj/fc1", descriptors)));
            for (let b = 0; b < this.config.blocks; b++) {
                const attnIn = layerNorm(x, this.param(`block${b}/ln1/gamma`), this.param(`block${b}/ln1/beta`));
                x = tf.add(x, this.attentionOp(b, attnIn)) as tf.Tensor2D;
                const ffnIn = layerNorm(x, this.param(`block${b}/ln2/gamma`), this.param(`block${b}/ln2/beta`));
                const ffn = this.denseOp(`block${b}/ffn/fc2`, tf.relu(this.denseOp(`block${b}/ffn/fc1`, ffnIn)));
                x = tf.add(x, ffn) as tf.Tensor2D;
            }
            return x;
        });
    }

    /**
     * Row-normalized pairwise similarity, shape [N, N]: dot-product scores of
     * the embeddings, diagonal masked out, softmax over each row. Rows sum to
     * 1 and the diagonal is exactly 0 after the mask underflows.
     */
    similarity(descriptors: tf.Tensor2D): tf.Tensor2D {
        return tf.tidy(() => {
            const z = this.embed(descriptors);
            const n = z.shape[0];
            const scores = tf.div(tf.matMul(z, z, false, true), Math.sqrt(this.config.width));
            const masked = tf.add(scores, tf.mul(tf.eye(n), MASK_VALUE));
            return tf.softmax(masked) as tf.Tensor2D;
        });
    }

    dispose(): void {
        for (const v of Object.values(this.variables)) {
            v.dispose();
        }
    }
}

/**
 * Build an untrained similarity model for descriptors of length `inputDim`.
 * Width, block count, and head count default to the reference configuration;
 * `seed` fixes the weight initialization.
 */
export function buildModel(
    inputDim: number,
    width = 256,
    blocks = 6,
    heads = 4,
    seed = 0,
): SimilarityModel {
    return new SimilarityModel({ inputDim, width, blocks, heads }, seed);
}

interface SavedWeight {
    shape: number[];
    data: string;
}

/** Serialize config and weights to a single JSON file. */
export function saveModel(model: SimilarityModel, path: string): void {
    const weights: Record<string, SavedWeight> = {};
    for (const [name, variable] of Object.entries(model.variables)) {
        const data = variable.dataSync() as Float32Array;
        weights[name] = {
            shape: variable.shape.slice(),
            data: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString("base64"),
        };
    }
    const payload = {
        format: "similarity-model",
        version: 1,
        config: model.config,
        weights,
    };
    writeFileSync(path, JSON.stringify(payload), "utf-8");
}

/** Restore a model saved by `saveModel`. */
export function loadModel(path: string): SimilarityModel {
    const payload = JSON.parse(readFileSync(path, "utf-8"));
    if (payload.format !== "similarity-model" || payload.version !== 1) {
        throw new Error(`not a similarity-model file: ${path}`);
    }
    const model = new SimilarityModel(payload.config as ModelConfig);
    for (const [name, saved] of Object.entries(payload.weights as Record<string, SavedWeight>)) {
        const variable = model.variables[name];
        if (!variable) {
            throw new Error(`unknown weight ${name} in ${path}`);
        }
        const raw = Buffer.from(saved.data, "base64");
        const values = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
        variable.assign(tf.tensor(values, saved.shape as number[]));
    }
    return model;
}
