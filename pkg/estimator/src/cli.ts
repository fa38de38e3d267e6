/**
 * Command-line entry points.
 *
 *   train     --config train.json [--out model.json]
 *   estimate  --model model.json --points points.txt --k 20 --out est.txt
 *
 * The training configuration is a JSON file; flags override it. Exit code 2
 * marks a usage problem, 1 a runtime failure.
 */
import { parseArgs } from "node:util";
import { readFileSync, existsSync } from "fs";
import * as tf from "@tensorflow/tfjs";
import { initBackend } from "./backend";
import { buildModel, saveModel, loadModel } from "./model";
import { trainModel, DEFAULT_TRAIN_OPTIONS } from "./train";
import { loadScene, discoverScenes, TrainingScene } from "./data";
import { readPointsFile } from "./format";
import { writeEstimatedNeighborhoods } from "./estimate";

class UsageError extends Error {}

const USAGE = `usage:
  train     --config train.json [--out model.json]
  estimate  --model model.json --points points.txt --k K --out est.txt

train config JSON keys:
  dataDir   directory of scene subdirs holding points.txt + oracle.txt
  scenes    explicit [{"points": ..., "oracle": ...}] list (alternative)
  k epochs width blocks heads seed initialLr modelOut`;

interface TrainConfig {
    dataDir?: string;
    scenes?: Array<{ points: string; oracle: string }>;
    k: number;
    epochs: number;
    width: number;
    blocks: number;
    heads: number;
    seed: number;
    initialLr: number;
    modelOut?: string;
}

const TRAIN_DEFAULTS: TrainConfig = {
    k: DEFAULT_TRAIN_OPTIONS.k,
    epochs: DEFAULT_TRAIN_OPTIONS.epochs,
    width: 256,
    blocks: 6,
    heads: 4,
    seed: 0,
    initialLr: DEFAULT_TRAIN_OPTIONS.initialLr,
};

function loadTrainConfig(path: string): TrainConfig {
    if (!existsSync(path)) {
        throw new UsageError(`config file not found: ${path}`);
    }
    let raw: Record<string, unknown>;
    try {
        raw = JSON.parse(readFileSync(path, "utf-8"));
    } catch (err) {
        throw new UsageError(`config ${path} is not valid JSON: ${(err as Error).message}`);
    }
    const cfg: TrainConfig = { ...TRAIN_DEFAULTS };
    const known = new Set([...Object.keys(TRAIN_DEFAULTS), "dataDir", "scenes", "modelOut"]);
    for (const [key, value] of Object.entries(raw)) {
        if (!known.has(key)) {
            throw new UsageError(`unknown config key ${JSON.stringify(key)}`);
        }
        (cfg as unknown as Record<string, unknown>)[key] = value;
    }
    return cfg;
}

function gatherScenes(cfg: TrainConfig): TrainingScene[] {
    const pairs = cfg.scenes
        ? cfg.scenes.map((s, i) => ({ ...s, name: `scene${i}` }))
        : cfg.dataDir
          ? discoverScenes(cfg.dataDir)
          : undefined;
    if (!pairs || pairs.length === 0) {
        throw new UsageError("config must provide dataDir or a non-empty scenes list");
    }
    return pairs.map((p) => loadScene(p.points, p.oracle, p.name));
}

async function cmdTrain(argv: string[]): Promise<void> {
    const { values } = parseArgs({
        args: argv,
        options: {
            config: { type: "string" },
            out: { type: "string" },
        },
    });
    if (!values.config) {
        throw new UsageError("train: --config is required");
    }
    const cfg = loadTrainConfig(values.config);
    const modelOut = values.out ?? cfg.modelOut;
    if (!modelOut) {
        throw new UsageError("train: provide --out or modelOut in the config");
    }
    const scenes = gatherScenes(cfg);
    const inputDim = scenes[0].descriptors[0].length;
    await initBackend();
    const model = buildModel(inputDim, cfg.width, cfg.blocks, cfg.heads, cfg.seed);
    const history = trainModel(model, scenes, {
        k: cfg.k,
        epochs: cfg.epochs,
        seed: cfg.seed,
        initialLr: cfg.initialLr,
        onEpoch: (epoch, loss, lr) =>
            console.error(`epoch ${epoch}/${cfg.epochs} loss=${loss.toFixed(6)} lr=${lr.toExponential(2)}`),
    });
    saveModel(model, modelOut);
    const last = history[history.length - 1];
    console.log(
        `trained on ${scenes.length} scenes (${last.steps} steps/epoch, final loss ${last.meanLoss.toFixed(6)}) -> ${modelOut}`,
    );
}

async function cmdEstimate(argv: string[]): Promise<void> {
    const { values } = parseArgs({
        args: argv,
        options: {
            model: { type: "string" },
            points: { type: "string" },
            k: { type: "string" },
            out: { type: "string" },
        },
    });
    for (const key of ["model", "points", "k", "out"] as const) {
        if (!values[key]) {
            throw new UsageError(`estimate: --${key} is required`);
        }
    }
    const k = Number(values.k);
    if (!Number.isInteger(k) || k < 1) {
        throw new UsageError(`estimate: --k must be a positive integer, got ${values.k}`);
    }
    if (!existsSync(values.model!)) {
        throw new UsageError(`model file not found: ${values.model}`);
    }
    if (!existsSync(values.points!)) {
        throw new UsageError(`points file not found: ${values.points}`);
    }
    await initBackend();
    const model = loadModel(values.model!);
    const points = readPointsFile(values.points!);
    const nf = writeEstimatedNeighborhoods(model, points, k, values.out!);
    console.log(`estimated ${nf.subjects.length} neighborhoods (k=${k}) -> ${values.out}`);
}

/** Run the CLI; returns the process exit code. */
export async function main(argv: string[]): Promise<number> {
    const [command, ...rest] = argv;
    try {
        if (command === "train") {
            await cmdTrain(rest);
        } else if (command === "estimate") {
            await cmdEstimate(rest);
        } else {
            throw new UsageError(command ? `unknown command ${JSON.stringify(command)}` : USAGE);
        }
        return 0;
    } catch (err) {
        if (err instanceof UsageError || (err as { code?: string }).code === "ERR_PARSE_ARGS_UNKNOWN_OPTION") {
            console.error(`${(err as Error).message}\n\n${USAGE}`);
            return 2;
        }
        console.error(`error: ${(err as Error).message}`);
        return 1;
    } finally {
        tf.disposeVariables();
    }
}

if (require.main === module) {
    main(process.argv.slice(2)).then((code) => {
        process.exitCode = code;
    });
}
