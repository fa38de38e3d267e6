export { initBackend } from "./backend";
export {
    FORMAT_VERSION,
    canonicalJson,
    readPointsFile,
    readNeighborhoodsFile,
    writeNeighborhoodsFile,
} from "./format";
export type { PointsFile, NeighborhoodFile } from "./format";
export { SimilarityModel, buildModel, saveModel, loadModel } from "./model";
export type { ModelConfig } from "./model";
export { loadScene, discoverScenes, targetMatrix, descriptorMatrix, meanOverlap } from "./data";
export type { TrainingScene } from "./data";
export { trainModel, bceLoss, lrForEpoch, DEFAULT_TRAIN_OPTIONS } from "./train";
export type { TrainOptions, EpochStats } from "./train";
export { estimateRows, estimateNeighborhoods, writeEstimatedNeighborhoods } from "./estimate";
