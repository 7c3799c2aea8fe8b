export { ingest, buildVocabularies } from './ingest.js';
export type { DatasetName, IngestResult } from './ingest.js';
export { buildSchema, encodeFeatures, NUMERIC_FEATURES } from './encode.js';
export { trainBoostedTrees, treeMargin, sigmoid, DEFAULT_PARAMS } from './boost.js';
export type { BoostParams, BoostedModel } from './boost.js';
export { exportModel, loadModel, validateModel, predictMargin, predictProba, predictLabel } from './model.js';
export { accuracy, rocPoints, rocAuc, inferenceLatencyMs } from './evaluate.js';
export type { RocPoint } from './evaluate.js';
export { exportFixtures } from './fixtures.js';
export { runTraining, stratifiedSplit } from './pipeline.js';
export type { TrainingReport, TrainOutputs } from './pipeline.js';
export type {
  DatasetRecord,
  Fixture,
  PacketFeatures,
  PortableModel,
  TreeNodes,
  Vocabularies,
} from './types.js';
export { SchemaError, TrainingError } from './types.js';
