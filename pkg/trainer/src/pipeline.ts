import { BoostParams, DEFAULT_PARAMS, trainBoostedTrees } from './boost.js';
import { encodeFeatures } from './encode.js';
import { accuracy, inferenceLatencyMs, rocAuc, rocPoints, RocPoint } from './evaluate.js';
import { buildVocabularies, DatasetName, ingest } from './ingest.js';
import { exportFixtures } from './fixtures.js';
import { exportModel, predictProba } from './model.js';
import { DatasetRecord, Fixture, PortableModel, TrainingError } from './types.js';
import { mulberry32, shuffleInPlace } from './rng.js';

export interface TrainingReport {
  dataset: string;
  rows: number;
  train_rows: number;
  test_rows: number;
  vocab_sizes: { protocol_type: number; service: number; flag: number };
  params: BoostParams;
  accuracy: number;
  roc_auc: number;
  roc: RocPoint[];
  latency_ms_per_record: number;
  notes: string[];
}

export interface TrainOutputs {
  model: PortableModel;
  report: TrainingReport;
  fixtures: Fixture[];
}

export function stratifiedSplit(
  records: DatasetRecord[],
  seed: number,
  testFraction = 0.2,
): { train: DatasetRecord[]; test: DatasetRecord[] } {
  const rand = mulberry32(seed);
  const byClass: Record<number, number[]> = { 0: [], 1: [] };
  records.forEach((r, i) => byClass[r.label].push(i));
  const train: DatasetRecord[] = [];
  const test: DatasetRecord[] = [];
  for (const cls of [0, 1]) {
    const idx = byClass[cls];
    shuffleInPlace(idx, rand);
    const nTest = Math.round(idx.length * testFraction);
    idx.forEach((i, k) => (k < nTest ? test : train).push(records[i]));
  }
  shuffleInPlace(train, rand);
  shuffleInPlace(test, rand);
  return { train, test };
}

/** Paper-reported accuracies this pipeline is compared against; shortfalls
 * are documented in the report rather than hidden. */
const ACCURACY_FLOORS: Record<string, number> = { kdd: 0.98, unsw: 0.85 };

export function runTraining(
  dataset: DatasetName,
  csvText: string,
  params: BoostParams = DEFAULT_PARAMS,
  fixturesN = 50,
): TrainOutputs {
  const { records } = ingest(dataset, csvText);
  if (records.length < 2) {
    throw new TrainingError(`dataset yields ${records.length} records; need at least 2`);
  }
  const { train, test } = stratifiedSplit(records, params.seed);

  // vocabularies come from the training split only; unseen categories in
  // the test split exercise the zero-group encoding path
  const vocab = buildVocabularies(train);
  const trainX = train.map((r) => encodeFeatures(r.features, vocab));
  const trainY = Uint8Array.from(train.map((r) => r.label));
  const boosted = trainBoostedTrees(trainX, trainY, params);
  const model = exportModel(boosted, vocab, params, dataset, records.length);

  const testX = test.map((r) => encodeFeatures(r.features, vocab));
  const testY = test.map((r) => r.label);
  const probs = testX.map((x) => predictProba(model, x));
  const acc = accuracy(testY, probs);
  const roc = rocPoints(testY, probs);

  const notes: string[] = [];
  const floor = ACCURACY_FLOORS[dataset];
  if (acc < floor) {
    notes.push(
      `held-out accuracy ${acc.toFixed(4)} is below the ${floor} target for ${dataset}; ` +
        'this pipeline restricts itself to the five-feature packet schema, which may not ' +
        'match the feature set behind the published figure',
    );
  }

  const report: TrainingReport = {
    dataset,
    rows: records.length,
    train_rows: train.length,
    test_rows: test.length,
    vocab_sizes: {
      protocol_type: vocab.protocol_type.length,
      service: vocab.service.length,
      flag: vocab.flag.length,
    },
    params,
    accuracy: acc,
    roc_auc: rocAuc(roc),
    roc,
    latency_ms_per_record: inferenceLatencyMs(model, testX),
    notes,
  };
  return { model, report, fixtures: exportFixtures(model, test, fixturesN) };
}
