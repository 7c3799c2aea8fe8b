#!/usr/bin/env node
import { readFileSync, writeFileSync } from 'node:fs';
import { pathToFileURL } from 'node:url';

import { DEFAULT_PARAMS } from './boost.js';
import { DatasetName } from './ingest.js';
import { runTraining } from './pipeline.js';
import { SchemaError, TrainingError } from './types.js';

const USAGE = `usage: anomaly-trainer train --dataset {kdd,unsw} --in <csv>
                         --out-model <path> --out-fixtures <path> --report <path>
                         [--trees N] [--depth N] [--learning-rate X]
                         [--seed N] [--fixtures-n N]`;

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    if (!argv[i].startsWith('--')) {
      throw new Error(`unexpected argument ${argv[i]}`);
    }
    const key = argv[i].slice(2);
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`missing value for --${key}`);
    }
    args.set(key, value);
    i++;
  }
  return args;
}

export function main(argv: string[]): number {
  if (argv[0] !== 'train') {
    console.error(USAGE);
    return 2;
  }
  let args: Map<string, string>;
  try {
    args = parseArgs(argv.slice(1));
  } catch (err) {
    console.error((err as Error).message);
    console.error(USAGE);
    return 2;
  }
  const dataset = args.get('dataset');
  const input = args.get('in');
  const outModel = args.get('out-model');
  const outFixtures = args.get('out-fixtures');
  const reportPath = args.get('report');
  if (!dataset || !input || !outModel || !outFixtures || !reportPath) {
    console.error(USAGE);
    return 2;
  }
  if (dataset !== 'kdd' && dataset !== 'unsw') {
    console.error(`unknown dataset ${dataset}; expected kdd or unsw`);
    return 2;
  }

  const params = {
    ...DEFAULT_PARAMS,
    nTrees: Number(args.get('trees') ?? DEFAULT_PARAMS.nTrees),
    maxDepth: Number(args.get('depth') ?? DEFAULT_PARAMS.maxDepth),
    learningRate: Number(args.get('learning-rate') ?? DEFAULT_PARAMS.learningRate),
    seed: Number(args.get('seed') ?? DEFAULT_PARAMS.seed),
  };
  const fixturesN = Number(args.get('fixtures-n') ?? 50);

  let csvText: string;
  try {
    csvText = readFileSync(input, 'utf-8');
  } catch (err) {
    console.error(`cannot read ${input}: ${(err as Error).message}`);
    return 1;
  }

  try {
    const started = Date.now();
    const { model, report, fixtures } = runTraining(dataset as DatasetName, csvText, params, fixturesN);
    writeFileSync(outModel, JSON.stringify(model, null, 1) + '\n');
    writeFileSync(outFixtures, JSON.stringify(fixtures, null, 1) + '\n');
    writeFileSync(reportPath, JSON.stringify(report, null, 1) + '\n');
    console.log(
      `trained ${model.trees.length} trees on ${report.train_rows} rows in ${((Date.now() - started) / 1000).toFixed(1)} s`,
    );
    console.log(`held-out accuracy ${report.accuracy.toFixed(4)}, ROC AUC ${report.roc_auc.toFixed(4)}`);
    for (const note of report.notes) {
      console.log(`note: ${note}`);
    }
    console.log(`wrote ${outModel}, ${outFixtures}, ${reportPath}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof TrainingError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
