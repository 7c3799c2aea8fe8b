import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { DEFAULT_PARAMS } from '../src/boost.js';
import { encodeFeatures } from '../src/encode.js';
import { loadModel, predictLabel, predictProba, validateModel } from '../src/model.js';
import { runTraining } from '../src/pipeline.js';
import { stratifiedSplit } from '../src/pipeline.js';
import { ingest } from '../src/ingest.js';
import { readFileSync } from 'node:fs';
import { SchemaError } from '../src/types.js';

const KDD_CSV = readFileSync(new URL('../data/kdd_synthetic.csv', import.meta.url), 'utf-8');
const FAST = { ...DEFAULT_PARAMS, nTrees: 20 };

describe('export/import closure', () => {
  it('a re-imported model reproduces the held-out predicted labels exactly', () => {
    const { model } = runTraining('kdd', KDD_CSV, FAST);
    const dir = mkdtempSync(join(tmpdir(), 'trainer-'));
    const path = join(dir, 'model.json');
    writeFileSync(path, JSON.stringify(model));
    const reloaded = loadModel(path);

    const { records } = ingest('kdd', KDD_CSV);
    const { test } = stratifiedSplit(records, FAST.seed);
    for (const record of test) {
      const vector = encodeFeatures(record.features, model.vocabularies);
      expect(predictLabel(reloaded, vector)).toBe(predictLabel(model, vector));
      expect(predictProba(reloaded, vector)).toBe(predictProba(model, vector));
    }
  });
});

describe('validateModel', () => {
  it('accepts a freshly trained model', () => {
    const { model } = runTraining('kdd', KDD_CSV, FAST);
    expect(() => validateModel(model)).not.toThrow();
  });

  it('rejects ragged node arrays', () => {
    const { model } = runTraining('kdd', KDD_CSV, FAST);
    const broken = structuredClone(model);
    broken.trees[0].value = broken.trees[0].value.slice(1);
    expect(() => validateModel(broken)).toThrowError(SchemaError);
  });

  it('rejects feature indices outside the schema', () => {
    const { model } = runTraining('kdd', KDD_CSV, FAST);
    const broken = structuredClone(model);
    broken.trees[0].feature[0] = 999;
    expect(() => validateModel(broken)).toThrowError(SchemaError);
  });

  it('rejects a schema that disagrees with the vocabularies', () => {
    const { model } = runTraining('kdd', KDD_CSV, FAST);
    const broken = structuredClone(model);
    broken.schema = broken.schema.slice(1);
    expect(() => validateModel(broken)).toThrowError(SchemaError);
  });
});

describe('predictProba', () => {
  it('is 0.5 for an empty ensemble with zero bias', () => {
    const { model } = runTraining('kdd', KDD_CSV, FAST);
    const empty = structuredClone(model);
    empty.trees = [];
    empty.bias = 0;
    expect(predictProba(empty, new Array(model.schema.length).fill(0))).toBe(0.5);
  });
});
