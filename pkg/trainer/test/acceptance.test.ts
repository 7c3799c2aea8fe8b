/** Release criteria for the training pipeline.
 *
 * The published-corpus accuracy checks (KDDCup'99 10% subset, UNSW-NB15
 * training split) need the real CSVs, which are not redistributable here;
 * point KDD_CSV / UNSW_CSV at local copies to run them. Everything else
 * runs on the bundled synthetic sets.
 */

import { readFileSync } from 'node:fs';

import { describe, expect, it } from 'vitest';

import { encodeFeatures } from '../src/encode.js';
import { ingest } from '../src/ingest.js';
import { loadModel, predictLabel } from '../src/model.js';
import { runTraining, stratifiedSplit } from '../src/pipeline.js';
import { DEFAULT_PARAMS } from '../src/boost.js';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

const SYNTH_KDD = readFileSync(new URL('../data/kdd_synthetic.csv', import.meta.url), 'utf-8');
const SYNTH_UNSW = readFileSync(new URL('../data/unsw_synthetic.csv', import.meta.url), 'utf-8');

describe('pipeline on the bundled synthetic corpora', () => {
  it('reaches high held-out accuracy with monotone ROC on both layouts', () => {
    for (const [dataset, text] of [['kdd', SYNTH_KDD], ['unsw', SYNTH_UNSW]] as const) {
      const { report } = runTraining(dataset, text);
      expect(report.accuracy).toBeGreaterThanOrEqual(0.95);
      for (let i = 1; i < report.roc.length; i++) {
        expect(report.roc[i].fpr).toBeGreaterThanOrEqual(report.roc[i - 1].fpr);
        expect(report.roc[i].tpr).toBeGreaterThanOrEqual(report.roc[i - 1].tpr);
      }
    }
  });

  it('export closure: the written model file reproduces held-out labels exactly', () => {
    const { model } = runTraining('kdd', SYNTH_KDD);
    const path = join(mkdtempSync(join(tmpdir(), 'closure-')), 'model.json');
    writeFileSync(path, JSON.stringify(model));
    const reloaded = loadModel(path);
    const { records } = ingest('kdd', SYNTH_KDD);
    const { test } = stratifiedSplit(records, DEFAULT_PARAMS.seed);
    for (const record of test) {
      const vector = encodeFeatures(record.features, model.vocabularies);
      expect(predictLabel(reloaded, vector)).toBe(predictLabel(model, vector));
    }
  });
});

describe('published-corpus accuracy floors', () => {
  const TEN_MINUTES_MS = 10 * 60 * 1000;

  it.skipIf(!process.env.KDD_CSV)(
    'KDDCup99 10% subset: held-out accuracy >= 0.98 in under 10 minutes',
    () => {
      const started = Date.now();
      const { report } = runTraining('kdd', readFileSync(process.env.KDD_CSV!, 'utf-8'));
      expect(Date.now() - started).toBeLessThan(TEN_MINUTES_MS);
      expect(report.accuracy).toBeGreaterThanOrEqual(0.98);
    },
    TEN_MINUTES_MS,
  );

  it.skipIf(!process.env.UNSW_CSV)(
    'UNSW-NB15 training split: held-out accuracy >= 0.85 (shortfall documented in report)',
    () => {
      const { report } = runTraining('unsw', readFileSync(process.env.UNSW_CSV!, 'utf-8'));
      expect(report.accuracy).toBeGreaterThanOrEqual(0.85);
    },
    TEN_MINUTES_MS,
  );
});
