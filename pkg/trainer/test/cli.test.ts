import { existsSync, mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { describe, expect, it } from 'vitest';

import { main } from '../src/cli.js';
import { validateModel } from '../src/model.js';

const DATA = fileURLToPath(new URL('../data/kdd_synthetic.csv', import.meta.url));

describe('cli', () => {
  it('train writes model, fixtures, and report', () => {
    const dir = mkdtempSync(join(tmpdir(), 'cli-'));
    const code = main([
      'train',
      '--dataset', 'kdd',
      '--in', DATA,
      '--out-model', join(dir, 'model.json'),
      '--out-fixtures', join(dir, 'fixtures.json'),
      '--report', join(dir, 'report.json'),
      '--trees', '10',
      '--fixtures-n', '7',
    ]);
    expect(code).toBe(0);
    for (const name of ['model.json', 'fixtures.json', 'report.json']) {
      expect(existsSync(join(dir, name))).toBe(true);
    }
    const model = JSON.parse(readFileSync(join(dir, 'model.json'), 'utf-8'));
    expect(() => validateModel(model)).not.toThrow();
    expect(model.trees).toHaveLength(10);
    expect(JSON.parse(readFileSync(join(dir, 'fixtures.json'), 'utf-8'))).toHaveLength(7);
  });

  it('rejects unknown datasets and missing arguments', () => {
    expect(main(['train', '--dataset', 'nsl'])).toBe(2);
    expect(main(['serve'])).toBe(2);
  });

  it('reports unreadable input files', () => {
    const dir = mkdtempSync(join(tmpdir(), 'cli-'));
    const code = main([
      'train',
      '--dataset', 'kdd',
      '--in', join(dir, 'missing.csv'),
      '--out-model', join(dir, 'm.json'),
      '--out-fixtures', join(dir, 'f.json'),
      '--report', join(dir, 'r.json'),
    ]);
    expect(code).toBe(1);
  });
});
