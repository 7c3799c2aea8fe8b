import { describe, expect, it } from 'vitest';

import { DEFAULT_PARAMS, sigmoid, trainBoostedTrees, treeMargin } from '../src/boost.js';
import { TrainingError, TreeNodes } from '../src/types.js';

function separableRows(): { rows: number[][]; labels: number[] } {
  // perfectly separable on the single feature (think src_bytes)
  const rows = [[1], [2], [3], [4], [5], [100], [101], [102], [103], [104]];
  const labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
  return { rows, labels };
}

const TOY_PARAMS = { ...DEFAULT_PARAMS, nTrees: 10, minChildSamples: 1 };

describe('trainBoostedTrees', () => {
  it('fits a separable toy set to accuracy 1.0', () => {
    const { rows, labels } = separableRows();
    const model = trainBoostedTrees(rows, labels, TOY_PARAMS);
    rows.forEach((row, i) => {
      let margin = model.bias;
      for (const tree of model.trees) {
        margin += treeMargin(tree, row);
      }
      expect(sigmoid(margin) >= 0.5 ? 1 : 0).toBe(labels[i]);
    });
  });

  it('rejects single-class input', () => {
    expect(() => trainBoostedTrees([[1], [2]], [1, 1], TOY_PARAMS)).toThrowError(TrainingError);
    expect(() => trainBoostedTrees([[1], [2]], [0, 0], TOY_PARAMS)).toThrowError(TrainingError);
  });

  it('is deterministic for identical inputs', () => {
    const { rows, labels } = separableRows();
    const a = trainBoostedTrees(rows, labels, TOY_PARAMS);
    const b = trainBoostedTrees(rows, labels, TOY_PARAMS);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });

  it('respects the declared maximum depth', () => {
    const rows: number[][] = [];
    const labels: number[] = [];
    for (let i = 0; i < 200; i++) {
      rows.push([i % 17, (i * 7) % 13]);
      labels.push((i % 3 === 0 ? 1 : 0) ^ (i % 11 === 0 ? 1 : 0));
    }
    const params = { ...TOY_PARAMS, maxDepth: 3, nTrees: 5 };
    const { trees } = trainBoostedTrees(rows, labels, params);
    for (const tree of trees) {
      expect(maxDepth(tree)).toBeLessThanOrEqual(3);
    }
  });

  it('keeps children after their parent (portable-format ordering)', () => {
    const { rows, labels } = separableRows();
    const { trees } = trainBoostedTrees(rows, labels, TOY_PARAMS);
    for (const tree of trees) {
      tree.feature.forEach((f, i) => {
        if (f >= 0) {
          expect(tree.left[i]).toBeGreaterThan(i);
          expect(tree.right[i]).toBeGreaterThan(i);
        }
      });
    }
  });
});

function maxDepth(tree: TreeNodes): number {
  const depth = (idx: number): number =>
    tree.feature[idx] < 0 ? 0 : 1 + Math.max(depth(tree.left[idx]), depth(tree.right[idx]));
  return depth(0);
}

describe('treeMargin', () => {
  it('goes left iff the feature value is at or below the threshold', () => {
    const stump: TreeNodes = {
      feature: [0, -1, -1],
      threshold: [1.0, 0, 0],
      left: [1, 0, 0],
      right: [2, 0, 0],
      value: [0, -2, 2],
    };
    expect(treeMargin(stump, [1.0])).toBe(-2);
    expect(treeMargin(stump, [1.0001])).toBe(2);
  });
});
