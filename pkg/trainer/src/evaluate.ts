import { performance } from 'node:perf_hooks';

import { PortableModel } from './types.js';
import { predictProba } from './model.js';

export interface RocPoint {
  threshold: number;
  fpr: number;
  tpr: number;
}

export function accuracy(labels: ArrayLike<number>, probs: ArrayLike<number>, threshold = 0.5): number {
  let correct = 0;
  for (let i = 0; i < labels.length; i++) {
    const predicted = probs[i] >= threshold ? 1 : 0;
    if (predicted === labels[i]) {
      correct++;
    }
  }
  return correct / labels.length;
}

/** ROC sweep from the strictest threshold down; points are nondecreasing
 * in both axes by construction. */
export function rocPoints(labels: ArrayLike<number>, probs: ArrayLike<number>): RocPoint[] {
  const order = Array.from({ length: labels.length }, (_, i) => i).sort(
    (a, b) => probs[b] - probs[a] || a - b,
  );
  let positives = 0;
  for (let i = 0; i < labels.length; i++) {
    positives += labels[i];
  }
  const negatives = labels.length - positives;
  const points: RocPoint[] = [{ threshold: Infinity, fpr: 0, tpr: 0 }];
  let tp = 0;
  let fp = 0;
  for (let k = 0; k < order.length; k++) {
    const i = order[k];
    if (labels[i] === 1) {
      tp++;
    } else {
      fp++;
    }
    const isBoundary = k === order.length - 1 || probs[order[k + 1]] !== probs[i];
    if (isBoundary) {
      points.push({
        threshold: probs[i],
        fpr: negatives === 0 ? 0 : fp / negatives,
        tpr: positives === 0 ? 0 : tp / positives,
      });
    }
  }
  return points;
}

export function rocAuc(points: RocPoint[]): number {
  let area = 0;
  for (let i = 1; i < points.length; i++) {
    area += ((points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr)) / 2;
  }
  return area;
}

export function inferenceLatencyMs(model: PortableModel, vectors: number[][]): number {
  if (vectors.length === 0) {
    return 0;
  }
  const started = performance.now();
  for (const vector of vectors) {
    predictProba(model, vector);
  }
  return (performance.now() - started) / vectors.length;
}
