import { TrainingError, TreeNodes } from './types.js';

export interface BoostParams {
  nTrees: number;
  maxDepth: number;
  learningRate: number;
  lambda: number;
  minChildSamples: number;
  seed: number;
}

export const DEFAULT_PARAMS: BoostParams = {
  nTrees: 100,
  maxDepth: 6,
  learningRate: 0.1,
  lambda: 1.0,
  minChildSamples: 20,
  seed: 7,
};

export interface BoostedModel {
  trees: TreeNodes[];
  bias: number;
}

const MIN_GAIN = 1e-12;

export function sigmoid(margin: number): number {
  if (margin >= 0) {
    return 1 / (1 + Math.exp(-margin));
  }
  const e = Math.exp(margin);
  return e / (1 + e);
}

/** Binary logistic gradient boosting with Newton leaf weights and exact
 * greedy splits. One-hot columns take an O(n) two-bucket path; the two
 * numeric columns use presorted sweeps. Level-wise growth keeps node
 * arrays in parent-before-children order, which the portable format
 * requires. Fully deterministic for fixed inputs. */
export function trainBoostedTrees(
  rows: number[][],
  labels: ArrayLike<number>,
  params: BoostParams = DEFAULT_PARAMS,
): BoostedModel {
  const n = rows.length;
  if (n === 0) {
    throw new TrainingError('no training rows');
  }
  const d = rows[0].length;
  let positives = 0;
  for (let i = 0; i < n; i++) {
    positives += labels[i];
  }
  if (positives === 0 || positives === n) {
    throw new TrainingError('training data contains a single class');
  }

  const columns: Float64Array[] = [];
  for (let f = 0; f < d; f++) {
    const col = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      col[i] = rows[i][f];
    }
    columns.push(col);
  }
  const isBinary = columns.map((col) => {
    for (let i = 0; i < col.length; i++) {
      if (col[i] !== 0 && col[i] !== 1) {
        return false;
      }
    }
    return true;
  });
  const sortedIdx: Int32Array[] = columns.map((col, f) => {
    if (isBinary[f]) {
      return new Int32Array(0);
    }
    const idx = Array.from({ length: n }, (_, i) => i);
    idx.sort((a, b) => col[a] - col[b] || a - b);
    return Int32Array.from(idx);
  });

  const p0 = Math.min(Math.max(positives / n, 1e-12), 1 - 1e-12);
  const bias = Math.log(p0 / (1 - p0));
  const margin = new Float64Array(n).fill(bias);
  const grad = new Float64Array(n);
  const hess = new Float64Array(n);

  const trees: TreeNodes[] = [];
  for (let t = 0; t < params.nTrees; t++) {
    for (let i = 0; i < n; i++) {
      const p = sigmoid(margin[i]);
      grad[i] = labels[i] - p;
      hess[i] = p * (1 - p);
    }
    const tree = growTree(columns, isBinary, sortedIdx, grad, hess, margin, params);
    trees.push(tree);
  }
  return { trees, bias };
}

function growTree(
  columns: Float64Array[],
  isBinary: boolean[],
  sortedIdx: Int32Array[],
  grad: Float64Array,
  hess: Float64Array,
  margin: Float64Array,
  params: BoostParams,
): TreeNodes {
  const n = grad.length;
  const lambda = params.lambda;
  const minChild = params.minChildSamples;

  const feature: number[] = [-1];
  const threshold: number[] = [0];
  const left: number[] = [0];
  const right: number[] = [0];
  const value: number[] = [0];
  const nodeG: number[] = [0];
  const nodeH: number[] = [0];
  const nodeC: number[] = [0];

  const nodeOf = new Int32Array(n);
  for (let i = 0; i < n; i++) {
    nodeG[0] += grad[i];
    nodeH[0] += hess[i];
  }
  nodeC[0] = n;

  const leafValue = (g: number, h: number) => (params.learningRate * g) / (h + lambda);
  const gainTerm = (g: number, h: number) => (g * g) / (h + lambda);

  let active = [0];
  for (let depth = 0; depth < params.maxDepth && active.length > 0; depth++) {
    const bestGain = new Map<number, number>();
    const bestFeat = new Map<number, number>();
    const bestThr = new Map<number, number>();
    const activeSet = new Set(active);

    const consider = (node: number, feat: number, thr: number, gl: number, hl: number, cl: number) => {
      const cr = nodeC[node] - cl;
      if (cl < minChild || cr < minChild) {
        return;
      }
      const gr = nodeG[node] - gl;
      const hr = nodeH[node] - hl;
      const gain = gainTerm(gl, hl) + gainTerm(gr, hr) - gainTerm(nodeG[node], nodeH[node]);
      if (gain > (bestGain.get(node) ?? MIN_GAIN)) {
        bestGain.set(node, gain);
        bestFeat.set(node, feat);
        bestThr.set(node, thr);
      }
    };

    for (let f = 0; f < columns.length; f++) {
      const col = columns[f];
      if (isBinary[f]) {
        // x <= 0.5 goes left; accumulate the ones bucket per node
        const oneG = new Map<number, number>();
        const oneH = new Map<number, number>();
        const oneC = new Map<number, number>();
        for (let i = 0; i < n; i++) {
          const node = nodeOf[i];
          if (col[i] === 1 && activeSet.has(node)) {
            oneG.set(node, (oneG.get(node) ?? 0) + grad[i]);
            oneH.set(node, (oneH.get(node) ?? 0) + hess[i]);
            oneC.set(node, (oneC.get(node) ?? 0) + 1);
          }
        }
        for (const node of active) {
          const cl = nodeC[node] - (oneC.get(node) ?? 0);
          consider(node, f, 0.5, nodeG[node] - (oneG.get(node) ?? 0), nodeH[node] - (oneH.get(node) ?? 0), cl);
        }
      } else {
        const runG = new Map<number, number>();
        const runH = new Map<number, number>();
        const runC = new Map<number, number>();
        const lastVal = new Map<number, number>();
        const order = sortedIdx[f];
        for (let k = 0; k < order.length; k++) {
          const i = order[k];
          const node = nodeOf[i];
          if (!activeSet.has(node)) {
            continue;
          }
          const v = col[i];
          const c = runC.get(node) ?? 0;
          if (c > 0 && v > (lastVal.get(node) as number)) {
            consider(node, f, ((lastVal.get(node) as number) + v) / 2, runG.get(node)!, runH.get(node)!, c);
          }
          runG.set(node, (runG.get(node) ?? 0) + grad[i]);
          runH.set(node, (runH.get(node) ?? 0) + hess[i]);
          runC.set(node, c + 1);
          lastVal.set(node, v);
        }
      }
    }

    const children: number[] = [];
    const splitNodes = new Set<number>();
    for (const node of active) {
      if (bestFeat.has(node)) {
        feature[node] = bestFeat.get(node)!;
        threshold[node] = bestThr.get(node)!;
        for (const side of ['left', 'right'] as const) {
          const child = feature.length;
          feature.push(-1);
          threshold.push(0);
          left.push(0);
          right.push(0);
          value.push(0);
          nodeG.push(0);
          nodeH.push(0);
          nodeC.push(0);
          if (side === 'left') {
            left[node] = child;
          } else {
            right[node] = child;
          }
          children.push(child);
        }
        splitNodes.add(node);
      } else {
        value[node] = leafValue(nodeG[node], nodeH[node]);
      }
    }

    if (splitNodes.size > 0) {
      for (let i = 0; i < n; i++) {
        const node = nodeOf[i];
        if (!splitNodes.has(node)) {
          continue;
        }
        const child = columns[feature[node]][i] <= threshold[node] ? left[node] : right[node];
        nodeOf[i] = child;
        nodeG[child] += grad[i];
        nodeH[child] += hess[i];
        nodeC[child] += 1;
      }
    }
    active = children;
  }
  for (const node of active) {
    value[node] = leafValue(nodeG[node], nodeH[node]);
  }

  for (let i = 0; i < n; i++) {
    margin[i] += value[nodeOf[i]];
  }
  return { feature, threshold, left, right, value };
}

export function treeMargin(tree: TreeNodes, vector: ArrayLike<number>): number {
  let idx = 0;
  while (tree.feature[idx] >= 0) {
    idx = vector[tree.feature[idx]] <= tree.threshold[idx] ? tree.left[idx] : tree.right[idx];
  }
  return tree.value[idx];
}
