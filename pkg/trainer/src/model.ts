import { readFileSync } from 'node:fs';

import { BoostedModel, BoostParams, sigmoid, treeMargin } from './boost.js';
import { buildSchema, NUMERIC_FEATURES } from './encode.js';
import { PortableModel, SchemaError, Vocabularies } from './types.js';

export const MODEL_FORMAT = 'sliceguard-tree-ensemble';

/** FNV-1a over the reproducibility-relevant inputs. */
export function trainingHash(params: BoostParams, datasetName: string, nRows: number): string {
  const text = JSON.stringify({ params, datasetName, nRows });
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash.toString(16).padStart(8, '0');
}

export function exportModel(
  boosted: BoostedModel,
  vocab: Vocabularies,
  params: BoostParams,
  datasetName: string,
  nRows: number,
): PortableModel {
  return {
    format: MODEL_FORMAT,
    version: 1,
    metadata: {
      dataset: datasetName,
      training_hash: trainingHash(params, datasetName, nRows),
      numeric_transform: 'log1p',
    },
    vocabularies: vocab,
    numeric_features: [...NUMERIC_FEATURES],
    schema: buildSchema(vocab),
    bias: boosted.bias,
    decision_threshold: 0.5,
    max_depth: params.maxDepth,
    trees: boosted.trees,
  };
}

export function validateModel(doc: PortableModel): void {
  if (doc.format !== MODEL_FORMAT) {
    throw new SchemaError(`unexpected model format ${doc.format}`);
  }
  const schema = buildSchema(doc.vocabularies);
  if (JSON.stringify(schema) !== JSON.stringify(doc.schema)) {
    throw new SchemaError('declared schema does not match vocabularies');
  }
  doc.trees.forEach((tree, t) => {
    const len = tree.feature.length;
    for (const key of ['threshold', 'left', 'right', 'value'] as const) {
      if (tree[key].length !== len) {
        throw new SchemaError(`tree ${t}: ragged node arrays`);
      }
    }
    for (let i = 0; i < len; i++) {
      if (tree.feature[i] >= schema.length) {
        throw new SchemaError(`tree ${t} node ${i}: feature index out of schema`);
      }
      if (!Number.isFinite(tree.value[i])) {
        throw new SchemaError(`tree ${t} node ${i}: non-finite value`);
      }
    }
  });
}

export function loadModel(path: string): PortableModel {
  const doc = JSON.parse(readFileSync(path, 'utf-8')) as PortableModel;
  validateModel(doc);
  return doc;
}

export function predictMargin(model: PortableModel, vector: ArrayLike<number>): number {
  let total = model.bias;
  for (const tree of model.trees) {
    total += treeMargin(tree, vector);
  }
  return total;
}

export function predictProba(model: PortableModel, vector: ArrayLike<number>): number {
  return sigmoid(predictMargin(model, vector));
}

export function predictLabel(model: PortableModel, vector: ArrayLike<number>): 0 | 1 {
  return predictProba(model, vector) >= model.decision_threshold ? 1 : 0;
}
