import { PacketFeatures, Vocabularies } from './types.js';

export const NUMERIC_FEATURES = ['src_bytes', 'dst_bytes'] as const;
const CATEGORICAL_FIELDS = ['protocol_type', 'service', 'flag'] as const;

export function buildSchema(vocab: Vocabularies): string[] {
  const schema: string[] = [];
  for (const field of CATEGORICAL_FIELDS) {
    for (const value of vocab[field]) {
      schema.push(`${field}=${value}`);
    }
  }
  schema.push(...NUMERIC_FEATURES);
  return schema;
}

/** One-hot against the closed vocabularies (unknown value -> zero group)
 * followed by log1p-transformed byte counts. */
export function encodeFeatures(features: PacketFeatures, vocab: Vocabularies): number[] {
  const vector: number[] = [];
  for (const field of CATEGORICAL_FIELDS) {
    const values = vocab[field];
    const group = new Array<number>(values.length).fill(0);
    const pos = values.indexOf(features[field]);
    if (pos >= 0) {
      group[pos] = 1;
    }
    vector.push(...group);
  }
  vector.push(Math.log1p(features.src_bytes));
  vector.push(Math.log1p(features.dst_bytes));
  return vector;
}
