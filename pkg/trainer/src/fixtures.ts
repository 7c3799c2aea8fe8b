import { encodeFeatures } from './encode.js';
import { predictProba } from './model.js';
import { DatasetRecord, Fixture, PortableModel } from './types.js';

/** Cross-language scoring fixtures: raw features, this pipeline's encoded
 * vector, and its predicted probability. Another engine loading the
 * exported model must reproduce each probability within 1e-6. */
export function exportFixtures(model: PortableModel, records: DatasetRecord[], n = 50): Fixture[] {
  return records.slice(0, n).map((record) => {
    const vector = encodeFeatures(record.features, model.vocabularies);
    return {
      features: record.features,
      vector,
      probability: predictProba(model, vector),
      label: record.label,
    };
  });
}
