export interface PacketFeatures {
  protocol_type: string;
  service: string;
  flag: string;
  src_bytes: number;
  dst_bytes: number;
}

export interface DatasetRecord {
  features: PacketFeatures;
  label: 0 | 1;
}

export interface Vocabularies {
  protocol_type: string[];
  service: string[];
  flag: string[];
}

/** Parallel node arrays of one tree; node 0 is the root, children follow
 * their parent, feature -1 marks a leaf. */
export interface TreeNodes {
  feature: number[];
  threshold: number[];
  left: number[];
  right: number[];
  value: number[];
}

export interface PortableModel {
  format: string;
  version: number;
  metadata: {
    dataset: string;
    training_hash: string;
    numeric_transform: 'log1p' | 'identity';
  };
  vocabularies: Vocabularies;
  numeric_features: string[];
  schema: string[];
  bias: number;
  decision_threshold: number;
  max_depth: number;
  trees: TreeNodes[];
}

export interface Fixture {
  features: PacketFeatures;
  vector: number[];
  probability: number;
  label: 0 | 1;
}

export class SchemaError extends Error {}
export class TrainingError extends Error {}
