import { DatasetRecord, PacketFeatures, SchemaError, Vocabularies } from './types.js';

export type DatasetName = 'kdd' | 'unsw';

export interface IngestResult {
  records: DatasetRecord[];
  vocabularies: Vocabularies;
}

/** Transport protocols the five-feature schema distinguishes; anything
 * else (arp, ospf, ...) collapses to "other". */
const KNOWN_PROTOCOLS = new Set(['tcp', 'udp', 'icmp']);

// KDDCup'99 positional layout (no header): 41 features + trailing label.
const KDD_FIELDS = 42;
const KDD_POSITIONS: Record<string, number> = {
  protocol_type: 1,
  service: 2,
  flag: 3,
  src_bytes: 4,
  dst_bytes: 5,
};

const UNSW_REQUIRED = ['proto', 'service', 'state', 'sbytes', 'dbytes', 'label'];

function normalizeProtocol(raw: string): string {
  const proto = raw.trim().toLowerCase();
  return KNOWN_PROTOCOLS.has(proto) ? proto : 'other';
}

function parseBytes(raw: string, column: string, line: number): number {
  const value = Number(raw);
  if (!Number.isFinite(value) || value < 0) {
    throw new SchemaError(`line ${line}: column ${column} is not a nonnegative number: ${raw}`);
  }
  return Math.trunc(value);
}

function ingestKdd(lines: string[]): DatasetRecord[] {
  const records: DatasetRecord[] = [];
  lines.forEach((line, i) => {
    const fields = line.split(',');
    if (fields.length < KDD_FIELDS) {
      const missing = Object.entries(KDD_POSITIONS).find(([, pos]) => pos >= fields.length);
      const name = missing ? missing[0] : 'label';
      throw new SchemaError(`line ${i + 1}: missing required column ${name} (${fields.length} fields, need ${KDD_FIELDS})`);
    }
    const label = fields[fields.length - 1].trim().replace(/\.$/, '');
    const features: PacketFeatures = {
      protocol_type: normalizeProtocol(fields[KDD_POSITIONS.protocol_type]),
      service: fields[KDD_POSITIONS.service].trim(),
      flag: fields[KDD_POSITIONS.flag].trim(),
      src_bytes: parseBytes(fields[KDD_POSITIONS.src_bytes], 'src_bytes', i + 1),
      dst_bytes: parseBytes(fields[KDD_POSITIONS.dst_bytes], 'dst_bytes', i + 1),
    };
    records.push({ features, label: label === 'normal' ? 0 : 1 });
  });
  return records;
}

function ingestUnsw(lines: string[]): DatasetRecord[] {
  const header = lines[0].split(',').map((h) => h.trim().toLowerCase());
  const index: Record<string, number> = {};
  for (const column of UNSW_REQUIRED) {
    const pos = header.indexOf(column);
    if (pos < 0) {
      throw new SchemaError(`missing required column ${column}`);
    }
    index[column] = pos;
  }
  const records: DatasetRecord[] = [];
  lines.slice(1).forEach((line, i) => {
    const fields = line.split(',');
    if (fields.length < header.length) {
      throw new SchemaError(`line ${i + 2}: expected ${header.length} fields, got ${fields.length}`);
    }
    const features: PacketFeatures = {
      protocol_type: normalizeProtocol(fields[index.proto]),
      service: fields[index.service].trim(),
      flag: fields[index.state].trim(),
      src_bytes: parseBytes(fields[index.sbytes], 'sbytes', i + 2),
      dst_bytes: parseBytes(fields[index.dbytes], 'dbytes', i + 2),
    };
    records.push({ features, label: fields[index.label].trim() === '0' ? 0 : 1 });
  });
  return records;
}

export function buildVocabularies(records: DatasetRecord[]): Vocabularies {
  const collect = (key: 'protocol_type' | 'service' | 'flag') =>
    [...new Set(records.map((r) => r.features[key]))].sort();
  return {
    protocol_type: collect('protocol_type'),
    service: collect('service'),
    flag: collect('flag'),
  };
}

export function ingest(dataset: DatasetName, text: string): IngestResult {
  const lines = text.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    return { records: [], vocabularies: { protocol_type: [], service: [], flag: [] } };
  }
  const records = dataset === 'kdd' ? ingestKdd(lines) : ingestUnsw(lines);
  return { records, vocabularies: buildVocabularies(records) };
}
