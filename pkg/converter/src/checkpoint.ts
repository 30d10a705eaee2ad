/**
 * Reader for checkpoints in the tfjs layers-model format: a model.json
 * whose weightsManifest lists binary shard files and the name, shape,
 * and dtype of each weight stored in them, concatenated in order.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export interface SourceWeight {
  name: string;
  shape: number[];
  values: Float32Array;
}

export interface SourceCheckpoint {
  locator: string;
  format: string;
  weights: Map<string, SourceWeight>;
  totalBytes: number;
}

interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

interface ManifestGroup {
  paths: string[];
  weights: WeightSpec[];
}

export function readCheckpoint(modelJsonPath: string): SourceCheckpoint {
  const raw = fs.readFileSync(modelJsonPath, 'utf-8');
  let parsed: { format?: string; weightsManifest?: ManifestGroup[] };
  try {
    parsed = JSON.parse(raw);
  } catch (err) {
    throw new Error(`source checkpoint ${modelJsonPath} is not valid JSON: ${err}`);
  }
  const groups = parsed.weightsManifest;
  if (!Array.isArray(groups) || groups.length === 0) {
    throw new Error(`source checkpoint ${modelJsonPath} has no weightsManifest`);
  }

  const dir = path.dirname(modelJsonPath);
  const weights = new Map<string, SourceWeight>();
  let totalBytes = 0;
  for (const group of groups) {
    const shardBytes = group.paths.map((p) => fs.readFileSync(path.join(dir, p)));
    const blob = Buffer.concat(shardBytes);
    totalBytes += blob.length;
    let offset = 0;
    for (const spec of group.weights) {
      if (spec.dtype !== 'float32') {
        throw new Error(`weight ${spec.name} has dtype ${spec.dtype}; only float32 is supported`);
      }
      const size = spec.shape.reduce((a, b) => a * b, 1);
      const byteLength = 4 * size;
      if (offset + byteLength > blob.length) {
        throw new Error(`weight ${spec.name} overruns the shard data`);
      }
      const values = new Float32Array(size);
      for (let i = 0; i < size; i++) {
        values[i] = blob.readFloatLE(offset + 4 * i);
      }
      offset += byteLength;
      weights.set(spec.name, { name: spec.name, shape: spec.shape.slice(), values });
    }
    if (offset !== blob.length) {
      throw new Error(
        `shard group [${group.paths}] has ${blob.length - offset} undeclared trailing bytes`,
      );
    }
  }
  return {
    locator: modelJsonPath,
    format: parsed.format ?? 'layers-model',
    weights,
    totalBytes,
  };
}
