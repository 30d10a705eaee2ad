/** Synthetic source checkpoints with the real VGG16 conv geometry. */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { CONV_PLAN, mulberry32 } from '../src/convert.js';

export interface WeightSpec {
  name: string;
  shape: number[];
  dtype: 'float32';
}

/**
 * Write a checkpoint in the tfjs layers-model layout: model.json plus two
 * binary shards holding seeded random float32 kernels/biases for all 13
 * convolutions ([kH, kW, in, out] channels-last, as published checkpoints
 * store them).
 */
export function writeSyntheticCheckpoint(dir: string, seed = 1): string {
  fs.mkdirSync(dir, { recursive: true });
  const rand = mulberry32(seed);

  const specs: WeightSpec[] = [];
  const buffers: Buffer[] = [];
  for (const { block, conv, inCh, outCh } of CONV_PLAN) {
    const kernel = new Float32Array(3 * 3 * inCh * outCh);
    for (let i = 0; i < kernel.length; i++) kernel[i] = (rand() * 2 - 1) * 0.1;
    const bias = new Float32Array(outCh);
    for (let i = 0; i < bias.length; i++) bias[i] = (rand() * 2 - 1) * 0.05;
    specs.push({ name: `block${block}_conv${conv}/kernel`, shape: [3, 3, inCh, outCh], dtype: 'float32' });
    buffers.push(Buffer.from(kernel.buffer));
    specs.push({ name: `block${block}_conv${conv}/bias`, shape: [outCh], dtype: 'float32' });
    buffers.push(Buffer.from(bias.buffer));
  }

  // Split across two shards to exercise shard stitching.
  const blob = Buffer.concat(buffers);
  const cut = Math.floor(blob.length / 2);
  fs.writeFileSync(path.join(dir, 'group1-shard1of2.bin'), blob.subarray(0, cut));
  fs.writeFileSync(path.join(dir, 'group1-shard2of2.bin'), blob.subarray(cut));

  const modelJson = {
    format: 'layers-model',
    generatedBy: 'synthetic-test-fixture',
    weightsManifest: [
      {
        paths: ['group1-shard1of2.bin', 'group1-shard2of2.bin'],
        weights: specs,
      },
    ],
  };
  const modelPath = path.join(dir, 'model.json');
  fs.writeFileSync(modelPath, JSON.stringify(modelJson));
  return modelPath;
}
