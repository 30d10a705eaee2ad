/**
 * Conversion from a pretrained VGG16 checkpoint to the VGGW archive.
 *
 * The 13 convolutional kernels arrive in the channels-last layout
 * [kH, kW, in, out] used by the source ecosystem and are transposed to
 * the archive layout [out, in, kH, kW]; biases pass through unchanged.
 * Values are copied bit-for-bit (float32 in, float32 out). Top (dense)
 * layers of the source are never converted.
 */

import * as fs from 'node:fs';
import { createHash } from 'node:crypto';

import { readCheckpoint, SourceCheckpoint, SourceWeight } from './checkpoint.js';
import { ArchiveEntry, encodeArchive, valueChecksum } from './vggw.js';

export const TOOL_VERSION = '0.1.0';

/** Convolution plan: five blocks of 2,2,3,3,3 layers, channel chain from RGB. */
export const CONV_PLAN: { block: number; conv: number; inCh: number; outCh: number }[] = [];
{
  const blocks: [number, number, number][] = [
    [1, 64, 2], [2, 128, 2], [3, 256, 3], [4, 512, 3], [5, 512, 3],
  ];
  let inCh = 3;
  for (const [block, filters, convs] of blocks) {
    for (let c = 1; c <= convs; c++) {
      CONV_PLAN.push({ block, conv: c, inCh, outCh: filters });
      inCh = filters;
    }
  }
}

export interface TensorRecord {
  source_name: string;
  target_name: string;
  source_shape: number[];
  target_shape: number[];
  transpose_applied: boolean;
  crc32: number;
}

export interface ProbeReport {
  layer: string;
  input_shape: number[];
  input_seed: number;
  max_rel_diff: number;
}

export interface ConversionManifest {
  tool_version: string;
  source: {
    locator: string;
    format: string;
    total_bytes: number;
    weights_sha256: string;
  };
  archive_path: string;
  records: TensorRecord[];
  probe: ProbeReport;
}

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** [kH, kW, in, out] -> [out, in, kH, kW], value-preserving. */
export function transposeKernel(values: Float32Array, shape: number[]): Float32Array {
  const [kh, kw, cin, cout] = shape;
  const out = new Float32Array(values.length);
  for (let y = 0; y < kh; y++) {
    for (let x = 0; x < kw; x++) {
      for (let i = 0; i < cin; i++) {
        for (let o = 0; o < cout; o++) {
          const src = ((y * kw + x) * cin + i) * cout + o;
          const dst = ((o * cin + i) * kh + y) * kw + x;
          out[dst] = values[src];
        }
      }
    }
  }
  return out;
}

function sourceWeight(checkpoint: SourceCheckpoint, name: string): SourceWeight {
  const weight = checkpoint.weights.get(name);
  if (!weight) {
    throw new Error(`source checkpoint is missing layer weight ${name}`);
  }
  return weight;
}

/** Deterministic PRNG so the probe input is identical across runs. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const PROBE_SEED = 0xc0ffee;
const PROBE_SIZE = 8;

/**
 * Cross-layout spot check on block1_conv1: convolve one deterministic
 * synthetic input channels-last with the source kernel, channels-first
 * with the converted kernel, and report the worst relative difference.
 */
export function crossLayoutProbe(
  sourceKernel: SourceWeight,
  bias: SourceWeight,
  converted: Float32Array,
): ProbeReport {
  const [kh, kw, cin, cout] = sourceKernel.shape;
  const size = PROBE_SIZE;
  const rand = mulberry32(PROBE_SEED);
  const input = new Float32Array(size * size * cin); // [H, W, C] channels-last
  for (let i = 0; i < input.length; i++) input[i] = rand() * 2 - 1;

  const pad = 1;
  const sourceOut = new Float64Array(size * size * cout);
  // Source-ecosystem evaluation: channels-last input, [kH,kW,in,out] kernel.
  for (let oy = 0; oy < size; oy++) {
    for (let ox = 0; ox < size; ox++) {
      for (let o = 0; o < cout; o++) {
        let acc = bias.values[o];
        for (let y = 0; y < kh; y++) {
          for (let x = 0; x < kw; x++) {
            const iy = oy + y - pad;
            const ix = ox + x - pad;
            if (iy < 0 || iy >= size || ix < 0 || ix >= size) continue;
            for (let i = 0; i < cin; i++) {
              acc += input[(iy * size + ix) * cin + i]
                * sourceKernel.values[((y * kw + x) * cin + i) * cout + o];
            }
          }
        }
        sourceOut[(oy * size + ox) * cout + o] = acc;
      }
    }
  }

  // Target evaluation: channels-first input, [out,in,kH,kW] kernel.
  const inputCF = new Float64Array(cin * size * size);
  for (let i = 0; i < cin; i++) {
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        inputCF[(i * size + y) * size + x] = input[(y * size + x) * cin + i];
      }
    }
  }
  let maxRel = 0;
  for (let o = 0; o < cout; o++) {
    for (let oy = 0; oy < size; oy++) {
      for (let ox = 0; ox < size; ox++) {
        let acc = bias.values[o];
        for (let i = 0; i < cin; i++) {
          for (let y = 0; y < kh; y++) {
            for (let x = 0; x < kw; x++) {
              const iy = oy + y - pad;
              const ix = ox + x - pad;
              if (iy < 0 || iy >= size || ix < 0 || ix >= size) continue;
              acc += inputCF[(i * size + iy) * size + ix]
                * converted[((o * cin + i) * kh + y) * kw + x];
            }
          }
        }
        const reference = sourceOut[(oy * size + ox) * cout + o];
        const rel = Math.abs(acc - reference) / Math.max(Math.abs(reference), 1e-12);
        if (rel > maxRel) maxRel = rel;
      }
    }
  }
  return {
    layer: 'block1_conv1',
    input_shape: [1, cin, size, size],
    input_seed: PROBE_SEED,
    max_rel_diff: maxRel,
  };
}

export interface ConversionResult {
  archive: Buffer;
  manifest: ConversionManifest;
}

export function convertCheckpoint(modelJsonPath: string, archivePath: string): ConversionResult {
  const checkpoint = readCheckpoint(modelJsonPath);
  const entries: ArchiveEntry[] = [];
  const records: TensorRecord[] = [];
  const hash = createHash('sha256');

  let firstConverted: Float32Array | null = null;
  for (const { block, conv, inCh, outCh } of CONV_PLAN) {
    const layer = `block${block}_conv${conv}`;
    const kernel = sourceWeight(checkpoint, `${layer}/kernel`);
    const bias = sourceWeight(checkpoint, `${layer}/bias`);

    const expectedKernel = [3, 3, inCh, outCh];
    if (!shapesEqual(kernel.shape, expectedKernel)) {
      throw new Error(
        `${layer}/kernel has shape [${kernel.shape}], expected [${expectedKernel}]; refusing to guess the layout`,
      );
    }
    if (!shapesEqual(bias.shape, [outCh])) {
      throw new Error(`${layer}/bias has shape [${bias.shape}], expected [${outCh}]`);
    }

    const transposed = transposeKernel(kernel.values, kernel.shape);
    if (firstConverted === null) firstConverted = transposed;
    const targetShape = [outCh, inCh, 3, 3];
    entries.push({ name: `${layer}.weight`, shape: targetShape, values: transposed });
    entries.push({ name: `${layer}.bias`, shape: [outCh], values: bias.values });
    records.push({
      source_name: `${layer}/kernel`,
      target_name: `${layer}.weight`,
      source_shape: kernel.shape,
      target_shape: targetShape,
      transpose_applied: true,
      crc32: valueChecksum(transposed),
    });
    records.push({
      source_name: `${layer}/bias`,
      target_name: `${layer}.bias`,
      source_shape: bias.shape,
      target_shape: [outCh],
      transpose_applied: false,
      crc32: valueChecksum(bias.values),
    });
    hash.update(Buffer.from(kernel.values.buffer, kernel.values.byteOffset, kernel.values.byteLength));
    hash.update(Buffer.from(bias.values.buffer, bias.values.byteOffset, bias.values.byteLength));
  }

  const block1Kernel = sourceWeight(checkpoint, 'block1_conv1/kernel');
  const block1Bias = sourceWeight(checkpoint, 'block1_conv1/bias');
  const probe = crossLayoutProbe(block1Kernel, block1Bias, firstConverted as Float32Array);

  const manifest: ConversionManifest = {
    tool_version: TOOL_VERSION,
    source: {
      locator: checkpoint.locator,
      format: checkpoint.format,
      total_bytes: checkpoint.totalBytes,
      weights_sha256: hash.digest('hex'),
    },
    archive_path: archivePath,
    records,
    probe,
  };
  return { archive: encodeArchive(entries), manifest };
}

export function runConvert(modelJsonPath: string, archivePath: string,
                           manifestPath: string): ConversionManifest {
  const { archive, manifest } = convertCheckpoint(modelJsonPath, archivePath);
  fs.writeFileSync(archivePath, archive);
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
  return manifest;
}
