/**
 * Interop: a converted archive must load through the training engine's
 * own archive reader and pretrained-import path with zero shape errors.
 */

import { spawnSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

import { beforeAll, describe, expect, it } from 'vitest';

import { runConvert } from '../src/convert.js';
import { writeSyntheticCheckpoint } from './helpers.js';

const here = path.dirname(fileURLToPath(import.meta.url));
const ENGINE_SRC = path.resolve(here, '..', '..', 'src');

const IMPORT_SCRIPT = `
import sys
from damagenet.model import build_vgg16_damage
from damagenet.weights_io import import_pretrained, load_archive

entries = load_archive(sys.argv[1])
net = build_vgg16_damage(init_seed=0, input_size=64)
report = import_pretrained(net, entries)
print(f"imported {len(report)} tensors")
`;

let archivePath: string;
let manifestPath: string;

beforeAll(() => {
  const workdir = fs.mkdtempSync(path.join(os.tmpdir(), 'vggw-interop-'));
  const modelPath = writeSyntheticCheckpoint(path.join(workdir, 'source'), 7);
  archivePath = path.join(workdir, 'pretrained.vggw');
  manifestPath = path.join(workdir, 'pretrained.manifest.json');
  runConvert(modelPath, archivePath, manifestPath);
});

describe('engine interop', () => {
  it('imports through load_archive + import_pretrained with zero shape errors', () => {
    const result = spawnSync('python3', ['-c', IMPORT_SCRIPT, archivePath], {
      encoding: 'utf-8',
      env: { ...process.env, PYTHONPATH: ENGINE_SRC },
      timeout: 120_000,
    });
    expect(result.error).toBeUndefined();
    expect(result.status, result.stderr).toBe(0);
    expect(result.stdout).toContain('imported 26 tensors');
  });

  it('engine rejects the archive when one tensor is missing', () => {
    // Sanity-check that the interop test would actually catch problems.
    const script = `
import sys
from damagenet.errors import ArchiveError
from damagenet.model import build_vgg16_damage
from damagenet.weights_io import import_pretrained, load_archive

entries = [e for e in load_archive(sys.argv[1]) if e.name != "block2_conv1.weight"]
net = build_vgg16_damage(init_seed=0, input_size=64)
try:
    import_pretrained(net, entries)
except ArchiveError as exc:
    print(f"rejected: {exc}")
`;
    const result = spawnSync('python3', ['-c', script, archivePath], {
      encoding: 'utf-8',
      env: { ...process.env, PYTHONPATH: ENGINE_SRC },
      timeout: 120_000,
    });
    expect(result.status, result.stderr).toBe(0);
    expect(result.stdout).toContain('rejected: ');
    expect(result.stdout).toContain('block2_conv1.weight');
  });
});
