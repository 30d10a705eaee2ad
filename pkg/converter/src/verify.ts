/**
 * Verification of a converted archive against its conversion manifest:
 * re-reads the archive, recomputes every per-tensor checksum, and
 * reports the first mismatch (or a pass).
 */

import * as fs from 'node:fs';

import { ConversionManifest } from './convert.js';
import { decodeArchive, valueChecksum } from './vggw.js';

export interface VerifyReport {
  ok: boolean;
  checked: number;
  detail: string;
}

export function verifyArchive(archivePath: string, manifestPath: string): VerifyReport {
  const manifest: ConversionManifest = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));

  let entries;
  try {
    entries = decodeArchive(fs.readFileSync(archivePath));
  } catch (err) {
    return { ok: false, checked: 0, detail: `archive failed to load: ${(err as Error).message}` };
  }

  const byName = new Map(entries.map((e) => [e.name, e]));
  if (entries.length !== manifest.records.length) {
    return {
      ok: false,
      checked: 0,
      detail: `archive has ${entries.length} entries, manifest records ${manifest.records.length}`,
    };
  }
  let checked = 0;
  for (const record of manifest.records) {
    const entry = byName.get(record.target_name);
    if (!entry) {
      return { ok: false, checked, detail: `archive is missing tensor ${record.target_name}` };
    }
    if (entry.shape.join('x') !== record.target_shape.join('x')) {
      return {
        ok: false,
        checked,
        detail: `tensor ${record.target_name}: shape [${entry.shape}] != manifest [${record.target_shape}]`,
      };
    }
    const crc = valueChecksum(entry.values);
    if (crc !== record.crc32) {
      return {
        ok: false,
        checked,
        detail: `tensor ${record.target_name}: checksum ${crc} != manifest ${record.crc32}`,
      };
    }
    checked += 1;
  }
  if (manifest.probe.max_rel_diff > 1e-5) {
    return {
      ok: false,
      checked,
      detail: `cross-layout probe disagrees: max relative diff ${manifest.probe.max_rel_diff}`,
    };
  }
  return { ok: true, checked, detail: `all ${checked} tensors match the manifest` };
}
