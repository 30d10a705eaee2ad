#!/usr/bin/env node
/**
 * vggw-convert: convert and verify pretrained VGG16 weight archives.
 *
 *   convert --source <model.json> --out <archive.vggw> --manifest <manifest.json>
 *   verify  --archive <archive.vggw> --manifest <manifest.json>
 *
 * Exit codes: 0 success/pass, 1 usage error, 2 conversion or verify failure.
 */

import { runConvert } from './convert.js';
import { verifyArchive } from './verify.js';

function parseFlags(args: string[], required: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < args.length; i += 2) {
    const key = args[i];
    const value = args[i + 1];
    if (!key.startsWith('--') || value === undefined) {
      throw new UsageError(`malformed arguments near ${key ?? '<end>'}`);
    }
    flags.set(key.slice(2), value);
  }
  for (const name of required) {
    if (!flags.has(name)) throw new UsageError(`missing required flag --${name}`);
  }
  return flags;
}

class UsageError extends Error {}

const USAGE = `usage:
  vggw-convert convert --source <model.json> --out <archive.vggw> --manifest <manifest.json>
  vggw-convert verify --archive <archive.vggw> --manifest <manifest.json>`;

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === 'convert') {
      const flags = parseFlags(rest, ['source', 'out', 'manifest']);
      const manifest = runConvert(flags.get('source')!, flags.get('out')!, flags.get('manifest')!);
      console.log(
        `converted ${manifest.records.length} tensors from ${manifest.source.locator}`,
      );
      console.log(
        `probe max relative diff ${manifest.probe.max_rel_diff.toExponential(3)}; ` +
        `archive ${manifest.archive_path}`,
      );
      return 0;
    }
    if (command === 'verify') {
      const flags = parseFlags(rest, ['archive', 'manifest']);
      const report = verifyArchive(flags.get('archive')!, flags.get('manifest')!);
      console.log(`${report.ok ? 'PASS' : 'FAIL'}: ${report.detail}`);
      return report.ok ? 0 : 2;
    }
    throw new UsageError(`unknown command ${command ?? '<none>'}`);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}\n${USAGE}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
