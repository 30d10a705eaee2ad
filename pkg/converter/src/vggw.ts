/**
 * Reader/writer for the VGGW binary weight archive.
 *
 * Layout (all integers and floats little-endian):
 *   magic "VGGW" (4 bytes) | version u32 = 1 | entry count u32 |
 *   per entry: name length u16, UTF-8 name, rank u8, rank x u32 extents,
 *              product(extents) x f32 values |
 *   trailer: u32 CRC32 of every preceding byte.
 *
 * Serialization is deterministic: identical entries give identical bytes.
 */

import { crc32 } from 'node:zlib';

export const MAGIC = 'VGGW';
export const VERSION = 1;

export interface ArchiveEntry {
  name: string;
  shape: number[];
  values: Float32Array;
}

function product(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function encodeArchive(entries: ArchiveEntry[]): Buffer {
  const names = new Set(entries.map((e) => e.name));
  if (names.size !== entries.length) {
    throw new Error('duplicate entry names in archive');
  }
  const parts: Buffer[] = [];
  const header = Buffer.alloc(12);
  header.write(MAGIC, 0, 'ascii');
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(entries.length, 8);
  parts.push(header);

  for (const entry of entries) {
    if (entry.shape.length === 0 || entry.shape.some((s) => s < 1 || !Number.isInteger(s))) {
      throw new Error(`entry ${entry.name} has invalid shape [${entry.shape}]`);
    }
    if (entry.values.length !== product(entry.shape)) {
      throw new Error(
        `entry ${entry.name}: ${entry.values.length} values for shape [${entry.shape}]`,
      );
    }
    const nameBytes = Buffer.from(entry.name, 'utf-8');
    if (nameBytes.length > 0xffff) throw new Error(`entry name too long: ${entry.name}`);
    const head = Buffer.alloc(2 + nameBytes.length + 1 + 4 * entry.shape.length);
    let offset = head.writeUInt16LE(nameBytes.length, 0);
    offset += nameBytes.copy(head, offset);
    offset = head.writeUInt8(entry.shape.length, offset);
    for (const extent of entry.shape) {
      offset = head.writeUInt32LE(extent, offset);
    }
    parts.push(head);
    // Float32Array is little-endian on every platform node supports.
    parts.push(Buffer.from(entry.values.buffer, entry.values.byteOffset, entry.values.byteLength));
  }

  const body = Buffer.concat(parts);
  const trailer = Buffer.alloc(4);
  trailer.writeUInt32LE(crc32(body) >>> 0, 0);
  return Buffer.concat([body, trailer]);
}

export function decodeArchive(data: Buffer): ArchiveEntry[] {
  if (data.length < 16) {
    throw new Error(`truncated archive: ${data.length} bytes is shorter than the header`);
  }
  if (data.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(data.toString('ascii', 0, 4))}`);
  }
  const version = data.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported archive version ${version}, expected ${VERSION}`);
  }
  const storedCrc = data.readUInt32LE(data.length - 4);
  if ((crc32(data.subarray(0, data.length - 4)) >>> 0) !== storedCrc) {
    throw new Error('checksum mismatch: archive bytes are corrupt');
  }

  const count = data.readUInt32LE(8);
  const end = data.length - 4;
  let cursor = 12;
  const entries: ArchiveEntry[] = [];
  for (let i = 0; i < count; i++) {
    if (cursor + 2 > end) throw new Error('truncated payload while reading entry name length');
    const nameLen = data.readUInt16LE(cursor);
    cursor += 2;
    if (cursor + nameLen + 1 > end) throw new Error('truncated payload while reading entry name');
    const name = data.toString('utf-8', cursor, cursor + nameLen);
    cursor += nameLen;
    const rank = data.readUInt8(cursor);
    cursor += 1;
    if (cursor + 4 * rank > end) {
      throw new Error(`truncated payload while reading shape of ${name}`);
    }
    const shape: number[] = [];
    for (let d = 0; d < rank; d++) {
      shape.push(data.readUInt32LE(cursor));
      cursor += 4;
    }
    const size = product(shape);
    if (rank === 0 || size === 0) throw new Error(`entry ${name} declares an empty shape`);
    if (cursor + 4 * size > end) {
      throw new Error(`truncated payload while reading values of ${name}`);
    }
    const values = new Float32Array(size);
    for (let v = 0; v < size; v++) {
      values[v] = data.readFloatLE(cursor + 4 * v);
    }
    cursor += 4 * size;
    entries.push({ name, shape, values });
  }
  if (cursor !== end) {
    throw new Error(
      `archive length disagrees with declared entry sizes (${end - cursor} trailing bytes)`,
    );
  }
  return entries;
}

/** CRC32 of an entry's raw little-endian f32 payload, as stored on disk. */
export function valueChecksum(values: Float32Array): number {
  return crc32(Buffer.from(values.buffer, values.byteOffset, values.byteLength)) >>> 0;
}
