/**
 * EMB1 binary embedding format, matching the jointasr reader exactly:
 * magic "EMB1", u32 rows, u32 cols (little-endian), f32-LE row-major
 * payload, then a u64 checksum = byte sum mod 2^64 of everything before it.
 */

import { promises as fs } from "node:fs";

const MAGIC = Buffer.from("EMB1");

export class EmbFileError extends Error {}

function byteSum(buf: Buffer): bigint {
  let total = 0n;
  const mask = (1n << 64n) - 1n;
  for (const b of buf) {
    total = (total + BigInt(b)) & mask;
  }
  return total;
}

export function encodeEmb(rows: number, cols: number, data: Float32Array): Buffer {
  if (data.length !== rows * cols) {
    throw new EmbFileError(`payload length ${data.length} != ${rows}x${cols}`);
  }
  const body = Buffer.alloc(12 + rows * cols * 4);
  MAGIC.copy(body, 0);
  body.writeUInt32LE(rows, 4);
  body.writeUInt32LE(cols, 8);
  for (let i = 0; i < data.length; i++) {
    body.writeFloatLE(data[i], 12 + 4 * i);
  }
  const trailer = Buffer.alloc(8);
  trailer.writeBigUInt64LE(byteSum(body));
  return Buffer.concat([body, trailer]);
}

export async function writeEmb(
  path: string,
  rows: number,
  cols: number,
  data: Float32Array,
): Promise<void> {
  await fs.writeFile(path, encodeEmb(rows, cols, data));
}

export interface EmbMatrix {
  rows: number;
  cols: number;
  data: Float32Array;
}

/** Read and checksum-validate an EMB1 file. */
export async function readEmb(path: string): Promise<EmbMatrix> {
  const raw = await fs.readFile(path);
  if (raw.length < 20 || !raw.subarray(0, 4).equals(MAGIC)) {
    throw new EmbFileError(`${path}: not an EMB1 file`);
  }
  const rows = raw.readUInt32LE(4);
  const cols = raw.readUInt32LE(8);
  if (raw.length !== 12 + rows * cols * 4 + 8) {
    throw new EmbFileError(`${path}: size ${raw.length} does not match ${rows}x${cols}`);
  }
  const stored = raw.readBigUInt64LE(raw.length - 8);
  if (byteSum(raw.subarray(0, raw.length - 8)) !== stored) {
    throw new EmbFileError(`${path}: checksum mismatch`);
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    data[i] = raw.readFloatLE(12 + 4 * i);
  }
  return { rows, cols, data };
}
