/**
 * EMB1 embedding files: the binary interchange format the Python toolkit
 * loads.  Layout is a 4-byte ASCII magic "EMB1", then row count and dimension
 * as little-endian uint32, then rows*dims float32 values in row-major order.
 */

import { readFileSync, writeFileSync } from 'fs';

export const EMB1_MAGIC = 'EMB1';
const HEADER_BYTES = 12;

export class ExtractError extends Error {}

export interface EmbeddingMatrix {
  rows: number;
  dims: number;
  /** row-major, length rows*dims */
  data: Float32Array;
}

export function encodeEmb1(matrix: EmbeddingMatrix): Buffer {
  const { rows, dims, data } = matrix;
  if (!Number.isInteger(rows) || rows < 0 || !Number.isInteger(dims) || dims < 1) {
    throw new ExtractError(`bad embedding shape: rows=${rows} dims=${dims}`);
  }
  if (data.length !== rows * dims) {
    throw new ExtractError(
      `embedding data length ${data.length} does not match rows*dims ${rows * dims}`,
    );
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * data.length);
  buf.write(EMB1_MAGIC, 0, 'ascii');
  buf.writeUInt32LE(rows, 4);
  buf.writeUInt32LE(dims, 8);
  const view = new DataView(buf.buffer, buf.byteOffset + HEADER_BYTES);
  for (let i = 0; i < data.length; i++) {
    const v = data[i];
    if (!Number.isFinite(v)) {
      throw new ExtractError(`non-finite embedding value at flat index ${i}`);
    }
    view.setFloat32(4 * i, v, true);
  }
  return buf;
}

export function writeEmb1(path: string, matrix: EmbeddingMatrix): void {
  writeFileSync(path, encodeEmb1(matrix));
}

export function readEmb1(path: string): EmbeddingMatrix {
  const buf = readFileSync(path);
  if (buf.length < HEADER_BYTES || buf.toString('ascii', 0, 4) !== EMB1_MAGIC) {
    throw new ExtractError(`not an EMB1 file: ${path}`);
  }
  const rows = buf.readUInt32LE(4);
  const dims = buf.readUInt32LE(8);
  const expected = HEADER_BYTES + 4 * rows * dims;
  if (buf.length !== expected) {
    throw new ExtractError(`truncated EMB1 file ${path}: ${buf.length} bytes, expected ${expected}`);
  }
  const data = new Float32Array(rows * dims);
  const view = new DataView(buf.buffer, buf.byteOffset + HEADER_BYTES);
  for (let i = 0; i < data.length; i++) {
    data[i] = view.getFloat32(4 * i, true);
  }
  return { rows, dims, data };
}
