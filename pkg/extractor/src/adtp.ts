// ADTP v1 container, byte-compatible with the Python engine's reader.
//
// Layout, little-endian:
//   "ADTP" | u32 version=1 | u32 n | u32 c | u32 d | u32 num_layers
//   | u32 nonspatial_count | u32 meta_len | meta_len bytes UTF-8 JSON object
//   | n*d f32 frame embeddings | d f32 text embedding | num_layers*n*c f32 attention

import { readFileSync, writeFileSync } from 'node:fs';
import { FormatError, ShapeMismatch } from './errors.js';

export const MAGIC = 'ADTP';
export const VERSION = 1;
export const HEADER_SIZE = 32;

export interface AdtpDump {
  n: number;
  c: number;
  d: number;
  numLayers: number;
  nonspatialCount: number;
  meta: Record<string, string>;
  frameEmbeddings: Float32Array; // n*d, row-major by frame
  textEmbedding: Float32Array; // d
  attention: Float32Array; // numLayers*n*c, row-major by layer
}

function checkDump(dump: AdtpDump): void {
  const { n, c, d, numLayers, nonspatialCount } = dump;
  for (const [name, v] of [['n', n], ['c', c], ['d', d], ['num_layers', numLayers]] as const) {
    if (!Number.isInteger(v) || v < 1) {
      throw new ShapeMismatch(`${name} must be a positive integer, got ${v}`);
    }
  }
  if (!Number.isInteger(nonspatialCount) || nonspatialCount < 0 || nonspatialCount > c) {
    throw new ShapeMismatch(`nonspatial_count must lie in [0, ${c}], got ${nonspatialCount}`);
  }
  const want: Array<[string, Float32Array, number]> = [
    ['frame embeddings', dump.frameEmbeddings, n * d],
    ['text embedding', dump.textEmbedding, d],
    ['attention', dump.attention, numLayers * n * c],
  ];
  for (const [name, arr, len] of want) {
    if (arr.length !== len) {
      throw new ShapeMismatch(`${name}: expected ${len} floats, got ${arr.length}`);
    }
    for (let i = 0; i < arr.length; i++) {
      if (!Number.isFinite(arr[i])) {
        throw new ShapeMismatch(`${name}: non-finite value at index ${i}`);
      }
    }
  }
  for (let i = 0; i < dump.attention.length; i++) {
    if (dump.attention[i] < 0) {
      throw new ShapeMismatch(`attention: negative value at index ${i}`);
    }
  }
  for (const [k, v] of Object.entries(dump.meta)) {
    if (typeof v !== 'string') {
      throw new ShapeMismatch(`meta[${JSON.stringify(k)}] must be a string`);
    }
  }
}

function encodeMeta(meta: Record<string, string>): Buffer {
  // sorted keys, no whitespace: same convention the engine's writer uses
  const sorted: Record<string, string> = {};
  for (const k of Object.keys(meta).sort()) {
    sorted[k] = meta[k];
  }
  return Buffer.from(JSON.stringify(sorted), 'utf8');
}

function putFloats(buf: Buffer, offset: number, arr: Float32Array): number {
  for (let i = 0; i < arr.length; i++) {
    buf.writeFloatLE(arr[i], offset);
    offset += 4;
  }
  return offset;
}

export function writeDump(dump: AdtpDump): Buffer {
  checkDump(dump);
  const meta = encodeMeta(dump.meta);
  const floats = dump.frameEmbeddings.length + dump.textEmbedding.length + dump.attention.length;
  const buf = Buffer.alloc(HEADER_SIZE + meta.length + 4 * floats);
  buf.write(MAGIC, 0, 'ascii');
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(dump.n, 8);
  buf.writeUInt32LE(dump.c, 12);
  buf.writeUInt32LE(dump.d, 16);
  buf.writeUInt32LE(dump.numLayers, 20);
  buf.writeUInt32LE(dump.nonspatialCount, 24);
  buf.writeUInt32LE(meta.length, 28);
  meta.copy(buf, HEADER_SIZE);
  let off = HEADER_SIZE + meta.length;
  off = putFloats(buf, off, dump.frameEmbeddings);
  off = putFloats(buf, off, dump.textEmbedding);
  putFloats(buf, off, dump.attention);
  return buf;
}

function takeFloats(buf: Buffer, offset: number, count: number, field: string): Float32Array {
  if (offset + 4 * count > buf.length) {
    throw new FormatError(`truncated ${field}: need ${4 * count} bytes at offset ${offset}`);
  }
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = buf.readFloatLE(offset + 4 * i);
  }
  return out;
}

export function readDump(blob: Buffer): AdtpDump {
  if (blob.length < HEADER_SIZE) {
    throw new FormatError(`truncated header: ${blob.length} of ${HEADER_SIZE} bytes`);
  }
  if (blob.toString('ascii', 0, 4) !== MAGIC) {
    throw new FormatError(`bad magic ${JSON.stringify(blob.toString('ascii', 0, 4))}`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== VERSION) {
    throw new FormatError(`unsupported version ${version}`);
  }
  const n = blob.readUInt32LE(8);
  const c = blob.readUInt32LE(12);
  const d = blob.readUInt32LE(16);
  const numLayers = blob.readUInt32LE(20);
  const nonspatialCount = blob.readUInt32LE(24);
  const metaLen = blob.readUInt32LE(28);
  if (HEADER_SIZE + metaLen > blob.length) {
    throw new FormatError(`truncated meta: need ${metaLen} bytes at offset ${HEADER_SIZE}`);
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(blob.toString('utf8', HEADER_SIZE, HEADER_SIZE + metaLen));
  } catch (e) {
    throw new FormatError(`meta is not valid JSON: ${(e as Error).message}`);
  }
  if (typeof parsed !== 'object' || parsed === null || Array.isArray(parsed)) {
    throw new FormatError('meta must be a JSON object');
  }
  const meta: Record<string, string> = {};
  for (const [k, v] of Object.entries(parsed)) {
    if (typeof v !== 'string') {
      throw new FormatError(`meta[${JSON.stringify(k)}] must be a string`);
    }
    meta[k] = v;
  }
  let off = HEADER_SIZE + metaLen;
  const frameEmbeddings = takeFloats(blob, off, n * d, 'frame embeddings');
  off += 4 * n * d;
  const textEmbedding = takeFloats(blob, off, d, 'text embedding');
  off += 4 * d;
  const attention = takeFloats(blob, off, numLayers * n * c, 'attention');
  off += 4 * numLayers * n * c;
  if (off !== blob.length) {
    throw new FormatError(`${blob.length - off} trailing bytes after payload`);
  }
  const dump: AdtpDump = { n, c, d, numLayers, nonspatialCount, meta, frameEmbeddings, textEmbedding, attention };
  checkDump(dump);
  return dump;
}

export function writeDumpFile(path: string, dump: AdtpDump): void {
  writeFileSync(path, writeDump(dump));
}

export function readDumpFile(path: string): AdtpDump {
  return readDump(readFileSync(path));
}
