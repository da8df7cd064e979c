// Attention reduction: full per-head maps -> one score per visual token.
//
// Each head map is textRows x seqLen row-major. The score vector averages
// over heads and over the prompt-text rows, then keeps only the visual
// columns. Means commute, so both orders are exposed; extract() uses
// headsThenRows and the test suite checks the orders agree.

import { ShapeMismatch } from './errors.js';

export interface AttentionBlock {
  heads: Float32Array[]; // one textRows*seqLen map per head
  textRows: number;
  seqLen: number;
}

function checkBlock(block: AttentionBlock): void {
  if (block.heads.length === 0) {
    throw new ShapeMismatch('attention block has no heads');
  }
  if (block.textRows < 1 || block.seqLen < 1) {
    throw new ShapeMismatch(`need textRows >= 1 and seqLen >= 1, got ${block.textRows}x${block.seqLen}`);
  }
  for (const head of block.heads) {
    if (head.length !== block.textRows * block.seqLen) {
      throw new ShapeMismatch(
        `head map has ${head.length} entries, expected ${block.textRows}x${block.seqLen}`,
      );
    }
  }
}

function checkSlice(block: AttentionBlock, visualStart: number, visualCount: number): void {
  if (visualStart < 0 || visualCount < 1 || visualStart + visualCount > block.seqLen) {
    throw new ShapeMismatch(
      `visual columns [${visualStart}, ${visualStart + visualCount}) outside sequence of ${block.seqLen}`,
    );
  }
}

export function headsThenRows(block: AttentionBlock, visualStart: number, visualCount: number): Float64Array {
  checkBlock(block);
  checkSlice(block, visualStart, visualCount);
  const { heads, textRows, seqLen } = block;
  const out = new Float64Array(visualCount);
  for (let r = 0; r < textRows; r++) {
    for (let j = 0; j < visualCount; j++) {
      let acc = 0;
      for (const head of heads) {
        acc += head[r * seqLen + visualStart + j];
      }
      out[j] += acc / heads.length;
    }
  }
  for (let j = 0; j < visualCount; j++) {
    out[j] /= textRows;
  }
  return out;
}

export function rowsThenHeads(block: AttentionBlock, visualStart: number, visualCount: number): Float64Array {
  checkBlock(block);
  checkSlice(block, visualStart, visualCount);
  const { heads, textRows, seqLen } = block;
  const out = new Float64Array(visualCount);
  for (const head of heads) {
    for (let j = 0; j < visualCount; j++) {
      let acc = 0;
      for (let r = 0; r < textRows; r++) {
        acc += head[r * seqLen + visualStart + j];
      }
      out[j] += acc / textRows;
    }
  }
  for (let j = 0; j < visualCount; j++) {
    out[j] /= heads.length;
  }
  return out;
}

export const reduceAttention = headsThenRows;
