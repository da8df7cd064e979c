import { appendFileSync, mkdirSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { writeDumpFile } from './adtp.js';
import { capture, loadBackend } from './backends/mock.js';
import { ShapeMismatch } from './errors.js';
import { reduceAttention } from './reduce.js';

export interface ExtractionJob {
  model: string;
  video: string;
  question: string;
  frameCount: number; // must match the model family's sampling convention
  out: string;
  manifest?: string; // defaults to manifest.txt next to the output
}

export interface ExtractionResult {
  out: string;
  manifest: string;
  n: number;
  c: number;
  numLayers: number;
  pooling: 'tower-pooled' | 'patch-mean';
}

export function extract(job: ExtractionJob): ExtractionResult {
  const backend = loadBackend(job.model);
  if (job.frameCount !== backend.frames) {
    throw new ShapeMismatch(
      `${job.model} samples ${backend.frames} frames, job asked for ${job.frameCount}`,
    );
  }
  if (job.question.trim().length === 0) {
    throw new ShapeMismatch('question is empty: no text rows to average');
  }

  const cap = capture(backend, job.video, job.question);
  const { frames: n, tokensPerFrame: c, dim: d, layers } = backend;

  const pooling = cap.pooledFrames ? 'tower-pooled' : 'patch-mean';
  const frameEmbeddings = new Float32Array(n * d);
  for (let f = 0; f < n; f++) {
    if (cap.pooledFrames) {
      frameEmbeddings.set(cap.pooledFrames[f], f * d);
    } else {
      const block = cap.patchEmbeddings[f];
      for (let i = 0; i < d; i++) {
        let acc = 0;
        for (let p = 0; p < c; p++) {
          acc += block[p * d + i];
        }
        frameEmbeddings[f * d + i] = acc / c;
      }
    }
  }

  const attention = new Float32Array(layers * n * c);
  for (let l = 0; l < layers; l++) {
    const scores = reduceAttention(cap.blocks[l], cap.visualStart, n * c);
    for (let j = 0; j < n * c; j++) {
      attention[l * n * c + j] = scores[j];
    }
  }

  const seqLen = cap.blocks[0].seqLen;
  writeDumpFile(job.out, {
    n,
    c,
    d,
    numLayers: layers,
    nonspatialCount: 0,
    meta: {
      source: 'extractor',
      model: job.model,
      video: job.video,
      pooling,
      heads: String(backend.heads),
      // which attention rows the reduction averaged, as sequence positions
      averaged_rows: `seq[${seqLen - cap.textRows}:${seqLen}]`,
    },
    frameEmbeddings,
    textEmbedding: cap.textEmbedding,
    attention,
  });

  const manifest = job.manifest ?? join(dirname(job.out), 'manifest.txt');
  mkdirSync(dirname(manifest), { recursive: true });
  appendFileSync(manifest, `${job.out}\t${job.model}\t${n}x${c}x${layers}\n`);

  return { out: job.out, manifest, n, c, numLayers: layers, pooling };
}
