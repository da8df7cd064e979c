#!/usr/bin/env node
// usage:
//   adtp-extract --model mock:onevision-7b --video clip.mp4 \
//       --question "what happens?" --out clip.adtp [--frames 32] [--manifest m.txt]
//   adtp-extract --list-models

import { pathToFileURL } from 'node:url';
import { AttentionUnavailable, FormatError, ModelLoadError, ShapeMismatch } from './errors.js';
import { extract } from './extract.js';
import { knownModels, loadBackend } from './backends/mock.js';

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--')) {
      throw new Error(`unexpected argument ${JSON.stringify(arg)}`);
    }
    const key = arg.slice(2);
    if (key === 'list-models') {
      out.set(key, '');
      continue;
    }
    if (i + 1 >= argv.length) {
      throw new Error(`--${key} needs a value`);
    }
    out.set(key, argv[++i]);
  }
  return out;
}

export function main(argv: string[]): number {
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
  } catch (e) {
    process.stderr.write(`error: ${(e as Error).message}\n`);
    return 2;
  }

  if (args.has('list-models')) {
    for (const m of knownModels()) {
      process.stdout.write(`${m}\n`);
    }
    return 0;
  }

  const missing = ['model', 'video', 'question', 'out'].filter((k) => !args.has(k));
  if (missing.length > 0) {
    process.stderr.write(`error: missing ${missing.map((k) => `--${k}`).join(', ')}\n`);
    return 2;
  }

  const model = args.get('model')!;
  let frameCount: number;
  if (args.has('frames')) {
    frameCount = Number(args.get('frames'));
    if (!Number.isInteger(frameCount) || frameCount < 1) {
      process.stderr.write(`error: --frames must be a positive integer\n`);
      return 2;
    }
  } else {
    try {
      frameCount = loadBackend(model).frames; // default to the model convention
    } catch (e) {
      process.stderr.write(`error: ${(e as Error).message}\n`);
      return 1;
    }
  }

  try {
    const res = extract({
      model,
      video: args.get('video')!,
      question: args.get('question')!,
      frameCount,
      out: args.get('out')!,
      manifest: args.get('manifest'),
    });
    process.stdout.write(
      `wrote ${res.out} (${res.n}x${res.c} tokens, ${res.numLayers} layers, ${res.pooling})\n`,
    );
    return 0;
  } catch (e) {
    if (
      e instanceof ModelLoadError ||
      e instanceof AttentionUnavailable ||
      e instanceof ShapeMismatch ||
      e instanceof FormatError
    ) {
      process.stderr.write(`error: ${e.message}\n`);
      return 1;
    }
    throw e;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
