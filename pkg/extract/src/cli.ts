#!/usr/bin/env node
/**
 * Command line: `extract-pool` embeds an image directory with the fixed
 * extractor and writes EMB1 + manifest; `extract-model` embeds the images of
 * an existing proxy manifest with a checkpointed model, rows aligned to the
 * manifest's row_index.  Summaries go to stdout as JSON, warnings to stderr;
 * exit code 0 on success, 1 on any failure.
 */

import { mkdirSync, writeFileSync } from 'fs';
import * as path from 'path';
import { parseArgs } from 'util';

import * as tf from '@tensorflow/tfjs';

import { ExtractError } from './emb1';
import { ExtractSummary, extractModelEmbeddings, extractPoolFeatures } from './jobs';

const USAGE = `usage: proxyrank-extract <extract-pool|extract-model> [options]

extract-pool   --images DIR --out DIR [--manifest PATH] [--batch-size N]
               [--dataset-name NAME]
extract-model  --images DIR --manifest PROXY.csv --checkpoint CKPT.json
               --out DIR [--batch-size N]`;

interface Flags {
  images?: string;
  out?: string;
  manifest?: string;
  checkpoint?: string;
  'batch-size'?: string;
  'dataset-name'?: string;
}

function need(flags: Flags, name: keyof Flags): string {
  const value = flags[name];
  if (!value) {
    throw new ExtractError(`--${name} is required\n${USAGE}`);
  }
  return value;
}

function batchSize(flags: Flags): number {
  const raw = flags['batch-size'] ?? '32';
  const parsed = Number(raw);
  if (!Number.isInteger(parsed) || parsed < 1) {
    throw new ExtractError(`--batch-size must be a positive integer, got ${raw}`);
  }
  return parsed;
}

function writeSummary(outDir: string, summary: ExtractSummary): void {
  const payload = JSON.stringify(summary, null, 2) + '\n';
  writeFileSync(path.join(outDir, 'extract_summary.json'), payload);
  process.stdout.write(payload);
  for (const warning of summary.warnings) {
    process.stderr.write(`warning: ${warning}\n`);
  }
}

export function run(argv: string[]): number {
  tf.env().set('PROD', true); // keeps the node-backend advert off stderr
  const command = argv[0];
  if (command !== 'extract-pool' && command !== 'extract-model') {
    process.stderr.write(`${USAGE}\n`);
    return command === '--help' || command === '-h' ? 0 : 1;
  }
  let flags: Flags;
  try {
    flags = parseArgs({
      args: argv.slice(1),
      options: {
        images: { type: 'string' },
        out: { type: 'string' },
        manifest: { type: 'string' },
        checkpoint: { type: 'string' },
        'batch-size': { type: 'string' },
        'dataset-name': { type: 'string' },
      },
    }).values as Flags;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
    return 1;
  }

  try {
    const outDir = need(flags, 'out');
    mkdirSync(outDir, { recursive: true });
    if (command === 'extract-pool') {
      const summary = extractPoolFeatures({
        imageRoot: need(flags, 'images'),
        manifestOut: flags.manifest ?? path.join(outDir, 'pool_manifest.csv'),
        embeddingsOut: path.join(outDir, 'pool.emb1'),
        extractor: { kind: 'fixed' },
        batchSize: batchSize(flags),
        datasetName: flags['dataset-name'],
      });
      writeSummary(outDir, summary);
    } else {
      const checkpoint = need(flags, 'checkpoint');
      const stem = path.basename(checkpoint, path.extname(checkpoint));
      const summary = extractModelEmbeddings(
        {
          imageRoot: need(flags, 'images'),
          manifestOut: '',
          embeddingsOut: path.join(outDir, `${stem}.emb1`),
          extractor: { kind: 'checkpoint', path: checkpoint },
          batchSize: batchSize(flags),
        },
        need(flags, 'manifest'),
      );
      writeSummary(outDir, summary);
    }
    return 0;
  } catch (err) {
    if (err instanceof ExtractError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(run(process.argv.slice(2)));
}
