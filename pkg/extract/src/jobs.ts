/**
 * The two extraction jobs: pool/target embedding (fixed extractor, sidecar
 * manifest) and per-model proxy embedding (checkpointed model, rows aligned
 * to an existing manifest).  Both write the exact corpus formats.
 */

import * as path from 'path';

import * as tf from '@tensorflow/tfjs';

import { ExtractError, writeEmb1 } from './emb1';
import {
  Extractor,
  FEATURE_DIM,
  INPUT_SIZE,
  fixedExtractor,
  loadCheckpoint,
} from './extractor';
import { decodePng, imagePath, listImages, loadInput, parseImageName } from './images';
import { ManifestRow, readManifest, rowsInIndexOrder, writeManifest } from './manifest';

export type ExtractorChoice = { kind: 'fixed' } | { kind: 'checkpoint'; path: string };

export interface ExtractJob {
  imageRoot: string;
  manifestOut: string;
  embeddingsOut: string;
  extractor: ExtractorChoice;
  batchSize: number;
  /** advisory only; the pure-JS backend is always CPU */
  device?: string;
  /** defaults to the basename of imageRoot */
  datasetName?: string;
}

export interface ExtractSummary {
  rows: number;
  dims: number;
  datasetName: string;
  warnings: string[];
  preprocessing: {
    input_size: number;
    resize: string;
    crop: string;
    normalize: string;
  };
}

const PREPROCESSING = {
  input_size: INPUT_SIZE,
  resize: 'bilinear, shortest side to input_size',
  crop: 'center input_size x input_size',
  normalize: '(x/255 - 0.5) / 0.5 per channel',
};

function buildExtractor(choice: ExtractorChoice): Extractor {
  return choice.kind === 'fixed' ? fixedExtractor() : loadCheckpoint(choice.path);
}

function checkBatchSize(batchSize: number): void {
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new ExtractError(`batch_size must be >= 1, got ${batchSize}`);
  }
}

/** Embeds file paths in batches; loading failures raise unless onSkip eats them. */
function embedFiles(
  extractor: Extractor,
  files: string[],
  batchSize: number,
): Float32Array {
  const out = new Float32Array(files.length * extractor.featureDim);
  for (let start = 0; start < files.length; start += batchSize) {
    const chunk = files.slice(start, start + batchSize);
    const inputs = chunk.map((file) => loadInput(file, extractor.inputSize));
    const batch = tf.stack(inputs) as tf.Tensor4D;
    inputs.forEach((t) => t.dispose());
    const features = extractor.features(batch);
    batch.dispose();
    out.set(features, start * extractor.featureDim);
  }
  return out;
}

export function extractPoolFeatures(job: ExtractJob): ExtractSummary {
  checkBatchSize(job.batchSize);
  const datasetName = job.datasetName ?? path.basename(path.resolve(job.imageRoot));
  const warnings: string[] = [];
  const usable: { file: string; row: ManifestRow }[] = [];

  for (const name of listImages(job.imageRoot)) {
    const parsed = parseImageName(name);
    if (!parsed) {
      warnings.push(`${name}: does not follow <identity>_c<camera>_*.png, skipped`);
      continue;
    }
    const file = path.join(job.imageRoot, name);
    try {
      decodePng(file);
    } catch (err) {
      warnings.push(`${name}: ${(err as Error).message}, skipped`);
      continue;
    }
    const stem = name.slice(0, name.length - path.extname(name).length);
    usable.push({
      file,
      row: {
        imageId: `${datasetName}/${stem}`,
        identityId: parsed.identityId,
        datasetName,
        cameraId: parsed.cameraId,
        rowIndex: usable.length,
      },
    });
  }
  if (usable.length === 0) {
    throw new ExtractError(`no usable images under ${job.imageRoot}`);
  }

  const extractor = buildExtractor(job.extractor);
  try {
    const data = embedFiles(
      extractor,
      usable.map((u) => u.file),
      job.batchSize,
    );
    writeEmb1(job.embeddingsOut, {
      rows: usable.length,
      dims: extractor.featureDim,
      data,
    });
    writeManifest(
      job.manifestOut,
      usable.map((u) => u.row),
    );
    return {
      rows: usable.length,
      dims: extractor.featureDim,
      datasetName,
      warnings,
      preprocessing: { ...PREPROCESSING, input_size: extractor.inputSize },
    };
  } finally {
    extractor.dispose();
  }
}

export function extractModelEmbeddings(job: ExtractJob, proxyManifestPath: string): ExtractSummary {
  checkBatchSize(job.batchSize);
  const rows = rowsInIndexOrder(readManifest(proxyManifestPath));
  if (rows.length === 0) {
    throw new ExtractError(`proxy manifest ${proxyManifestPath} has no rows`);
  }
  const files = rows.map((row) => imagePath(job.imageRoot, row.imageId));

  const extractor = buildExtractor(job.extractor);
  try {
    const data = embedFiles(extractor, files, job.batchSize);
    writeEmb1(job.embeddingsOut, { rows: rows.length, dims: extractor.featureDim, data });
    return {
      rows: rows.length,
      dims: extractor.featureDim,
      datasetName: rows[0].datasetName,
      warnings: [],
      preprocessing: { ...PREPROCESSING, input_size: extractor.inputSize },
    };
  } finally {
    extractor.dispose();
  }
}

export { FEATURE_DIM, INPUT_SIZE };
