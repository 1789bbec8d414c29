import { writeFileSync } from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';
import { describe, expect, it } from 'vitest';

import { ExtractError } from '../src/emb1';
import {
  Checkpoint,
  Extractor,
  FEATURE_DIM,
  INPUT_SIZE,
  fixedCheckpoint,
  fixedExtractor,
  loadCheckpoint,
  makeToyCheckpoint,
  mulberry32,
} from '../src/extractor';
import { tempDir } from './helpers';

function randomBatch(n: number, seed: number): tf.Tensor4D {
  const next = mulberry32(seed);
  const data = Float32Array.from(
    { length: n * INPUT_SIZE * INPUT_SIZE * 3 },
    () => 2 * next() - 1,
  );
  return tf.tensor4d(data, [n, INPUT_SIZE, INPUT_SIZE, 3]);
}

describe('mulberry32', () => {
  it('is deterministic and stays in [0, 1)', () => {
    const a = mulberry32(7);
    const b = mulberry32(7);
    for (let i = 0; i < 1000; i++) {
      const va = a();
      expect(va).toBe(b());
      expect(va).toBeGreaterThanOrEqual(0);
      expect(va).toBeLessThan(1);
    }
    expect(mulberry32(8)()).not.toBe(mulberry32(7)());
  });
});

describe('fixed extractor', () => {
  it('exposes the advertised geometry', () => {
    const extractor = fixedExtractor();
    expect(extractor.inputSize).toBe(INPUT_SIZE);
    expect(extractor.featureDim).toBe(FEATURE_DIM);
    extractor.dispose();
  });

  it('computes identical features from independent instances', () => {
    const batch = randomBatch(4, 3);
    const first = fixedExtractor();
    const second = fixedExtractor();
    const a = first.features(batch);
    const b = second.features(batch);
    expect(a.length).toBe(4 * FEATURE_DIM);
    expect(Array.from(a)).toEqual(Array.from(b));
    expect(Array.from(a).every(Number.isFinite)).toBe(true);
    batch.dispose();
    first.dispose();
    second.dispose();
  });

  it('produces features that actually depend on the input', () => {
    const extractor = fixedExtractor();
    const x = randomBatch(1, 1);
    const y = randomBatch(1, 2);
    const fx = extractor.features(x);
    const fy = extractor.features(y);
    expect(Array.from(fx)).not.toEqual(Array.from(fy));
    x.dispose();
    y.dispose();
    extractor.dispose();
  });
});

describe('toy checkpoints', () => {
  it('round trips through JSON on disk', () => {
    const dir = tempDir('ckpt');
    const file = path.join(dir, 'toy.json');
    writeFileSync(file, JSON.stringify(makeToyCheckpoint(5, 16)));
    const extractor = loadCheckpoint(file);
    expect(extractor.featureDim).toBe(16);
    const batch = randomBatch(2, 9);
    expect(extractor.features(batch).length).toBe(2 * 16);
    batch.dispose();
    extractor.dispose();
  });

  it('gives different embeddings for different seeds', () => {
    const batch = randomBatch(3, 4);
    const a = new Extractor(makeToyCheckpoint(1));
    const b = new Extractor(makeToyCheckpoint(2));
    expect(Array.from(a.features(batch))).not.toEqual(Array.from(b.features(batch)));
    batch.dispose();
    a.dispose();
    b.dispose();
  });

  it('rejects broken checkpoints', () => {
    expect(() => new Extractor({ ...makeToyCheckpoint(1), format: 'v99' })).toThrow(
      /unsupported checkpoint format/,
    );
    expect(
      () => new Extractor({ format: 'toyconv-v1', input_size: 32, layers: [] }),
    ).toThrow(/no layers/);

    const badConv = makeToyCheckpoint(1);
    const conv = badConv.layers[0];
    if (conv.kind === 'conv') {
      conv.weights = conv.weights.slice(0, 5);
    }
    expect(() => new Extractor(badConv)).toThrow(/do not match declared shape/);

    // dense applied to a spatial input: the probe run must fail
    const misplacedDense: Checkpoint = {
      format: 'toyconv-v1',
      input_size: 32,
      layers: [
        { kind: 'dense', in_dim: 3, out_dim: 4, weights: new Array(12).fill(0.1), bias: [0, 0, 0, 0] },
      ],
    };
    expect(() => new Extractor(misplacedDense)).toThrow(ExtractError);
  });

  it('rejects unreadable checkpoint files', () => {
    const dir = tempDir('ckpt');
    const junk = path.join(dir, 'junk.json');
    writeFileSync(junk, '{not json');
    expect(() => loadCheckpoint(junk)).toThrow(/cannot load checkpoint/);
    expect(() => loadCheckpoint(path.join(dir, 'missing.json'))).toThrow(ExtractError);
  });
});

describe('fixed checkpoint contents', () => {
  it('is a pure function of the hard-coded seed', () => {
    const a = fixedCheckpoint();
    const b = fixedCheckpoint();
    expect(a).toEqual(b);
    const first = a.layers[0];
    expect(first.kind).toBe('conv');
    if (first.kind === 'conv') {
      expect(first.weights.length).toBe(3 * 3 * 3 * 16);
    }
  });
});
