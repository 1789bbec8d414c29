/**
 * Feature extractors: the fixed one used for pool/target embeddings, and toy
 * checkpointed models used to embed a proxy for ranking experiments.
 *
 * "Fixed" means fixed for everyone: the architecture is hard-coded and the
 * weights come from a seeded generator, so every install computes the same
 * features without downloading anything.  Checkpoints are plain JSON
 * ("toyconv-v1") carrying explicit weight arrays, so any toolchain can write
 * one.
 */

import { readFileSync } from 'fs';

import * as tf from '@tensorflow/tfjs';

import { ExtractError } from './emb1';

export const INPUT_SIZE = 32;
export const FEATURE_DIM = 64;
export const CHECKPOINT_FORMAT = 'toyconv-v1';
const FIXED_EXTRACTOR_SEED = 1905;

export type CheckpointLayer =
  | {
      kind: 'conv';
      kernel: number;
      stride: number;
      in_channels: number;
      out_channels: number;
      weights: number[];
      bias: number[];
    }
  | { kind: 'relu' }
  | { kind: 'gap' }
  | { kind: 'dense'; in_dim: number; out_dim: number; weights: number[]; bias: number[] };

export interface Checkpoint {
  format: string;
  input_size: number;
  layers: CheckpointLayer[];
}

/** Deterministic uniform generator in [0, 1) (mulberry32). */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function uniformWeights(next: () => number, count: number, fanIn: number, fanOut: number): number[] {
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  return Array.from({ length: count }, () => (2 * next() - 1) * limit);
}

function convLayer(
  next: () => number,
  inChannels: number,
  outChannels: number,
  stride: number,
): CheckpointLayer {
  const kernel = 3;
  const fan = kernel * kernel;
  return {
    kind: 'conv',
    kernel,
    stride,
    in_channels: inChannels,
    out_channels: outChannels,
    weights: uniformWeights(next, fan * inChannels * outChannels, fan * inChannels, fan * outChannels),
    bias: new Array<number>(outChannels).fill(0),
  };
}

/** The fixed extractor as a checkpoint: 3 strided conv+relu blocks, then GAP. */
export function fixedCheckpoint(): Checkpoint {
  const next = mulberry32(FIXED_EXTRACTOR_SEED);
  return {
    format: CHECKPOINT_FORMAT,
    input_size: INPUT_SIZE,
    layers: [
      convLayer(next, 3, 16, 2),
      { kind: 'relu' },
      convLayer(next, 16, 32, 2),
      { kind: 'relu' },
      convLayer(next, 32, FEATURE_DIM, 2),
      { kind: 'relu' },
      { kind: 'gap' },
    ],
  };
}

/** A tiny two-layer model (conv -> GAP -> dense) for ranking experiments. */
export function makeToyCheckpoint(seed: number, featureDim = 16): Checkpoint {
  const next = mulberry32(seed);
  const hidden = 8;
  return {
    format: CHECKPOINT_FORMAT,
    input_size: INPUT_SIZE,
    layers: [
      convLayer(next, 3, hidden, 2),
      { kind: 'relu' },
      { kind: 'gap' },
      {
        kind: 'dense',
        in_dim: hidden,
        out_dim: featureDim,
        weights: uniformWeights(next, hidden * featureDim, hidden, featureDim),
        bias: new Array<number>(featureDim).fill(0),
      },
    ],
  };
}

export class Extractor {
  readonly inputSize: number;
  readonly featureDim: number;
  private readonly layers: CheckpointLayer[];
  private readonly tensors: Map<number, { weights: tf.Tensor; bias: tf.Tensor1D }>;

  constructor(checkpoint: Checkpoint) {
    if (checkpoint.format !== CHECKPOINT_FORMAT) {
      throw new ExtractError(`unsupported checkpoint format: ${checkpoint.format}`);
    }
    if (!Number.isInteger(checkpoint.input_size) || checkpoint.input_size < 8) {
      throw new ExtractError(`bad checkpoint input_size: ${checkpoint.input_size}`);
    }
    if (!Array.isArray(checkpoint.layers) || checkpoint.layers.length === 0) {
      throw new ExtractError('checkpoint has no layers');
    }
    this.inputSize = checkpoint.input_size;
    this.layers = checkpoint.layers;
    this.tensors = new Map();
    for (let i = 0; i < this.layers.length; i++) {
      const layer = this.layers[i];
      if (layer.kind === 'conv') {
        const expected = layer.kernel * layer.kernel * layer.in_channels * layer.out_channels;
        if (layer.weights.length !== expected || layer.bias.length !== layer.out_channels) {
          throw new ExtractError(`conv layer ${i}: weight/bias sizes do not match declared shape`);
        }
        this.tensors.set(i, {
          weights: tf.tensor4d(layer.weights, [
            layer.kernel,
            layer.kernel,
            layer.in_channels,
            layer.out_channels,
          ]),
          bias: tf.tensor1d(layer.bias),
        });
      } else if (layer.kind === 'dense') {
        if (layer.weights.length !== layer.in_dim * layer.out_dim || layer.bias.length !== layer.out_dim) {
          throw new ExtractError(`dense layer ${i}: weight/bias sizes do not match declared shape`);
        }
        this.tensors.set(i, {
          weights: tf.tensor2d(layer.weights, [layer.in_dim, layer.out_dim]),
          bias: tf.tensor1d(layer.bias),
        });
      }
    }
    // One dry run both validates the layer plumbing and pins the feature width.
    const probe = tf.tidy(() =>
      this.forward(tf.zeros([1, this.inputSize, this.inputSize, 3])),
    );
    if (probe.shape.length !== 2 || probe.shape[0] !== 1) {
      probe.dispose();
      throw new ExtractError('checkpoint does not finish with a pooled feature vector');
    }
    this.featureDim = probe.shape[1];
    probe.dispose();
  }

  private forward(batch: tf.Tensor4D): tf.Tensor2D {
    let current: tf.Tensor = batch;
    for (let i = 0; i < this.layers.length; i++) {
      const layer = this.layers[i];
      if (layer.kind === 'conv') {
        const { weights, bias } = this.tensors.get(i)!;
        current = tf
          .conv2d(current as tf.Tensor4D, weights as tf.Tensor4D, layer.stride, 'same')
          .add(bias);
      } else if (layer.kind === 'relu') {
        current = tf.relu(current);
      } else if (layer.kind === 'gap') {
        if (current.shape.length !== 4) {
          throw new ExtractError(`gap layer ${i} expects a spatial input`);
        }
        current = tf.mean(current, [1, 2]);
      } else {
        const { weights, bias } = this.tensors.get(i)!;
        if (current.shape.length !== 2) {
          throw new ExtractError(`dense layer ${i} expects a pooled input`);
        }
        current = tf.matMul(current as tf.Tensor2D, weights as tf.Tensor2D).add(bias);
      }
    }
    if (current.shape.length !== 2) {
      throw new ExtractError('extractor output is not a feature matrix');
    }
    return current as tf.Tensor2D;
  }

  /** Embeds a [n, size, size, 3] batch; returns [n, featureDim] float32 data. */
  features(batch: tf.Tensor4D): Float32Array {
    const out = tf.tidy(() => this.forward(batch));
    const data = out.dataSync() as Float32Array;
    out.dispose();
    return Float32Array.from(data);
  }

  dispose(): void {
    for (const { weights, bias } of this.tensors.values()) {
      weights.dispose();
      bias.dispose();
    }
  }
}

export function fixedExtractor(): Extractor {
  return new Extractor(fixedCheckpoint());
}

export function loadCheckpoint(path: string): Extractor {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(path, 'utf8'));
  } catch (err) {
    throw new ExtractError(`cannot load checkpoint ${path}: ${(err as Error).message}`);
  }
  return new Extractor(parsed as Checkpoint);
}
