/**
 * PNG loading and the filename naming rule.
 *
 * Image files are named `<identity>_c<camera>_<anything>.png`; the last
 * `_c<digits>_` group wins, so identities may themselves contain underscores.
 * Decoded images become float32 RGB tensors in [0, 1]; preprocessing for the
 * extractor is resize (shortest side), center crop, then (x - 0.5) / 0.5
 * normalization.
 */

import { readFileSync, readdirSync } from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';
import { PNG } from 'pngjs';

import { ExtractError } from './emb1';

const NAME_RULE = /^(.*)_c(\d+)_.+\.png$/i;

export interface ParsedName {
  identityId: string;
  cameraId: number;
}

/** Applies the naming rule; null when the filename does not follow it. */
export function parseImageName(filename: string): ParsedName | null {
  const match = NAME_RULE.exec(filename);
  if (!match || match[1].length === 0) {
    return null;
  }
  return { identityId: match[1], cameraId: Number(match[2]) };
}

export function listImages(dir: string): string[] {
  let entries: string[];
  try {
    entries = readdirSync(dir);
  } catch (err) {
    throw new ExtractError(`cannot list image directory ${dir}: ${(err as Error).message}`);
  }
  return entries.filter((name) => name.toLowerCase().endsWith('.png')).sort();
}

export interface DecodedImage {
  width: number;
  height: number;
  /** RGBA byte data, length width*height*4 */
  data: Uint8Array;
}

export function decodePng(filePath: string): DecodedImage {
  let raw: Buffer;
  try {
    raw = readFileSync(filePath);
  } catch (err) {
    throw new ExtractError(`cannot read ${filePath}: ${(err as Error).message}`);
  }
  let png: PNG;
  try {
    png = PNG.sync.read(raw);
  } catch (err) {
    throw new ExtractError(`cannot decode ${filePath}: ${(err as Error).message}`);
  }
  return { width: png.width, height: png.height, data: png.data };
}

/** RGBA bytes -> float32 RGB tensor of shape [height, width, 3] in [0, 1]. */
export function toRgbTensor(image: DecodedImage): tf.Tensor3D {
  const { width, height, data } = image;
  const rgb = new Float32Array(width * height * 3);
  for (let px = 0; px < width * height; px++) {
    rgb[3 * px] = data[4 * px] / 255;
    rgb[3 * px + 1] = data[4 * px + 1] / 255;
    rgb[3 * px + 2] = data[4 * px + 2] / 255;
  }
  return tf.tensor3d(rgb, [height, width, 3]);
}

/** Resize shortest side to `size`, center crop size x size, normalize. */
export function preprocess(image: tf.Tensor3D, size: number): tf.Tensor3D {
  return tf.tidy(() => {
    const [height, width] = image.shape;
    const scale = size / Math.min(height, width);
    const newH = Math.max(size, Math.round(height * scale));
    const newW = Math.max(size, Math.round(width * scale));
    const resized = tf.image.resizeBilinear(image.expandDims(0) as tf.Tensor4D, [newH, newW]);
    const top = Math.floor((newH - size) / 2);
    const left = Math.floor((newW - size) / 2);
    const cropped = tf.slice(resized, [0, top, left, 0], [1, size, size, 3]);
    return cropped.squeeze([0]).sub(0.5).div(0.5) as tf.Tensor3D;
  });
}

export function loadInput(filePath: string, size: number): tf.Tensor3D {
  const decoded = decodePng(filePath);
  const rgb = toRgbTensor(decoded);
  const out = preprocess(rgb, size);
  rgb.dispose();
  return out;
}

export function imageStem(imageId: string): string {
  const slash = imageId.lastIndexOf('/');
  return slash < 0 ? imageId : imageId.slice(slash + 1);
}

export function imagePath(root: string, imageId: string): string {
  return path.join(root, `${imageStem(imageId)}.png`);
}
