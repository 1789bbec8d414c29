import { mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import * as path from 'path';

import { PNG } from 'pngjs';

export function tempDir(prefix: string): string {
  return mkdtempSync(path.join(tmpdir(), `${prefix}-`));
}

export type Paint = (x: number, y: number) => [number, number, number];

export function pngBuffer(width: number, height: number, paint: Paint): Buffer {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (width * y + x) << 2;
      const [r, g, b] = paint(x, y);
      png.data[i] = r;
      png.data[i + 1] = g;
      png.data[i + 2] = b;
      png.data[i + 3] = 255;
    }
  }
  return PNG.sync.write(png);
}

/** Unique texture per index so no two fixture images embed identically. */
export function texture(index: number): Paint {
  return (x, y) => [
    (x * (3 + index) + y) % 256,
    (y * (5 + index) + x) % 256,
    (x ^ (y + index)) % 256,
  ];
}

export interface FixtureImage {
  name: string;
  width?: number;
  height?: number;
}

/** Writes PNGs into dir; returns the filenames in sorted order. */
export function writeImages(dir: string, images: FixtureImage[]): string[] {
  images.forEach((image, i) => {
    const buf = pngBuffer(image.width ?? 40, image.height ?? 36, texture(i));
    writeFileSync(path.join(dir, image.name), buf);
  });
  return images.map((image) => image.name).sort();
}

/** Ten well-formed images: 3 identities spread over 2 cameras. */
export function tenImages(): FixtureImage[] {
  const names = [
    'alice_c0_000.png',
    'alice_c0_001.png',
    'alice_c1_002.png',
    'alice_c1_003.png',
    'bob_c0_004.png',
    'bob_c0_005.png',
    'bob_c1_006.png',
    'bob_c1_007.png',
    'carol_c0_008.png',
    'carol_c1_009.png',
  ];
  return names.map((name) => ({ name }));
}
