/**
 * Manifest CSVs pairing embedding rows with image/identity/camera metadata.
 *
 * The header and cell semantics must match the Python loader exactly:
 * `image_id,identity_id,dataset_name,camera_id,row_index`, one row per
 * embedding row, `camera_id` empty when unknown, `row_index` a permutation of
 * 0..rows-1 addressing the paired EMB1 file.
 */

import { readFileSync, writeFileSync } from 'fs';

import { ExtractError } from './emb1';

export const MANIFEST_HEADER = [
  'image_id',
  'identity_id',
  'dataset_name',
  'camera_id',
  'row_index',
] as const;

export interface ManifestRow {
  imageId: string;
  identityId: string;
  datasetName: string;
  cameraId: number | null;
  rowIndex: number;
}

function checkCell(value: string, column: string): string {
  if (/[",\r\n]/.test(value)) {
    throw new ExtractError(`${column} ${JSON.stringify(value)} needs CSV quoting; use plain names`);
  }
  return value;
}

export function encodeManifest(rows: ManifestRow[]): string {
  const lines = [MANIFEST_HEADER.join(',')];
  for (const row of rows) {
    lines.push(
      [
        checkCell(row.imageId, 'image_id'),
        checkCell(row.identityId, 'identity_id'),
        checkCell(row.datasetName, 'dataset_name'),
        row.cameraId === null ? '' : String(row.cameraId),
        String(row.rowIndex),
      ].join(','),
    );
  }
  return lines.join('\r\n') + '\r\n';
}

export function writeManifest(path: string, rows: ManifestRow[]): void {
  writeFileSync(path, encodeManifest(rows), 'utf8');
}

export function readManifest(path: string): ManifestRow[] {
  const text = readFileSync(path, 'utf8');
  const lines = text.split(/\r\n|\n/).filter((line) => line.length > 0);
  if (lines.length === 0 || lines[0] !== MANIFEST_HEADER.join(',')) {
    throw new ExtractError(`bad manifest header in ${path}`);
  }
  const rows: ManifestRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(',');
    if (cells.length !== MANIFEST_HEADER.length) {
      throw new ExtractError(`manifest ${path} line ${i + 1}: expected 5 cells, got ${cells.length}`);
    }
    const rowIndex = Number(cells[4]);
    if (!Number.isInteger(rowIndex) || rowIndex < 0) {
      throw new ExtractError(`manifest ${path} line ${i + 1}: bad row_index ${cells[4]}`);
    }
    const camera = cells[3];
    if (camera !== '' && !/^\d+$/.test(camera)) {
      throw new ExtractError(`manifest ${path} line ${i + 1}: bad camera_id ${camera}`);
    }
    rows.push({
      imageId: cells[0],
      identityId: cells[1],
      datasetName: cells[2],
      cameraId: camera === '' ? null : Number(camera),
      rowIndex,
    });
  }
  return rows;
}

/** Checks row_index forms a permutation of 0..n-1; returns rows sorted by it. */
export function rowsInIndexOrder(rows: ManifestRow[]): ManifestRow[] {
  const seen = new Set<number>();
  for (const row of rows) {
    if (row.rowIndex >= rows.length || seen.has(row.rowIndex)) {
      throw new ExtractError(
        `manifest row_index values must be a permutation of 0..${rows.length - 1}`,
      );
    }
    seen.add(row.rowIndex);
  }
  return [...rows].sort((a, b) => a.rowIndex - b.rowIndex);
}
