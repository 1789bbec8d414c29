export { EMB1_MAGIC, ExtractError, readEmb1, writeEmb1, encodeEmb1 } from './emb1';
export type { EmbeddingMatrix } from './emb1';
export {
  MANIFEST_HEADER,
  encodeManifest,
  readManifest,
  rowsInIndexOrder,
  writeManifest,
} from './manifest';
export type { ManifestRow } from './manifest';
export {
  decodePng,
  imagePath,
  imageStem,
  listImages,
  loadInput,
  parseImageName,
  preprocess,
  toRgbTensor,
} from './images';
export {
  CHECKPOINT_FORMAT,
  Extractor,
  FEATURE_DIM,
  INPUT_SIZE,
  fixedCheckpoint,
  fixedExtractor,
  loadCheckpoint,
  makeToyCheckpoint,
  mulberry32,
} from './extractor';
export type { Checkpoint, CheckpointLayer } from './extractor';
export { extractModelEmbeddings, extractPoolFeatures } from './jobs';
export type { ExtractJob, ExtractSummary, ExtractorChoice } from './jobs';
export { run } from './cli';
