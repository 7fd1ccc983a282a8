export type { Encoder } from "./encoder.js";
export { resolveEncoder } from "./encoder.js";
export type { CorpusResult, TextRow } from "./reader.js";
export { readCorpus } from "./reader.js";
export type { ExtractOptions, ExtractSummary } from "./extract.js";
export { buildLabelMap, extract } from "./extract.js";
