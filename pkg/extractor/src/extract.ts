import fs from "node:fs";
import path from "node:path";
import { resolveEncoder } from "./encoder.js";
import { readCorpus } from "./reader.js";
import type { TextRow } from "./reader.js";

export interface ExtractOptions {
  input: string;
  textCol: string;
  labelCol: string;
  encoder: string;
  batch: number;
  out: string;
}

export interface ExtractSummary {
  written: number;
  skipped: number;
  skipReasons: Record<string, number>;
  numClasses: number;
  dim: number;
  encoder: string;
  outPath: string;
  labelMapPath: string;
}

/** Source labels to dense 0..c-1 indices, in order of first appearance. */
export function buildLabelMap(rows: TextRow[]): Map<string, number> {
  const map = new Map<string, number>();
  for (const row of rows) {
    if (!map.has(row.label)) {
      map.set(row.label, map.size);
    }
  }
  return map;
}

function labelMapFilePath(out: string): string {
  const parsed = path.parse(out);
  return path.join(parsed.dir, `${parsed.name}.labels.json`);
}

/**
 * Convert a labeled text corpus into embedding JSONL records
 * (`{"id", "label", "vector"}` per line) plus a label-map JSON that records
 * the encoder identifier, the dimension, and the bijection from source
 * labels to dense class indices.
 */
export function extract(opts: ExtractOptions): ExtractSummary {
  if (!Number.isInteger(opts.batch) || opts.batch < 1) {
    throw new Error(`batch size must be a positive integer, got ${opts.batch}`);
  }
  const encoder = resolveEncoder(opts.encoder);
  const corpus = readCorpus(opts.input, opts.textCol, opts.labelCol);
  const labelMap = buildLabelMap(corpus.rows);

  const lines: string[] = [];
  for (let start = 0; start < corpus.rows.length; start += opts.batch) {
    const chunk = corpus.rows.slice(start, start + opts.batch);
    const vectors = encoder.encodeBatch(chunk.map((row) => row.text));
    chunk.forEach((row, j) => {
      const record = {
        id: row.id,
        label: labelMap.get(row.label),
        vector: vectors[j],
      };
      lines.push(JSON.stringify(record));
    });
  }
  fs.writeFileSync(opts.out, lines.join("\n") + "\n");

  const labelMapPath = labelMapFilePath(opts.out);
  const mapJson = {
    encoder: encoder.name,
    dim: encoder.dim,
    num_classes: labelMap.size,
    labels: Object.fromEntries(labelMap),
    rows_written: corpus.rows.length,
    rows_skipped: corpus.skipped,
    skip_reasons: corpus.skipReasons,
  };
  fs.writeFileSync(labelMapPath, JSON.stringify(mapJson, null, 2) + "\n");

  return {
    written: corpus.rows.length,
    skipped: corpus.skipped,
    skipReasons: corpus.skipReasons,
    numClasses: labelMap.size,
    dim: encoder.dim,
    encoder: encoder.name,
    outPath: opts.out,
    labelMapPath,
  };
}
