import fs from "node:fs";
import path from "node:path";
import Papa from "papaparse";

export interface TextRow {
  id: string;
  text: string;
  label: string;
}

export interface CorpusResult {
  rows: TextRow[];
  total: number;
  skipped: number;
  skipReasons: Record<string, number>;
}

const MAX_SKIP_FRACTION = 0.1;

interface RawRow {
  id: unknown;
  text: unknown;
  label: unknown;
  unparsable?: boolean;
}

function parseCsv(content: string, textCol: string, labelCol: string): RawRow[] {
  const parsed = Papa.parse<Record<string, string>>(content, {
    header: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  for (const col of [textCol, labelCol]) {
    if (!fields.includes(col)) {
      throw new Error(`column "${col}" not found (have: ${fields.join(", ")})`);
    }
  }
  return parsed.data.map((row) => ({
    id: row.id,
    text: row[textCol],
    label: row[labelCol],
  }));
}

function parseJsonl(content: string, textCol: string, labelCol: string): RawRow[] {
  const bad = { id: undefined, text: undefined, label: undefined, unparsable: true };
  return content
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => {
      let obj: unknown;
      try {
        obj = JSON.parse(line);
      } catch {
        return bad;
      }
      if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
        return bad;
      }
      const record = obj as Record<string, unknown>;
      return { id: record.id, text: record[textCol], label: record[labelCol] };
    });
}

function count(reasons: Record<string, number>, reason: string): void {
  reasons[reason] = (reasons[reason] ?? 0) + 1;
}

/**
 * Read a labeled text corpus from CSV or JSONL (chosen by file extension).
 *
 * Unreadable rows (empty text, missing or non-scalar label, duplicate id,
 * unparsable line) are skipped and counted per reason; reading aborts if
 * more than 10% of the rows are skipped. Row ids come from an `id` field
 * when present, otherwise from the 0-based row position.
 */
export function readCorpus(
  filePath: string,
  textCol: string,
  labelCol: string
): CorpusResult {
  const content = fs.readFileSync(filePath, "utf-8");
  const isJsonl = [".jsonl", ".ndjson", ".json"].includes(
    path.extname(filePath).toLowerCase()
  );
  const raw = isJsonl
    ? parseJsonl(content, textCol, labelCol)
    : parseCsv(content, textCol, labelCol);
  if (raw.length === 0) {
    throw new Error(`no data rows in ${filePath}`);
  }

  const rows: TextRow[] = [];
  const skipReasons: Record<string, number> = {};
  const seenIds = new Set<string>();
  raw.forEach((row, i) => {
    if (row.unparsable) {
      count(skipReasons, "unparsable line");
      return;
    }
    if (typeof row.text !== "string" || row.text.trim().length === 0) {
      count(skipReasons, "empty or missing text");
      return;
    }
    const labelOk =
      typeof row.label === "string"
        ? row.label.trim().length > 0
        : typeof row.label === "number" && Number.isFinite(row.label);
    if (!labelOk) {
      count(skipReasons, "missing or invalid label");
      return;
    }
    const id =
      typeof row.id === "string" && row.id.trim().length > 0
        ? row.id
        : typeof row.id === "number"
          ? String(row.id)
          : `row-${i}`;
    if (seenIds.has(id)) {
      count(skipReasons, "duplicate id");
      return;
    }
    seenIds.add(id);
    rows.push({ id, text: row.text, label: String(row.label).trim() });
  });

  const skipped = raw.length - rows.length;
  if (skipped > raw.length * MAX_SKIP_FRACTION) {
    const detail = Object.entries(skipReasons)
      .map(([reason, n]) => `${reason}: ${n}`)
      .join(", ");
    throw new Error(
      `aborting: ${skipped} of ${raw.length} rows unreadable (> 10%) — ${detail}`
    );
  }
  return { rows, total: raw.length, skipped, skipReasons };
}
