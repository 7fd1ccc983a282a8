import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { readCorpus } from "../src/reader.js";

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "reader-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function write(name: string, content: string): string {
  const p = path.join(dir, name);
  fs.writeFileSync(p, content);
  return p;
}

describe("readCorpus (csv)", () => {
  it("parses quoted fields and assigns positional ids", () => {
    const p = write(
      "c.csv",
      'text,label\n"hello, world",a\nplain text,b\n'
    );
    const result = readCorpus(p, "text", "label");
    expect(result.rows).toEqual([
      { id: "row-0", text: "hello, world", label: "a" },
      { id: "row-1", text: "plain text", label: "b" },
    ]);
    expect(result.skipped).toBe(0);
  });

  it("respects custom column names", () => {
    const p = write("c.csv", "body,tag\nsome words,x\n");
    const result = readCorpus(p, "body", "tag");
    expect(result.rows[0].text).toBe("some words");
    expect(result.rows[0].label).toBe("x");
  });

  it("fails fast when a column is missing", () => {
    const p = write("c.csv", "text,label\na,b\n");
    expect(() => readCorpus(p, "body", "label")).toThrow(/column "body" not found/);
  });

  it("skips empty-text and unlabeled rows up to the 10% budget", () => {
    const good = Array.from({ length: 18 }, (_, i) => `text ${i},a`);
    const p = write("c.csv", "text,label\n" + good.join("\n") + "\n,a\nno label,\n");
    const result = readCorpus(p, "text", "label");
    expect(result.total).toBe(20);
    expect(result.rows).toHaveLength(18);
    expect(result.skipReasons).toEqual({
      "empty or missing text": 1,
      "missing or invalid label": 1,
    });
  });

  it("aborts when more than 10% of rows are unreadable", () => {
    const p = write("c.csv", "text,label\nok,a\n,a\nok2,b\nok3,b\nok4,a\n");
    expect(() => readCorpus(p, "text", "label")).toThrow(/1 of 5 rows unreadable/);
  });

  it("rejects an empty file", () => {
    const p = write("c.csv", "text,label\n");
    expect(() => readCorpus(p, "text", "label")).toThrow(/no data rows/);
  });
});

describe("readCorpus (jsonl)", () => {
  it("keeps supplied ids and stringifies numeric labels", () => {
    const p = write(
      "c.jsonl",
      [
        '{"id": "x1", "text": "alpha", "label": 2}',
        '{"text": "beta", "label": "news"}',
      ].join("\n") + "\n"
    );
    const result = readCorpus(p, "text", "label");
    expect(result.rows).toEqual([
      { id: "x1", text: "alpha", label: "2" },
      { id: "row-1", text: "beta", label: "news" },
    ]);
  });

  it("skips unparsable lines and duplicate ids, counting reasons", () => {
    const good = Array.from(
      { length: 18 },
      (_, i) => `{"id": "g${i}", "text": "t${i}", "label": "a"}`
    );
    const lines = [
      ...good,
      "not json at all",
      '{"id": "g0", "text": "dup", "label": "a"}',
    ];
    const p = write("c.jsonl", lines.join("\n") + "\n");
    const result = readCorpus(p, "text", "label");
    expect(result.rows).toHaveLength(18);
    expect(result.skipReasons).toEqual({
      "unparsable line": 1,
      "duplicate id": 1,
    });
  });

  it("treats non-string text and boolean labels as unreadable", () => {
    const good = Array.from(
      { length: 18 },
      (_, i) => `{"text": "t${i}", "label": "a"}`
    );
    const lines = [
      ...good,
      '{"text": 42, "label": "a"}',
      '{"text": "fine", "label": true}',
    ];
    const p = write("c.jsonl", lines.join("\n") + "\n");
    const result = readCorpus(p, "text", "label");
    expect(result.rows).toHaveLength(18);
    expect(result.skipReasons).toEqual({
      "empty or missing text": 1,
      "missing or invalid label": 1,
    });
  });
});
