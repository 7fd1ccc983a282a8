import { spawnSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

const ROOT = fileURLToPath(new URL("..", import.meta.url));
const CLI = path.join(ROOT, "dist", "cli.js");
const FIXTURE = fileURLToPath(new URL("fixtures/corpus100.csv", import.meta.url));

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "cli-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function runCli(args: string[]) {
  return spawnSync("node", [CLI, ...args], { encoding: "utf-8" });
}

describe("extract CLI", () => {
  it("runs the fixture end to end", () => {
    const out = path.join(dir, "emb.jsonl");
    const result = runCli([
      "--in", FIXTURE,
      "--encoder", "hash-64",
      "--batch", "16",
      "--out", out,
    ]);
    expect(result.status, result.stderr).toBe(0);
    expect(result.stdout).toContain("wrote 100 records");
    expect(result.stdout).toContain("encoder hash-64");
    expect(fs.existsSync(out)).toBe(true);
    expect(fs.existsSync(path.join(dir, "emb.labels.json"))).toBe(true);
  });

  it("fails with a usage error when --in is missing", () => {
    const result = runCli(["--out", path.join(dir, "emb.jsonl")]);
    expect(result.status).not.toBe(0);
    expect(result.stderr).toContain("in");
  });

  it("reports unknown encoders on stderr", () => {
    const result = runCli([
      "--in", FIXTURE,
      "--encoder", "bert-base",
      "--out", path.join(dir, "emb.jsonl"),
    ]);
    expect(result.status).toBe(1);
    expect(result.stderr).toContain("unknown encoder");
  });
});
