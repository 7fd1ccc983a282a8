#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { extract } from "./extract.js";

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName("extract")
    .usage("$0 --in <csv|jsonl> --out <path>")
    .option("in", {
      type: "string",
      demandOption: true,
      describe: "Input corpus (CSV with a header row, or JSONL)",
    })
    .option("text-col", {
      type: "string",
      default: "text",
      describe: "Column/field holding the sample text",
    })
    .option("label-col", {
      type: "string",
      default: "label",
      describe: "Column/field holding the class label",
    })
    .option("encoder", {
      type: "string",
      default: "hash-768",
      describe: "Encoder identifier (hash-<dim>)",
    })
    .option("batch", {
      type: "number",
      default: 32,
      describe: "Encoding batch size",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "Output embedding JSONL path",
    })
    .strict()
    .parse();

  const summary = extract({
    input: argv.in,
    textCol: argv["text-col"],
    labelCol: argv["label-col"],
    encoder: argv.encoder,
    batch: argv.batch,
    out: argv.out,
  });

  console.log(
    `wrote ${summary.written} records (${summary.numClasses} classes, dim ${summary.dim}, encoder ${summary.encoder}) to ${summary.outPath}`
  );
  console.log(`label map: ${summary.labelMapPath}`);
  if (summary.skipped > 0) {
    const detail = Object.entries(summary.skipReasons)
      .map(([reason, n]) => `${reason}: ${n}`)
      .join(", ");
    console.log(`skipped ${summary.skipped} rows (${detail})`);
  }
}

main().catch((err: unknown) => {
  console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
  process.exit(1);
});
