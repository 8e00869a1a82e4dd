#!/usr/bin/env node
/**
 * exprank-embed: write or inspect explanation embedding files.
 *
 *   extract  --texts f --id-map f --out f [--encoder name] [--dim n] [--batch-size n]
 *   validate <path> [--count n]
 *   dump     <path> --out f
 */

import { makeEncoder, DEFAULT_TRANSFORMER } from "./encoders.js";
import { extract } from "./extract.js";
import { dumpEmbeddingText, validateEmbeddingFile } from "./format.js";

function parseFlags(argv: string[]): { positional: string[]; flags: Map<string, string> } {
  const positional: string[] = [];
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const value = argv[i + 1];
      if (value === undefined) {
        throw new Error(`flag ${arg} needs a value`);
      }
      flags.set(arg.slice(2), value);
      i++;
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  const { positional, flags } = parseFlags(rest);
  if (command === "extract") {
    const encoderName = flags.get("encoder") ?? DEFAULT_TRANSFORMER;
    const encoder = await makeEncoder(encoderName, {
      dim: flags.has("dim") ? Number(flags.get("dim")) : undefined,
      batchSize: flags.has("batch-size") ? Number(flags.get("batch-size")) : undefined,
    });
    const result = await extract(
      required(flags, "texts"),
      required(flags, "id-map"),
      required(flags, "out"),
      encoder,
      flags.has("batch-size") ? Number(flags.get("batch-size")) : 128,
    );
    console.log(
      `wrote ${result.count} x ${result.dim} embeddings (${result.tag}) to ${flags.get("out")}`,
    );
    return 0;
  }
  if (command === "validate") {
    const header = await validateEmbeddingFile(
      positional[0],
      flags.has("count") ? Number(flags.get("count")) : undefined,
    );
    console.log(`ok: count=${header.count} dim=${header.dim} tag='${header.tag}'`);
    return 0;
  }
  if (command === "dump") {
    await dumpEmbeddingText(positional[0], required(flags, "out"));
    console.log(`wrote ${flags.get("out")}`);
    return 0;
  }
  console.error(
    "usage: exprank-embed extract --texts f --id-map f --out f [--encoder name]\n" +
    "       exprank-embed validate <path> [--count n]\n" +
    "       exprank-embed dump <path> --out f",
  );
  return 2;
}

main(process.argv.slice(2)).then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err.message ?? err}`);
    process.exit(1);
  },
);
