/**
 * Regenerates the committed test fixtures: a 10-explanation extraction
 * with the pinned offline encoder, its expected bytes, and the
 * paraphrase-proximity cosine values.  Run after any encoder change and
 * commit the results.
 */

import { promises as fs } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { HashNgramEncoder } from "./encoders.js";
import { extract } from "./extract.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(HERE, "..", "fixtures");

export const FIXTURE_TEXTS: Array<[string, string]> = [
  ["e0", "the acting is good"],
  ["e1", "the acting is great"],
  ["e2", "great location"],
  ["e3", "great story"],
  ["e4", "don't waste your money"],
  ["e5", "the room was clean"],
  ["e6", "bad service"],
  ["e7", "prices are reasonable"],
  ["e8", "a wonderful movie for all ages"],
  ["e9", "everything was delicious"],
];

function cosine(a: Float32Array, b: Float32Array): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let k = 0; k < a.length; k++) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return dot / Math.sqrt(na * nb);
}

async function main() {
  await fs.mkdir(FIXTURES, { recursive: true });
  const texts = FIXTURE_TEXTS.map(([id, t]) => `${id}\t${t}`).join("\n") + "\n";
  const idMap = FIXTURE_TEXTS.map(([id], k) => `${id}\t${k}`).join("\n") + "\n";
  await fs.writeFile(path.join(FIXTURES, "ten.texts.tsv"), texts, "utf-8");
  await fs.writeFile(path.join(FIXTURES, "ten.ids.map"), idMap, "utf-8");

  const encoder = new HashNgramEncoder(256);
  const outPath = path.join(FIXTURES, "ten.expected.bin");
  const result = await extract(
    path.join(FIXTURES, "ten.texts.tsv"),
    path.join(FIXTURES, "ten.ids.map"),
    outPath,
    encoder,
  );
  console.log(`fixture embeddings: ${result.count} x ${result.dim} (${result.tag})`);

  const rows = await Promise.all(
    FIXTURE_TEXTS.map(async ([, t]) => (await encoder.encode([t]))[0]),
  );
  const values = rows.map((row) => Array.from(row));
  await fs.writeFile(
    path.join(FIXTURES, "ten.values.json"),
    JSON.stringify({ tag: encoder.tag, values }, null, 1),
    "utf-8",
  );

  const paraphrase = {
    encoder: encoder.tag,
    anchor: FIXTURE_TEXTS[0][1],
    paraphrase: FIXTURE_TEXTS[1][1],
    unrelated: FIXTURE_TEXTS[2][1],
    cos_anchor_paraphrase: cosine(rows[0], rows[1]),
    cos_anchor_unrelated: cosine(rows[0], rows[2]),
  };
  await fs.writeFile(
    path.join(FIXTURES, "paraphrase.json"),
    JSON.stringify(paraphrase, null, 1),
    "utf-8",
  );
  console.log(
    `paraphrase cosines: ${paraphrase.cos_anchor_paraphrase.toFixed(4)} vs ` +
    `${paraphrase.cos_anchor_unrelated.toFixed(4)}`,
  );
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
