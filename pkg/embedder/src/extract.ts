/**
 * Extraction: read explanation texts and the ID map, encode every
 * explanation in dense-index order, and write the binary embedding file.
 */

import { promises as fs } from "node:fs";

import { Encoder } from "./encoders.js";
import { writeEmbeddingFile } from "./format.js";

export class ExtractError extends Error {}

/** `explanation<TAB>text` lines keyed by raw explanation ID. */
export async function readTextFile(path: string): Promise<Map<string, string>> {
  const texts = new Map<string, string>();
  const raw = await fs.readFile(path, "utf-8");
  raw.split("\n").forEach((line, idx) => {
    if (!line) return;
    const tab = line.indexOf("\t");
    if (tab < 0) {
      throw new ExtractError(`${path}:${idx + 1}: expected 'id<TAB>text'`);
    }
    texts.set(line.slice(0, tab), line.slice(tab + 1));
  });
  return texts;
}

/** `raw_id<TAB>dense_index` lines; returns raw IDs in dense order. */
export async function readIdMap(path: string): Promise<string[]> {
  const ids: string[] = [];
  const raw = await fs.readFile(path, "utf-8");
  raw.split("\n").forEach((line, idx) => {
    if (!line) return;
    const [rawId, dense] = line.split("\t");
    if (dense === undefined || Number(dense) !== ids.length) {
      throw new ExtractError(`${path}:${idx + 1}: non-contiguous dense index`);
    }
    ids.push(rawId);
  });
  if (ids.length === 0) {
    throw new ExtractError(`${path}: empty id map`);
  }
  return ids;
}

export interface ExtractResult {
  count: number;
  dim: number;
  tag: string;
}

export async function extract(
  textFile: string,
  idMapFile: string,
  outPath: string,
  encoder: Encoder,
  batchSize = 128,
): Promise<ExtractResult> {
  const texts = await readTextFile(textFile);
  const ids = await readIdMap(idMapFile);
  const ordered: string[] = [];
  for (const [dense, rawId] of ids.entries()) {
    const text = texts.get(rawId);
    if (text === undefined) {
      throw new ExtractError(`missing text for explanation ${rawId} (index ${dense})`);
    }
    ordered.push(text);
  }
  const rows: Float32Array[] = [];
  for (let start = 0; start < ordered.length; start += batchSize) {
    const batch = await encoder.encode(ordered.slice(start, start + batchSize));
    rows.push(...batch);
  }
  await writeEmbeddingFile(outPath, rows, encoder.tag);
  return { count: rows.length, dim: rows[0].length, tag: encoder.tag };
}
