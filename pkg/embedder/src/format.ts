/**
 * Binary embedding file layout (little-endian), shared with the Python
 * reader: magic "XEMB", u32 count, u32 dim, u32 tag length, UTF-8 tag,
 * then count*dim float32 values in dense explanation-index order.
 */

import { promises as fs } from "node:fs";

export const MAGIC = Buffer.from("XEMB", "ascii");
const HEADER_FIXED = 16;

export class EmbeddingFormatError extends Error {}

export interface EmbeddingHeader {
  count: number;
  dim: number;
  tag: string;
}

export function encodeEmbeddingFile(rows: Float32Array[], tag: string): Buffer {
  if (rows.length === 0) {
    throw new EmbeddingFormatError("no rows to write");
  }
  const dim = rows[0].length;
  for (const [idx, row] of rows.entries()) {
    if (row.length !== dim) {
      throw new EmbeddingFormatError(`row ${idx} has dim ${row.length} != ${dim}`);
    }
    for (const v of row) {
      if (!Number.isFinite(v)) {
        throw new EmbeddingFormatError(`non-finite value in row ${idx}`);
      }
    }
  }
  const tagBytes = Buffer.from(tag, "utf-8");
  const body = Buffer.alloc(rows.length * dim * 4);
  const view = new DataView(body.buffer, body.byteOffset, body.byteLength);
  let offset = 0;
  for (const row of rows) {
    for (const v of row) {
      view.setFloat32(offset, v, true);
      offset += 4;
    }
  }
  const header = Buffer.alloc(HEADER_FIXED);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(rows.length, 4);
  header.writeUInt32LE(dim, 8);
  header.writeUInt32LE(tagBytes.length, 12);
  return Buffer.concat([header, tagBytes, body]);
}

export async function writeEmbeddingFile(
  path: string,
  rows: Float32Array[],
  tag: string,
): Promise<void> {
  await fs.writeFile(path, encodeEmbeddingFile(rows, tag));
}

export function decodeEmbeddingFile(blob: Buffer): {
  header: EmbeddingHeader;
  rows: Float32Array[];
} {
  if (blob.length < HEADER_FIXED || !blob.subarray(0, 4).equals(MAGIC)) {
    throw new EmbeddingFormatError("not an embedding file");
  }
  const count = blob.readUInt32LE(4);
  const dim = blob.readUInt32LE(8);
  const tagLen = blob.readUInt32LE(12);
  const bodyStart = HEADER_FIXED + tagLen;
  if (blob.length < bodyStart) {
    throw new EmbeddingFormatError("truncated header");
  }
  const tag = blob.subarray(HEADER_FIXED, bodyStart).toString("utf-8");
  const expected = count * dim * 4;
  if (blob.length - bodyStart !== expected) {
    throw new EmbeddingFormatError(
      `expected ${expected} payload bytes, found ${blob.length - bodyStart}`,
    );
  }
  const view = new DataView(blob.buffer, blob.byteOffset + bodyStart, expected);
  const rows: Float32Array[] = [];
  for (let r = 0; r < count; r++) {
    const row = new Float32Array(dim);
    for (let k = 0; k < dim; k++) {
      row[k] = view.getFloat32((r * dim + k) * 4, true);
    }
    rows.push(row);
  }
  return { header: { count, dim, tag }, rows };
}

export async function readEmbeddingFile(path: string) {
  return decodeEmbeddingFile(await fs.readFile(path));
}

/** Header/payload consistency, finiteness and optional coverage check. */
export async function validateEmbeddingFile(
  path: string,
  expectedCount?: number,
): Promise<EmbeddingHeader> {
  const { header, rows } = await readEmbeddingFile(path);
  for (const [idx, row] of rows.entries()) {
    for (const v of row) {
      if (!Number.isFinite(v)) {
        throw new EmbeddingFormatError(`non-finite value at row ${idx}`);
      }
    }
  }
  if (expectedCount !== undefined && header.count !== expectedCount) {
    throw new EmbeddingFormatError(
      `${header.count} rows do not cover the ${expectedCount}-explanation universe`,
    );
  }
  return header;
}

/** Debug dump: one `index<TAB>v1,v2,...` line per row. */
export async function dumpEmbeddingText(path: string, outPath: string) {
  const { header, rows } = await readEmbeddingFile(path);
  const lines = [
    `# tag=${header.tag} count=${header.count} dim=${header.dim}`,
  ];
  rows.forEach((row, idx) => {
    lines.push(`${idx}\t${Array.from(row).join(",")}`);
  });
  await fs.writeFile(outPath, lines.join("\n") + "\n", "utf-8");
}
