import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";

import { describe, expect, it } from "vitest";

import {
  EmbeddingFormatError,
  decodeEmbeddingFile,
  dumpEmbeddingText,
  encodeEmbeddingFile,
  validateEmbeddingFile,
  writeEmbeddingFile,
} from "../src/format.js";

function tmp(name: string): string {
  return path.join(mkdtempSync(path.join(tmpdir(), "emb-")), name);
}

describe("binary format", () => {
  it("round-trips bytes exactly", () => {
    const rows = [
      Float32Array.from([1.5, -2.25, 3.125]),
      Float32Array.from([0.1, 0.2, 0.3]),
    ];
    const blob = encodeEmbeddingFile(rows, "enc v1");
    const { header, rows: back } = decodeEmbeddingFile(blob);
    expect(header).toEqual({ count: 2, dim: 3, tag: "enc v1" });
    expect(Array.from(back[0])).toEqual(Array.from(rows[0]));
    expect(Array.from(back[1])).toEqual(Array.from(rows[1]));
    expect(encodeEmbeddingFile(back, header.tag).equals(blob)).toBe(true);
  });

  it("rejects truncated payloads", () => {
    const blob = encodeEmbeddingFile([Float32Array.from([1, 2])], "t");
    expect(() => decodeEmbeddingFile(blob.subarray(0, blob.length - 2)))
      .toThrow(EmbeddingFormatError);
  });

  it("rejects bad magic", () => {
    const blob = Buffer.concat([
      Buffer.from("NOPE"),
      Buffer.alloc(12),
    ]);
    expect(() => decodeEmbeddingFile(blob)).toThrow(/not an embedding file/);
  });

  it("rejects non-finite rows at write time", () => {
    expect(() => encodeEmbeddingFile([Float32Array.from([NaN])], "t"))
      .toThrow(/non-finite value in row 0/);
  });

  it("validates universe coverage", async () => {
    const file = tmp("e.bin");
    await writeEmbeddingFile(file, [Float32Array.from([0, 1])], "t");
    await expect(validateEmbeddingFile(file, 1)).resolves.toMatchObject({
      count: 1,
    });
    await expect(validateEmbeddingFile(file, 3)).rejects.toThrow(/universe/);
  });

  it("reports the row of a corrupted value", async () => {
    const rows = [Float32Array.from([1]), Float32Array.from([2])];
    const blob = encodeEmbeddingFile(rows, "t");
    // overwrite row 1's float with a NaN bit pattern
    blob.writeUInt32LE(0x7fc00000, blob.length - 4);
    const file = tmp("bad.bin");
    writeFileSync(file, blob);
    await expect(validateEmbeddingFile(file)).rejects.toThrow(/row 1/);
  });

  it("dumps readable text", async () => {
    const file = tmp("d.bin");
    await writeEmbeddingFile(file, [Float32Array.from([1, 2])], "enc");
    const out = tmp("d.txt");
    await dumpEmbeddingText(file, out);
    const { readFileSync } = await import("node:fs");
    const lines = readFileSync(out, "utf-8").trim().split("\n");
    expect(lines[0]).toContain("tag=enc");
    expect(lines[1].startsWith("0\t")).toBe(true);
  });
});
