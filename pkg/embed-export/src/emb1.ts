/**
 * The "EMB1" binary embedding layout (all little-endian):
 *
 *   magic   4 bytes  "EMB1"
 *   dim     u32
 *   count   u64
 *   then `count` records of:
 *     idLen   u32
 *     id      idLen bytes, UTF-8
 *     vector  dim float32 components
 *
 * Writing is deterministic byte-for-byte for the same records.
 */

export interface Emb1Record {
  id: string;
  vector: Float32Array;
}

const MAGIC = Buffer.from("EMB1", "ascii");

export function writeEmb1(records: Emb1Record[], dim: number): Buffer {
  const idBytes = records.map((r) => Buffer.from(r.id, "utf-8"));
  let size = MAGIC.length + 4 + 8;
  for (const raw of idBytes) {
    size += 4 + raw.length + 4 * dim;
  }
  const buf = Buffer.alloc(size);
  let offset = MAGIC.copy(buf, 0);
  offset = buf.writeUInt32LE(dim, offset);
  offset = buf.writeBigUInt64LE(BigInt(records.length), offset);
  for (let i = 0; i < records.length; i++) {
    const { vector } = records[i];
    if (vector.length !== dim) {
      throw new Error(`record ${records[i].id}: vector length ${vector.length} != dim ${dim}`);
    }
    offset = buf.writeUInt32LE(idBytes[i].length, offset);
    offset += idBytes[i].copy(buf, offset);
    for (let j = 0; j < dim; j++) {
      offset = buf.writeFloatLE(vector[j], offset);
    }
  }
  return buf;
}

export function readEmb1(buf: Buffer): { dim: number; records: Emb1Record[] } {
  if (buf.length < 16 || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new Error("bad magic bytes (expected EMB1)");
  }
  const dim = buf.readUInt32LE(4);
  const count = Number(buf.readBigUInt64LE(8));
  let offset = 16;
  const records: Emb1Record[] = [];
  for (let r = 0; r < count; r++) {
    if (offset + 4 > buf.length) {
      throw new Error(`unexpected end of file after row ${r}`);
    }
    const idLen = buf.readUInt32LE(offset);
    offset += 4;
    if (offset + idLen + 4 * dim > buf.length) {
      throw new Error(`unexpected end of file after row ${r}`);
    }
    const id = buf.subarray(offset, offset + idLen).toString("utf-8");
    offset += idLen;
    const vector = new Float32Array(dim);
    for (let j = 0; j < dim; j++) {
      vector[j] = buf.readFloatLE(offset);
      offset += 4;
    }
    records.push({ id, vector });
  }
  if (offset !== buf.length) {
    throw new Error(`${buf.length - offset} trailing bytes after declared ${count} rows`);
  }
  return { dim, records };
}
