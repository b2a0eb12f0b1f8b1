/**
 * Export jobs: encode corpus passages or query histories into EMB1 files,
 * or pass through externally computed topic distributions.
 *
 * One vector per input record, file order equals input order, ids copied
 * verbatim.  Query histories are rendered as "<speaker>: <text>" lines
 * joined by newlines before encoding.
 */

import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { dirname } from "node:path";

import { Emb1Record, writeEmb1 } from "./emb1.js";
import { Encoder, loadEncoder } from "./encoders.js";
import { parseCorpus, parseDistributions, parseQueries } from "./jsonl.js";

export type ExportMode = "passages" | "queries" | "distributions";

export interface ExportJob {
  input: string;
  output: string;
  mode: ExportMode;
  encoderId: string;
  batchSize: number;
}

export interface ExportSummary {
  count: number;
  dim: number | null;
  truncated: number;
}

export function renderHistory(turns: Array<{ speaker: string; text: string }>): string {
  return turns.map((t) => `${t.speaker}: ${t.text}`).join("\n");
}

function encodeAll(
  items: Array<{ id: string; text: string }>,
  encoder: Encoder,
  batchSize: number,
): { records: Emb1Record[]; truncated: number } {
  const records: Emb1Record[] = [];
  let truncated = 0;
  for (let start = 0; start < items.length; start += batchSize) {
    for (const item of items.slice(start, start + batchSize)) {
      const { vector, truncated: wasTruncated } = encoder.encode(item.text);
      if (wasTruncated) truncated++;
      records.push({ id: item.id, vector });
    }
  }
  return { records, truncated };
}

export function runExport(job: ExportJob): ExportSummary {
  if (job.batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${job.batchSize}`);
  }
  const content = readFileSync(job.input, "utf-8");
  mkdirSync(dirname(job.output), { recursive: true });

  if (job.mode === "distributions") {
    const records = parseDistributions(content, job.input);
    const out = records
      .map((r) => JSON.stringify({ id: r.id, weights: r.weights }))
      .join("\n");
    writeFileSync(job.output, out + "\n");
    return { count: records.length, dim: null, truncated: 0 };
  }

  const encoder = loadEncoder(job.encoderId);
  let items: Array<{ id: string; text: string }>;
  if (job.mode === "passages") {
    items = parseCorpus(content, job.input).map((p) => ({ id: p.id, text: p.text }));
  } else if (job.mode === "queries") {
    items = parseQueries(content, job.input).map((q) => ({
      id: q.id,
      text: renderHistory(q.turns),
    }));
  } else {
    throw new Error(`unknown mode ${JSON.stringify(job.mode)}`);
  }
  const seen = new Set<string>();
  for (const item of items) {
    if (seen.has(item.id)) {
      throw new Error(`${job.input}: duplicate id ${JSON.stringify(item.id)}`);
    }
    seen.add(item.id);
  }
  const { records, truncated } = encodeAll(items, encoder, job.batchSize);
  writeFileSync(job.output, writeEmb1(records, encoder.dim));
  return { count: records.length, dim: encoder.dim, truncated };
}
