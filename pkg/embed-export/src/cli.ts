#!/usr/bin/env node
/**
 * embed-export export --mode passages|queries|distributions \
 *     --in INPUT --out OUTPUT [--encoder hash-v1-256] [--batch 32]
 */

import { DEFAULT_ENCODER } from "./encoders.js";
import { ExportMode, runExport } from "./export.js";

function parseArgs(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new Error(`unexpected argument ${JSON.stringify(arg)}`);
    }
    const eq = arg.indexOf("=");
    if (eq >= 0) {
      flags.set(arg.slice(2, eq), arg.slice(eq + 1));
    } else {
      const value = argv[++i];
      if (value === undefined) {
        throw new Error(`flag ${arg} needs a value`);
      }
      flags.set(arg.slice(2), value);
    }
  }
  return flags;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command !== "export") {
      throw new Error(`unknown command ${JSON.stringify(command ?? "")}; expected "export"`);
    }
    const flags = parseArgs(rest);
    for (const key of flags.keys()) {
      if (!["mode", "in", "out", "encoder", "batch"].includes(key)) {
        throw new Error(`unknown flag --${key}`);
      }
    }
    const mode = flags.get("mode");
    if (mode !== "passages" && mode !== "queries" && mode !== "distributions") {
      throw new Error(`--mode must be passages|queries|distributions, got ${mode}`);
    }
    const input = flags.get("in");
    const output = flags.get("out");
    if (!input || !output) {
      throw new Error("--in and --out are required");
    }
    const batchSize = parseInt(flags.get("batch") ?? "32", 10);
    if (!Number.isFinite(batchSize)) {
      throw new Error(`bad --batch value`);
    }
    const summary = runExport({
      input,
      output,
      mode: mode as ExportMode,
      encoderId: flags.get("encoder") ?? DEFAULT_ENCODER,
      batchSize,
    });
    if (summary.truncated > 0) {
      console.error(`warning: truncated ${summary.truncated} over-length input(s) from the left`);
    }
    const dims = summary.dim === null ? "" : `, dim=${summary.dim}`;
    console.log(`wrote ${summary.count} records${dims} to ${output}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

import { fileURLToPath } from "node:url";

if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(main(process.argv.slice(2)));
}
