/** JSON Lines readers for the corpus, query, and distribution schemas. */

export interface CorpusRecord {
  id: string;
  page_id: string;
  text: string;
}

export interface QueryTurn {
  speaker: string;
  text: string;
}

export interface QueryRecord {
  id: string;
  turns: QueryTurn[];
}

export interface DistributionRecord {
  id: string;
  weights: number[];
}

function parseLines(content: string, path: string): Array<{ lineno: number; obj: any }> {
  const out: Array<{ lineno: number; obj: any }> = [];
  const lines = content.split("\n");
  for (let i = 0; i < lines.length; i++) {
    if (!lines[i].trim()) continue;
    let obj: unknown;
    try {
      obj = JSON.parse(lines[i]);
    } catch {
      throw new Error(`${path}: malformed JSON on line ${i + 1}`);
    }
    if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
      throw new Error(`${path}: line ${i + 1} is not a JSON object`);
    }
    out.push({ lineno: i + 1, obj });
  }
  if (out.length === 0) {
    throw new Error(`${path}: empty file`);
  }
  return out;
}

function requireString(obj: any, key: string, path: string, lineno: number): string {
  const value = obj[key];
  if (typeof value !== "string") {
    throw new Error(`${path}: line ${lineno} missing string field ${JSON.stringify(key)}`);
  }
  return value;
}

export function parseCorpus(content: string, path: string): CorpusRecord[] {
  return parseLines(content, path).map(({ lineno, obj }) => ({
    id: requireString(obj, "id", path, lineno),
    page_id: requireString(obj, "page_id", path, lineno),
    text: requireString(obj, "text", path, lineno),
  }));
}

export function parseQueries(content: string, path: string): QueryRecord[] {
  return parseLines(content, path).map(({ lineno, obj }) => {
    const id = requireString(obj, "id", path, lineno);
    if (!Array.isArray(obj.turns) || obj.turns.length === 0) {
      throw new Error(`${path}: line ${lineno}: query ${id} has no turns`);
    }
    const turns = obj.turns.map((t: any) => ({
      speaker: typeof t?.speaker === "string" ? t.speaker : "",
      text: typeof t?.text === "string" ? t.text : "",
    }));
    return { id, turns };
  });
}

const SIMPLEX_TOL = 1e-6;

export function parseDistributions(content: string, path: string): DistributionRecord[] {
  let width: number | null = null;
  return parseLines(content, path).map(({ lineno, obj }) => {
    const id = requireString(obj, "id", path, lineno);
    const weights = obj.weights;
    if (!Array.isArray(weights) || weights.some((w: any) => typeof w !== "number")) {
      throw new Error(`${path}: line ${lineno}: weights must be a number array`);
    }
    if (width === null) {
      width = weights.length;
    } else if (weights.length !== width) {
      throw new Error(`${path}: line ${lineno}: ${weights.length} weights, expected ${width}`);
    }
    if (weights.some((w: number) => w < 0)) {
      throw new Error(`${path}: line ${lineno}: negative weight`);
    }
    const sum = weights.reduce((a: number, b: number) => a + b, 0);
    if (Math.abs(sum - 1) > SIMPLEX_TOL) {
      throw new Error(`${path}: line ${lineno}: weights sum to ${sum}, not 1`);
    }
    return { id, weights };
  });
}
