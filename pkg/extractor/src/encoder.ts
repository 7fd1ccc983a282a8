export interface Encoder {
  readonly name: string;
  readonly dim: number;
  encodeBatch(texts: string[]): number[][];
}

const MAX_DIM = 4096;

function fnv1a(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

function tokenize(text: string): string[] {
  return text.toLowerCase().split(/[^\p{L}\p{N}]+/u).filter((t) => t.length > 0);
}

/**
 * Deterministic signed feature-hashing encoder: unigram and bigram token
 * features are hashed into `dim` buckets with a sign bit, then the vector
 * is L2-normalized and rounded to float32. A pure function of the text, so
 * output never depends on batch size, process, or platform.
 */
function hashEncoder(dim: number): Encoder {
  const encodeOne = (text: string): number[] => {
    const v = new Float64Array(dim);
    const tokens = tokenize(text);
    const addFeature = (feature: string) => {
      const h = fnv1a(feature);
      v[h % dim] += h >>> 31 ? -1 : 1;
    };
    for (let i = 0; i < tokens.length; i++) {
      addFeature(tokens[i]);
      if (i + 1 < tokens.length) {
        addFeature(`${tokens[i]} ${tokens[i + 1]}`);
      }
    }
    let sq = 0;
    for (let j = 0; j < dim; j++) {
      sq += v[j] * v[j];
    }
    let norm = Math.sqrt(sq);
    if (norm === 0) {
      // No token features (e.g. punctuation-only text): fall back to one
      // feature for the raw string so the vector is never all zeros.
      const h = fnv1a(text);
      v[h % dim] = 1;
      norm = 1;
    }
    const out = new Array<number>(dim);
    for (let j = 0; j < dim; j++) {
      out[j] = Math.fround(v[j] / norm);
    }
    return out;
  };
  return {
    name: `hash-${dim}`,
    dim,
    encodeBatch: (texts) => texts.map(encodeOne),
  };
}

export function resolveEncoder(name: string): Encoder {
  const match = /^hash-(\d+)$/.exec(name);
  if (match) {
    const dim = Number(match[1]);
    if (dim >= 1 && dim <= MAX_DIM) {
      return hashEncoder(dim);
    }
    throw new Error(`encoder dimension must be in [1, ${MAX_DIM}], got ${dim}`);
  }
  throw new Error(`unknown encoder "${name}" (available: hash-<dim>, e.g. hash-768)`);
}
