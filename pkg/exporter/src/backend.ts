import { TokenEmbedding } from './pool.js';

/** Produces per-token embeddings (with begin/end specials) for one sequence. */
export interface EmbeddingBackend {
  readonly dim: number;
  embedTokens(residues: string): Promise<TokenEmbedding[]>;
}

/** mulberry32: tiny deterministic PRNG, stable across platforms. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Deterministic stand-in model for tests and offline runs: every token's
 * vector is derived from (token code, position), so outputs are reproducible
 * anywhere without weights. Not a trained model.
 */
export class ReferenceBackend implements EmbeddingBackend {
  constructor(readonly dim: number = 1280) {}

  private tokenVector(code: number, position: number): Float64Array {
    const rand = mulberry32(code * 100003 + position * 31 + 7);
    const out = new Float64Array(this.dim);
    for (let k = 0; k < this.dim; k++) out[k] = rand() * 2 - 1;
    return out;
  }

  async embedTokens(residues: string): Promise<TokenEmbedding[]> {
    const tokens: TokenEmbedding[] = [];
    tokens.push({ tag: 'bos', values: this.tokenVector(1, 0) });
    for (let i = 0; i < residues.length; i++) {
      tokens.push({
        tag: 'residue',
        values: this.tokenVector(residues.charCodeAt(i), i + 1),
      });
    }
    tokens.push({ tag: 'eos', values: this.tokenVector(2, residues.length + 1) });
    return tokens;
  }
}

/**
 * Real pretrained-model backend through transformers.js. The dependency and
 * its weights are resolved at run time; a clear error is raised when either
 * is unavailable (offline environments fall back to the reference backend
 * explicitly via --backend reference).
 */
export class TransformersBackend implements EmbeddingBackend {
  private pipe: ((text: string, opts: object) => Promise<{ dims: number[]; data: Float32Array }>) | null = null;

  constructor(
    readonly dim: number = 1280,
    readonly model: string = 'facebook/esm1b_t33_650M_UR50S',
  ) {}

  private async load() {
    if (this.pipe) return this.pipe;
    let mod: any;
    try {
      mod = await import('@huggingface/transformers' as string);
    } catch {
      throw new Error(
        "transformers backend unavailable: install '@huggingface/transformers' " +
          'or use --backend reference',
      );
    }
    try {
      this.pipe = await mod.pipeline('feature-extraction', this.model);
    } catch (err) {
      throw new Error(`missing weights for '${this.model}': ${(err as Error).message}`);
    }
    return this.pipe!;
  }

  async embedTokens(residues: string): Promise<TokenEmbedding[]> {
    const pipe = await this.load();
    const output = await pipe!(residues, { pooling: 'none' });
    const [, tokens, width] = output.dims.length === 3 ? output.dims : [1, ...output.dims];
    if (width !== this.dim) {
      throw new Error(`model width ${width} does not match declared dim ${this.dim}`);
    }
    const out: TokenEmbedding[] = [];
    for (let t = 0; t < tokens; t++) {
      const values = new Float64Array(this.dim);
      for (let k = 0; k < this.dim; k++) values[k] = output.data[t * width + k];
      const tag = t === 0 ? 'bos' : t === tokens - 1 ? 'eos' : 'residue';
      out.push({ tag, values });
    }
    return out;
  }
}

export function makeBackend(name: string, dim: number, model?: string): EmbeddingBackend {
  if (name === 'reference') return new ReferenceBackend(dim);
  if (name === 'transformers') return new TransformersBackend(dim, model);
  throw new Error(`unknown backend '${name}' (expected 'transformers' or 'reference')`);
}
