export type TokenTag = 'bos' | 'residue' | 'eos';

export interface TokenEmbedding {
  tag: TokenTag;
  values: Float64Array;
}

/**
 * Mean over residue positions only; begin/end special tokens are excluded
 * from the average.
 */
export function meanPoolResidues(tokens: TokenEmbedding[]): Float64Array {
  const residues = tokens.filter((t) => t.tag === 'residue');
  if (residues.length === 0) {
    throw new Error('no residue positions to pool');
  }
  const dim = residues[0].values.length;
  const out = new Float64Array(dim);
  for (const tok of residues) {
    if (tok.values.length !== dim) {
      throw new Error('inconsistent embedding widths across positions');
    }
    for (let k = 0; k < dim; k++) out[k] += tok.values[k];
  }
  for (let k = 0; k < dim; k++) out[k] /= residues.length;
  return out;
}
