/** Embedding TSV: "#dim <d>" header, then one "<id>\t<v1>...<vd>" row each. */
export function formatEmbeddingTsv(
  rows: Array<{ id: string; values: Float64Array }>,
  dim: number,
): string {
  const lines = [`#dim ${dim}`];
  for (const row of rows) {
    if (row.values.length !== dim) {
      throw new Error(`row '${row.id}' has ${row.values.length} values, expected ${dim}`);
    }
    // String(Number) is the shortest round-trip decimal form
    lines.push(row.id + '\t' + Array.from(row.values, (v) => String(v)).join('\t'));
  }
  return lines.join('\n') + '\n';
}

export function parseEmbeddingTsv(text: string): { dim: number; rows: Map<string, Float64Array> } {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) throw new Error('empty embedding file');
  const header = lines[0].trim().split(/\s+/);
  if (header.length !== 2 || header[0] !== '#dim') {
    throw new Error(`expected '#dim <d>' header, got '${lines[0]}'`);
  }
  const dim = Number(header[1]);
  if (!Number.isInteger(dim) || dim <= 0) throw new Error(`bad dimension '${header[1]}'`);
  const rows = new Map<string, Float64Array>();
  for (const line of lines.slice(1)) {
    const cells = line.split('\t');
    const id = cells[0];
    if (rows.has(id)) throw new Error(`duplicate id '${id}'`);
    if (cells.length - 1 !== dim) {
      throw new Error(`row '${id}' has ${cells.length - 1} values, expected ${dim}`);
    }
    const values = new Float64Array(dim);
    for (let k = 0; k < dim; k++) {
      const v = Number(cells[k + 1]);
      if (!Number.isFinite(v)) throw new Error(`non-numeric cell in row '${id}'`);
      values[k] = v;
    }
    rows.set(id, values);
  }
  return { dim, rows };
}
