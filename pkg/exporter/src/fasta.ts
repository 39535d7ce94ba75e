export interface FastaRecord {
  id: string;
  residues: string;
}

const AMINO_ACIDS = new Set('ACDEFGHIKLMNPQRSTVWY'.split(''));

/**
 * Parse FASTA text into records. Residues are uppercased and joined across
 * wrapped lines; the id is the first whitespace token of the header. Throws
 * on sequence data before a header, empty records, or illegal residues.
 */
export function parseFasta(text: string): FastaRecord[] {
  const records: FastaRecord[] = [];
  let id: string | null = null;
  let headerLine = 0;
  let parts: string[] = [];

  const flush = () => {
    if (id === null) return;
    const residues = parts.join('');
    if (!residues) {
      throw new Error(`line ${headerLine}: record '${id}' has an empty body`);
    }
    records.push({ id, residues });
  };

  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    if (line.startsWith('>')) {
      flush();
      const tokens = line.slice(1).trim().split(/\s+/);
      if (!tokens[0]) throw new Error(`line ${i + 1}: header with no id`);
      id = tokens[0];
      headerLine = i + 1;
      parts = [];
    } else {
      if (id === null) {
        throw new Error(`line ${i + 1}: sequence data before any '>' header`);
      }
      const chunk = line.toUpperCase();
      for (const ch of chunk) {
        if (!AMINO_ACIDS.has(ch)) {
          throw new Error(`line ${i + 1}: illegal residue symbol '${ch}'`);
        }
      }
      parts.push(chunk);
    }
  }
  flush();
  return records;
}
