import { EmbeddingBackend } from './backend.js';
import { FastaRecord } from './fasta.js';
import { meanPoolResidues, TokenEmbedding } from './pool.js';

export interface ExportJob {
  records: FastaRecord[];
  backend: EmbeddingBackend;
  batchSize: number;
  truncate: number; // residues kept per sequence before embedding
  onWarning?: (message: string) => void;
}

export interface ExportedRow {
  id: string;
  values: Float64Array;
  tokens: TokenEmbedding[];
}

/** Embed every record batch by batch and mean-pool residue positions. */
export async function runExport(job: ExportJob): Promise<ExportedRow[]> {
  const out: ExportedRow[] = [];
  for (let start = 0; start < job.records.length; start += job.batchSize) {
    const batch = job.records.slice(start, start + job.batchSize);
    for (const record of batch) {
      let residues = record.residues;
      if (residues.length > job.truncate) {
        job.onWarning?.(
          `sequence '${record.id}' truncated from ${residues.length} to ${job.truncate} residues`,
        );
        residues = residues.slice(0, job.truncate);
      }
      const tokens = await job.backend.embedTokens(residues);
      out.push({ id: record.id, values: meanPoolResidues(tokens), tokens });
    }
  }
  return out;
}
