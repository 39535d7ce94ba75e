#!/usr/bin/env node
import { readFileSync, writeFileSync } from 'node:fs';

import { makeBackend } from './backend.js';
import { runExport } from './export.js';
import { parseFasta } from './fasta.js';
import { formatEmbeddingTsv } from './tsv.js';

const USAGE = `usage: plm-embed-exporter --fasta <in.fa> --out <emb.tsv>
         [--batch N] [--truncate N] [--dim D] [--backend transformers|reference]
         [--model <id>] [--dump-residues <path>]

Runs a protein language model over FASTA input, mean-pools the residue-level
embeddings per sequence (begin/end special tokens excluded), and writes the
"#dim <d>" TSV format. --dump-residues additionally writes every per-token
vector (id, tag, values) for external verification.`;

interface Args {
  fasta: string;
  out: string;
  batch: number;
  truncate: number;
  dim: number;
  backend: string;
  model?: string;
  dumpResidues?: string;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { batch: 8, truncate: 1022, dim: 1280, backend: 'transformers' };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const need = () => {
      const v = argv[++i];
      if (v === undefined) throw new Error(`${flag} needs a value`);
      return v;
    };
    switch (flag) {
      case '--fasta': args.fasta = need(); break;
      case '--out': args.out = need(); break;
      case '--batch': args.batch = Number(need()); break;
      case '--truncate': args.truncate = Number(need()); break;
      case '--dim': args.dim = Number(need()); break;
      case '--backend': args.backend = need(); break;
      case '--model': args.model = need(); break;
      case '--dump-residues': args.dumpResidues = need(); break;
      case '--help': case '-h':
        console.log(USAGE);
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag '${flag}'`);
    }
  }
  if (!args.fasta || !args.out) throw new Error('--fasta and --out are required');
  if (!Number.isInteger(args.batch) || args.batch! < 1) throw new Error('--batch must be >= 1');
  if (!Number.isInteger(args.truncate) || args.truncate! < 1) throw new Error('--truncate must be >= 1');
  return args as Args;
}

async function main() {
  const args = parseArgs(process.argv.slice(2));
  const records = parseFasta(readFileSync(args.fasta, 'utf-8'));
  const backend = makeBackend(args.backend, args.dim, args.model);
  const rows = await runExport({
    records,
    backend,
    batchSize: args.batch,
    truncate: args.truncate,
    onWarning: (msg) => console.error(`warning: ${msg}`),
  });
  writeFileSync(args.out, formatEmbeddingTsv(rows, args.dim));
  if (args.dumpResidues) {
    const lines = ['id\ttag\tvalues...'];
    for (const row of rows) {
      for (const tok of row.tokens) {
        lines.push(
          `${row.id}\t${tok.tag}\t` + Array.from(tok.values, (v) => String(v)).join('\t'),
        );
      }
    }
    writeFileSync(args.dumpResidues, lines.join('\n') + '\n');
  }
  console.error(`wrote ${args.out} (${rows.length} sequences, dim ${args.dim})`);
}

main().catch((err: Error) => {
  console.error(`plm-embed-exporter: ${err.message}`);
  process.exit(1);
});
