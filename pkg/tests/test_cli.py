import os
import warnings

import numpy as np
import pytest

from hmdforest import cli
from hmdforest.seqio import ACTIVITY_LABELS

FAST_KNOBS = ["--trees", "4", "--k-inner", "2", "--max-layers", "1"]


@pytest.fixture()
def workspace(tmp_path):
    """Small labeled FASTA + embedding fixture whose features carry signal."""
    rng = np.random.default_rng(21)
    aa = "ACDEFGHIKLMNPQRSTVWY"
    n, d = 36, 10
    ids = [f"p{i:02d}" for i in range(n)]
    amp = rng.random(n) < 0.5
    fasta = tmp_path / "d.fa"
    with open(fasta, "w") as fh:
        for i in range(n):
            seq = "".join(rng.choice(list(aa), size=int(rng.integers(6, 20))))
            fh.write(f">{ids[i]}\n{seq}\n")
    labels = tmp_path / "l.tsv"
    with open(labels, "w") as fh:
        fh.write("id\t" + "\t".join(ACTIVITY_LABELS) + "\n")
        for i in range(n):
            if amp[i]:
                bits = (rng.random(11) < 0.5).astype(int)
                fh.write(ids[i] + "\t" + "\t".join(map(str, bits)) + "\n")
    emb = tmp_path / "e.tsv"
    with open(emb, "w") as fh:
        fh.write(f"#dim {d}\n")
        for i in range(n):
            v = rng.normal(size=d) + (1.5 if amp[i] else -1.5)
            fh.write(ids[i] + "\t" + "\t".join(repr(float(x)) for x in v) + "\n")
    return tmp_path


def _run(args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return cli.run([str(a) for a in args])


class TestExitCodes:
    def test_usage_error_is_1(self, workspace):
        assert _run(["train", "--task", "binary",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv", "--onehot",
                     "--out", workspace / "m.hmdf", "--outdir", workspace]) == 1

    def test_unknown_flag_is_1(self, workspace):
        assert _run(["stats", "--fasta", workspace / "d.fa", "--bogus"]) == 1

    def test_data_error_is_2(self, workspace):
        assert _run(["stats", "--fasta", workspace / "nope.fa",
                     "--outdir", workspace]) == 2

    def test_bad_fasta_is_2(self, workspace):
        bad = workspace / "bad.fa"
        bad.write_text(">x\n\n")
        assert _run(["stats", "--fasta", bad, "--outdir", workspace]) == 2


class TestHelp:
    def test_every_flag_mentioned(self, capsys):
        parser = cli.build_parser()
        sub_actions = next(
            a for a in parser._actions if isinstance(a, cli.argparse._SubParsersAction)
        )
        for name, sub in sub_actions.choices.items():
            text = sub.format_help()
            for action in sub._actions:
                for opt in action.option_strings:
                    if opt.startswith("--"):
                        assert opt in text, f"{name} help lacks {opt}"


class TestStatsDedup:
    def test_stats_artifacts(self, workspace):
        out = workspace / "out"
        assert _run(["stats", "--fasta", workspace / "d.fa",
                     "--labels", workspace / "l.tsv", "--outdir", out]) == 0
        assert (out / "stats.tsv").exists()
        assert (out / "stats-config.txt").exists()

    def test_dedup_round_trip(self, workspace):
        fa = workspace / "dup.fa"
        fa.write_text(">a\nMKLV\n>b\nMKLV\n>c\nWYY\n")
        out_fa = workspace / "dd.fa"
        assert _run(["dedup", "--fasta", fa, "--out-fasta", out_fa,
                     "--outdir", workspace]) == 0
        text = out_fa.read_text()
        assert text.count(">") == 2


class TestTrainPredict:
    def test_pipeline_train_predict(self, workspace):
        model = workspace / "m.hmdf"
        code = _run(["train", "--task", "pipeline",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv",
                     "--out", model, "--seed", "7", "--outdir", workspace,
                     *FAST_KNOBS])
        assert code == 0
        assert model.exists()
        assert (workspace / "history-binary.tsv").exists()
        assert (workspace / "history-multilabel.tsv").exists()

        verdicts = workspace / "v.tsv"
        assert _run(["predict", "--model", model, "--embeddings", workspace / "e.tsv",
                     "--out", verdicts, "--outdir", workspace]) == 0
        lines = verdicts.read_text().strip().splitlines()
        assert lines[0].startswith("id\tis_amp\tamp_score")
        assert len(lines) == 37

    def test_binary_train_uses_feature_subset(self, workspace):
        subset = workspace / "sel.txt"
        subset.write_text("0\n3\n5\n")
        model = workspace / "mb.hmdf"
        assert _run(["train", "--task", "binary",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv",
                     "--feature-subset", subset,
                     "--out", model, "--outdir", workspace, *FAST_KNOBS]) == 0
        from hmdforest.store import load

        assert load(model).raw_dim == 3

    def test_byte_identical_rerun(self, workspace):
        m1, m2 = workspace / "r1.hmdf", workspace / "r2.hmdf"
        argv = ["train", "--task", "multilabel",
                "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                "--embeddings", workspace / "e.tsv", "--seed", "5",
                "--outdir", workspace, *FAST_KNOBS]
        assert _run(argv + ["--out", m1]) == 0
        assert _run(argv + ["--out", m2]) == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_onehot_pathway(self, workspace):
        model = workspace / "mo.hmdf"
        assert _run(["train", "--task", "binary",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--onehot", "--onehot-max-len", "25",
                     "--out", model, "--outdir", workspace, *FAST_KNOBS]) == 0
        from hmdforest.store import load

        assert load(model).raw_dim == 500


class TestCvSubsetAblation:
    def test_cv_writes_report(self, workspace):
        out = workspace / "cvout"
        assert _run(["cv", "--task", "multilabel", "--k", "3",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv",
                     "--outdir", out, *FAST_KNOBS]) == 0
        report = (out / "cv-report.tsv").read_text()
        assert "mean\t" in report

    def test_cv_roc_export(self, workspace):
        out = workspace / "rocout"
        assert _run(["cv", "--task", "binary", "--k", "3", "--roc",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv",
                     "--outdir", out, *FAST_KNOBS]) == 0
        roc = (out / "roc-AMP.tsv").read_text().splitlines()
        assert roc[0] == "fpr\ttpr"
        assert roc[1] == "0.0\t0.0"
        assert roc[-1] == "1.0\t1.0"

    def test_ablation_variants(self, workspace):
        for variant, extra in [
            ("random-forest-embed", ["--embeddings", workspace / "e.tsv"]),
            ("deep-forest-onehot", ["--onehot-max-len", "20"]),
        ]:
            out = workspace / f"ab-{variant}"
            assert _run(["ablation", "--variant", variant, "--k", "3",
                         "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                         "--outdir", out, *FAST_KNOBS, *extra]) == 0
            assert (out / f"ablation-{variant}.tsv").exists()


class TestExplainSelect:
    def test_explain_then_select(self, workspace):
        model = workspace / "m.hmdf"
        assert _run(["train", "--task", "pipeline",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv",
                     "--out", model, "--outdir", workspace, *FAST_KNOBS]) == 0
        weights = workspace / "w.tsv"
        assert _run(["explain", "--model", model, "--embeddings", workspace / "e.tsv",
                     "--label", "amp", "--n-samples", "60", "--instances", "4",
                     "--out", weights, "--outdir", workspace]) == 0
        sel = workspace / "sel.txt"
        assert _run(["select-features", "--weights", weights, "--k", "4",
                     "--out", sel, "--outdir", workspace]) == 0
        indices = [int(x) for x in sel.read_text().split()]
        assert len(indices) == 4
        assert len(set(indices)) == 4


class TestConfigFile:
    def test_config_file_supplies_defaults_flags_win(self, workspace):
        conf = workspace / "run.conf"
        conf.write_text("trees=4\nk-inner=2\nmax-layers=1\nseed=9\n")
        m1 = workspace / "c1.hmdf"
        assert _run(["train", "--task", "multilabel",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv",
                     "--config", conf, "--out", m1, "--outdir", workspace]) == 0
        from hmdforest.store import load

        model = load(m1)
        assert model.config.n_trees == 4
        assert model.config.seed == (9,)

        m2 = workspace / "c2.hmdf"
        assert _run(["train", "--task", "multilabel",
                     "--fasta", workspace / "d.fa", "--labels", workspace / "l.tsv",
                     "--embeddings", workspace / "e.tsv",
                     "--config", conf, "--seed", "11",
                     "--out", m2, "--outdir", workspace]) == 0
        assert load(m2).config.seed == (11,)


def test_snapshot_written_for_every_command(workspace):
    out = workspace / "snap"
    _run(["stats", "--fasta", workspace / "d.fa", "--outdir", out])
    text = (out / "stats-config.txt").read_text()
    assert "fasta=" in text and "seed=0" in text
