"""Command-line entry points, exit codes, and committed-output determinism."""
from __future__ import annotations

import pytest

from comorbid.annotation import GoldInstance
from comorbid.cli import main
from comorbid.config import ENV_CONFIG, ENV_PORT, ENV_SPARQL_ENDPOINT
from comorbid.context import MentionAttributes, Temporality
from comorbid.filtermodel import Label
from comorbid.pipeline import load_gold, load_mentions, write_gold, write_mentions

from .conftest import FIXTURES, make_mention

EXTRACT = FIXTURES / "extract"
KAPPA = FIXTURES / "kappa"


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for var in (ENV_CONFIG, ENV_PORT, ENV_SPARQL_ENDPOINT):
        monkeypatch.delenv(var, raising=False)


def terminology_flags(base=EXTRACT):
    return ["--lexicon", str(base / "lexicon.tsv"), "--mapping", str(base / "mapping.csv")]


class TestUsageErrors:
    def test_no_arguments(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 1

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["--bogus", "index", "--out", "x"])
        assert excinfo.value.code == 1

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as excinfo:
            main(terminology_flags() + ["index"])
        assert excinfo.value.code == 1


class TestErrorExitCodes:
    def test_unconfigured_paths_exit_one(self, tmp_path, capsys):
        code = main(["extract", "--out", str(tmp_path / "out.jsonl")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_input_file_exits_two(self, tmp_path, capsys):
        code = main(
            [
                "eval",
                "--gold", str(tmp_path / "gold.jsonl"),
                "--mentions", str(tmp_path / "mentions.jsonl"),
            ]
        )
        assert code == 2
        assert "i/o error:" in capsys.readouterr().err

    def test_malformed_pairs_exit_one(self, capsys):
        code = main(
            terminology_flags(KAPPA)
            + [
                "kappa",
                "--annotations", str(KAPPA / "annotations.jsonl"),
                "--mentions", str(KAPPA / "mentions.jsonl"),
                "--pairs", "alice",
            ]
        )
        assert code == 1
        assert "expected a:b" in capsys.readouterr().err

    def test_missing_annotation_log_exits_one(self, tmp_path, capsys):
        code = main(
            terminology_flags(KAPPA)
            + ["kappa", "--annotations", str(tmp_path / "absent.jsonl")]
        )
        assert code == 1
        assert "annotation log not found" in capsys.readouterr().err


class TestIndex:
    def test_builds_index_file(self, tmp_path, capsys):
        out = tmp_path / "patterns.idx"
        code = main(terminology_flags() + ["index", "--out", str(out)])
        assert code == 0
        assert out.exists()
        # asthma, cholera, diabetes mellitus, diabetes, type 2 diabetes,
        # heart failure, heart
        assert "indexed 7 patterns" in capsys.readouterr().out


class TestExtract:
    def run_extract_cli(self, tmp_path):
        out = tmp_path / "mentions.jsonl"
        code = main(
            terminology_flags()
            + ["extract", "--corpus", str(EXTRACT / "corpus.jsonl"), "--out", str(out)]
        )
        return code, out

    def test_matches_committed_output(self, tmp_path, capsys):
        code, out = self.run_extract_cli(tmp_path)
        assert code == 0
        assert out.read_bytes() == (EXTRACT / "expected_mentions.jsonl").read_bytes()
        assert "extracted 7 mentions from 5 documents" in capsys.readouterr().out

    def test_config_file_supplies_paths(self, tmp_path, capsys):
        config = tmp_path / "pipeline.toml"
        config.write_text(
            "[paths]\n"
            f'lexicon = "{EXTRACT / "lexicon.tsv"}"\n'
            f'mapping = "{EXTRACT / "mapping.csv"}"\n'
            f'corpus = "{EXTRACT / "corpus.jsonl"}"\n',
            encoding="utf-8",
        )
        out = tmp_path / "mentions.jsonl"
        code = main(["--config", str(config), "extract", "--out", str(out)])
        assert code == 0
        assert out.read_bytes() == (EXTRACT / "expected_mentions.jsonl").read_bytes()

    def test_env_variable_names_config(self, tmp_path, monkeypatch):
        config = tmp_path / "pipeline.toml"
        config.write_text(
            "[paths]\n"
            f'lexicon = "{EXTRACT / "lexicon.tsv"}"\n'
            f'mapping = "{EXTRACT / "mapping.csv"}"\n'
            f'corpus = "{EXTRACT / "corpus.jsonl"}"\n',
            encoding="utf-8",
        )
        monkeypatch.setenv(ENV_CONFIG, str(config))
        out = tmp_path / "mentions.jsonl"
        assert main(["extract", "--out", str(out)]) == 0
        assert out.exists()


class TestKappa:
    def test_matches_committed_csv(self, tmp_path, capsys):
        out = tmp_path / "kappa.csv"
        code = main(
            terminology_flags(KAPPA)
            + [
                "kappa",
                "--annotations", str(KAPPA / "annotations.jsonl"),
                "--mentions", str(KAPPA / "mentions.jsonl"),
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.read_bytes() == (KAPPA / "expected_kappa.csv").read_bytes()
        stdout = capsys.readouterr().out
        assert "overall mean kappa=0.400" in stdout
        assert "alice/bob=0.400" in stdout

    def test_explicit_pairs_equivalent(self, tmp_path):
        out = tmp_path / "kappa.csv"
        code = main(
            terminology_flags(KAPPA)
            + [
                "kappa",
                "--annotations", str(KAPPA / "annotations.jsonl"),
                "--mentions", str(KAPPA / "mentions.jsonl"),
                "--pairs", "alice:bob",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.read_bytes() == (KAPPA / "expected_kappa.csv").read_bytes()


class TestGoldTrainEval:
    def make_gold(self, tmp_path, capsys):
        gold_path = tmp_path / "gold.jsonl"
        code = main(
            terminology_flags(KAPPA)
            + [
                "gold",
                "--annotations", str(KAPPA / "annotations.jsonl"),
                "--mentions", str(KAPPA / "mentions.jsonl"),
                "--out", str(gold_path),
            ]
        )
        return code, gold_path

    def test_gold_adjudication_counts(self, tmp_path, capsys):
        code, gold_path = self.make_gold(tmp_path, capsys)
        assert code == 0
        stdout = capsys.readouterr().out
        assert "35 instances" in stdout
        assert "15 disagreements discarded" in stdout
        assert "0 under-annotated" in stdout
        assert len(load_gold(gold_path)) == 35

    def test_train_writes_model(self, tmp_path, capsys):
        _, gold_path = self.make_gold(tmp_path, capsys)
        model_dir = tmp_path / "models"
        code = main(
            [
                "train",
                "--gold", str(gold_path),
                "--mentions", str(KAPPA / "mentions.jsonl"),
                "--out-dir", str(model_dir),
            ]
        )
        assert code == 0
        assert (model_dir / "C0008354.forest.json").exists()
        assert "trained 1 models (0 skipped)" in capsys.readouterr().out

    def test_train_single_class_warns_but_succeeds(self, tmp_path, capsys):
        mention = make_mention("doc1", 0, 7).with_attributes(
            MentionAttributes(negated=False, temporality=Temporality.RECENT)
        )
        mentions_path = tmp_path / "mentions.jsonl"
        write_mentions([mention], mentions_path)
        gold_path = tmp_path / "gold.jsonl"
        write_gold(
            [
                GoldInstance(
                    doc_id="doc1",
                    start=0,
                    end=7,
                    cui="C0008354",
                    label=Label.TRUE_MENTION,
                    gold_negated=False,
                    gold_temporality=Temporality.RECENT,
                )
            ],
            gold_path,
        )
        model_dir = tmp_path / "models"
        code = main(
            [
                "train",
                "--gold", str(gold_path),
                "--mentions", str(mentions_path),
                "--out-dir", str(model_dir),
            ]
        )
        captured = capsys.readouterr()
        assert code == 0
        assert "warning: skipped C0008354: single-class" in captured.err
        assert "trained 0 models (1 skipped)" in captured.out
        assert not (model_dir / "C0008354.forest.json").exists()

    def test_eval_runs_are_byte_identical(self, tmp_path, capsys):
        _, gold_path = self.make_gold(tmp_path, capsys)
        outputs = []
        for name in ("first.csv", "second.csv"):
            out_csv = tmp_path / name
            code = main(
                [
                    "eval",
                    "--gold", str(gold_path),
                    "--mentions", str(KAPPA / "mentions.jsonl"),
                    "--k", "5",
                    "--out-csv", str(out_csv),
                ]
            )
            assert code == 0
            outputs.append(out_csv.read_bytes())
        assert outputs[0] == outputs[1]
        assert outputs[0].startswith(b"chapter,instances,precision,recall,f1\n")
        assert b"macro,35," in outputs[0]

    def test_eval_text_report(self, tmp_path, capsys):
        _, gold_path = self.make_gold(tmp_path, capsys)
        out_text = tmp_path / "report.txt"
        code = main(
            [
                "eval",
                "--gold", str(gold_path),
                "--mentions", str(KAPPA / "mentions.jsonl"),
                "--k", "5",
                "--out-text", str(out_text),
            ]
        )
        assert code == 0
        text = out_text.read_text(encoding="utf-8")
        assert text.splitlines()[0].split() == [
            "Chapter", "Instances", "Precision", "Recall", "F1",
        ]
        assert "Macro" in text
        assert text in capsys.readouterr().out


def test_extracted_mentions_load_cleanly():
    mentions = load_mentions(EXTRACT / "expected_mentions.jsonl")
    assert len(mentions) == 7
    assert {m.doc_id for m in mentions} == {"note-01", "note-02", "note-03", "note-04"}
