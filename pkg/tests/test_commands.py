"""End-to-end stages over the Java fixtures and the command-line entry point."""

import json

import numpy as np
import pytest

import commands
from conftest import FIXTURES
from errors import ConfigInvalid, InsufficientPairs, MissingArtifact, StaleArtifact
from loader import load_pipeline_config
from main import main
from records import read_records, write_records
from state import WorkDir

TINY_LM = {"lm.hidden_size": 8, "lm.max_epochs": 2, "lm.batch_size": 4}


def fixture_config(work, **overrides):
    values = {"work": str(work), "input": str(FIXTURES), "valid_size": 2, "test_size": 2, **TINY_LM}
    values.update(overrides)
    return load_pipeline_config(overrides=values)


def run_pipeline(config):
    commands.cmd_extract(config)
    commands.cmd_prep(config)
    commands.cmd_train(config, "lm")
    return commands.cmd_score(config, "lm")


class TestFixturePipeline:

    @pytest.fixture
    def config(self, tmp_path):
        return fixture_config(tmp_path / "work")

    def test_extract(self, config):
        summary = commands.cmd_extract(config)
        assert (summary.files, summary.pairs, summary.sentences) == (6, 6, 12)
        wd = WorkDir(config.work)
        header, records = read_records(wd.pairs_path, "pairs")
        assert header["seed"] == config.seed
        assert [r["full_pair_id"] for r in records] == list(range(6))

    def test_prep(self, config):
        commands.cmd_extract(config)
        sizes = commands.cmd_prep(config)
        assert (sizes["train"], sizes["valid"], sizes["test"]) == (8, 2, 2)
        _, rows = read_records(WorkDir(config.work).corpus_path, "corpus")
        assert set(rows[0]["compressed"]) == {"signature", "begin-end", "identifier"}
        assert all(len(r["compressed"]["begin-end"]) <= config.max_tokens for r in rows)

    def test_prep_refuses_too_few_pairs(self, tmp_path):
        config = fixture_config(tmp_path / "work", valid_size=10, test_size=10)
        commands.cmd_extract(config)
        with pytest.raises(InsufficientPairs):
            commands.cmd_prep(config)

    def test_train_score_report(self, config):
        ranked = run_pipeline(config)
        assert len(ranked) == 12
        assert [s.rank for s in ranked] == list(range(1, 13))
        assert [s.perplexity for s in ranked] == sorted(s.perplexity for s in ranked)

        wd = WorkDir(config.work)
        assert wd.model_path("lm").exists()
        tsv = wd.report_path("ranked.lm", "tsv").read_text(encoding="utf-8").splitlines()
        assert len(tsv) == 13

        text = commands.cmd_report(config, "javadoc", "lm")
        assert "non-javadoc" in text
        assert commands.cmd_report(config, "stats").startswith("6 pairs")

        results = commands.cmd_evaluate(config, ["lm"])
        assert results["lm"]["test"] > 1.0
        assert results["lm"]["test_cross_entropy"] == pytest.approx(np.log2(results["lm"]["test"]))

    def test_category_report(self, config, tmp_path):
        ranked = run_pipeline(config)
        labels = tmp_path / "labels.tsv"
        labels.write_text(f"{ranked[0].pair_id}\trestate\n{ranked[-1].pair_id}\tother\n", encoding="utf-8")
        text = commands.cmd_report(config, "category", "lm", str(labels))
        assert "restate" in text and "other" in text

    def test_resume(self, config):
        run_pipeline(config)
        checkpoint = commands.cmd_train(config, "lm", resume=True)
        assert checkpoint.epoch >= 1

    def test_resume_without_checkpoint(self, config):
        commands.cmd_extract(config)
        commands.cmd_prep(config)
        with pytest.raises(MissingArtifact):
            commands.cmd_train(config, "lm", resume=True)

    def test_stale_corpus(self, config):
        commands.cmd_extract(config)
        commands.cmd_prep(config)
        wd = WorkDir(config.work)
        write_records(wd.sentences_path, "sentences", config.seed, [])
        with pytest.raises(StaleArtifact):
            commands.cmd_train(config, "lm")

    def test_strip(self, tmp_path):
        config = fixture_config(tmp_path / "work", strip_threshold=1e12)
        run_pipeline(config)
        stripped = tmp_path / "work" / "stripped" / "lm" / "listings" / "GCMRegistrar.java"
        assert stripped.exists()
        assert "Return the current registration id." not in stripped.read_text(encoding="utf-8")

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            run_pipeline(fixture_config(tmp_path / name))
        for relative in ("models/lm.ckpt", "reports/ranked.lm.tsv", "corpus.jsonl"):
            assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()

    def test_unknown_report(self, config):
        with pytest.raises(ConfigInvalid):
            commands.cmd_report(config, "weather")


class TestMain:

    def test_missing_artifact(self, tmp_path, capsys):
        assert main(["--work", str(tmp_path / "work"), "prep"]) == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "MissingArtifact"
        assert error["message"]

    def test_lock_released_after_error(self, tmp_path):
        main(["--work", str(tmp_path / "work"), "prep"])
        assert not (tmp_path / "work" / WorkDir.LOCK_NAME).exists()

    def test_gradcheck(self, capsys):
        assert main(["gradcheck", "--model", "lm", "--hidden-size", "4", "--vocab-size", "10"]) == 0
        assert "[ok]" in capsys.readouterr().out

    def test_gradcheck_too_large(self, capsys):
        assert main(["gradcheck", "--model", "s2s", "--hidden-size", "64"]) == 2
        assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "ConfigInvalid"

    def test_extract_and_stats(self, tmp_path, capsys):
        work = str(tmp_path / "work")
        assert main(["--work", work, "extract", str(FIXTURES)]) == 0
        assert main(["--work", work, "report", "--by", "stats"]) == 0
        assert "6 pairs" in capsys.readouterr().out


NAME_WORDS = ["account", "buffer", "cache", "date", "entry", "file", "group", "handler", "index", "key",
              "label", "member", "node", "owner", "path", "query", "record", "session", "table", "user"]
OTHER_WORDS = ["river", "purple", "quietly", "mountain", "seven", "lantern", "whisper", "orchard",
               "velvet", "thunder", "meadow", "copper", "sailing", "harbor", "marble", "winter",
               "falcon", "garden", "silver", "morning"]


def planted_sources(root, rng, files=20, methods=20):
    """Getters whose comment restates the name, or is unrelated prose."""
    root.mkdir(parents=True)
    planted = set()
    for i in range(files):
        lines = [f"public class Planted{i} {{", ""]
        for j in range(methods):
            first, second = rng.choice(NAME_WORDS, size=2, replace=False)
            name = f"{first}{second.capitalize()}"
            if (i * methods + j) % 2 == 0:
                comment = f"Gets the {first} {second}."
                planted.add(comment)
            else:
                comment = " ".join(rng.choice(OTHER_WORDS, size=6)).capitalize() + "."
            lines += [f"    /** {comment} */",
                      f"    public int get{name[0].upper()}{name[1:]}() {{",
                      f"        return {name};",
                      "    }", ""]
        lines.append("}")
        (root / f"Planted{i}.java").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return planted


@pytest.mark.slow
def test_restatements_rank_lowest(tmp_path):
    planted = planted_sources(tmp_path / "src", np.random.default_rng(0))
    config = load_pipeline_config(overrides={
        "work": str(tmp_path / "work"), "input": str(tmp_path / "src"), "valid_size": 20, "test_size": 20,
        "s2s.hidden_size": 32, "s2s.max_epochs": 10, "s2s.batch_size": 16, "s2s.learning_rate": 1.0,
        "s2s.dropout": 1.0,
    })
    commands.cmd_extract(config)
    commands.cmd_prep(config)
    commands.cmd_train(config, "s2s")
    ranked = commands.cmd_score(config, "s2s-begin-end")
    bottom = ranked[:50]
    assert sum(s.text in planted for s in bottom) >= 40
