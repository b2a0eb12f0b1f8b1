"""Pipeline-level CLI tests: subcommand round trips on tiny fixtures."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from topicshard.cli import main
from topicshard.index import read_rankings


def _run(*argv) -> int:
    return main([str(a) for a in argv])


def _synth(out: Path, seed=0, **overrides) -> None:
    args = {
        "--true-t": 3, "--passages-per-topic": 8, "--dim": 8,
        "--queries-per-topic": 4, "--vocab-per-topic": 10, "--seed": seed,
    }
    args.update(overrides)
    argv = ["synth", "--out", out]
    for k, v in args.items():
        argv += [k, v]
    assert _run(*argv) == 0


@pytest.fixture
def pipeline(tmp_path):
    """synth -> train -> index, returning the paths dict."""
    data = tmp_path / "data"
    _synth(data, seed=0)
    model = tmp_path / "model.tpm1"
    assert _run("train-topics", "--emb", data / "passages.emb", "--t", 3,
                "--seed", 0, "--out", model) == 0
    index = tmp_path / "index"
    assert _run("build-index", "--corpus", data / "corpus.jsonl",
                "--emb", data / "passages.emb", "--model", model, "--out", index) == 0
    return {"data": data, "model": model, "index": index, "tmp": tmp_path}


class TestPipeline:
    def test_retrieve_then_evaluate(self, pipeline):
        p = pipeline
        results = p["tmp"] / "results.jsonl"
        assert _run("retrieve", "--index", p["index"], "--queries", p["data"] / "queries.jsonl",
                    "--emb", p["data"] / "queries.emb", "--model", p["model"],
                    "--k", 10, "--out", results) == 0
        rankings = read_rankings(results)
        assert len(rankings) == 12
        assert all(len(r) == 10 for r in rankings.values())
        report_path = p["tmp"] / "report.json"
        assert _run("evaluate", "--corpus", p["data"] / "corpus.jsonl",
                    "--queries", p["data"] / "queries.jsonl", "--retrievals", results,
                    "--metrics", "r@5,p@1", "--out", report_path) == 0
        report = json.loads(report_path.read_text())
        assert 0.0 <= report["aggregate"]["recall_at_k"] <= 1.0
        assert report["k_used"] == 5

    def test_ingest_check_aligned(self, pipeline, capsys):
        p = pipeline
        assert _run("ingest-check", "--corpus", p["data"] / "corpus.jsonl",
                    "--emb", p["data"] / "passages.emb") == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["aligned"] is True

    def test_ingest_check_misaligned_exits_nonzero(self, pipeline, tmp_path, capsys):
        p = pipeline
        short = tmp_path / "short.jsonl"
        lines = (p["data"] / "corpus.jsonl").read_text().strip().splitlines()
        short.write_text("\n".join(lines[:-1]) + "\n")
        code = _run("ingest-check", "--corpus", short, "--emb", p["data"] / "passages.emb")
        assert code == 1
        assert "error: alignment:" in capsys.readouterr().err

    def test_assign_writes_total_map(self, pipeline, capsys):
        p = pipeline
        out = p["tmp"] / "assign.json"
        assert _run("assign", "--model", p["model"], "--emb", p["data"] / "passages.emb",
                    "--out", out) == 0
        assignment = json.loads(out.read_text())
        assert len(assignment) == 24
        assert set(assignment.values()) <= {0, 1, 2}

    def test_build_index_from_assignment_file(self, pipeline):
        p = pipeline
        assignment_path = p["tmp"] / "assign.json"
        assert _run("assign", "--model", p["model"], "--emb", p["data"] / "passages.emb",
                    "--out", assignment_path) == 0
        index2 = p["tmp"] / "index2"
        assert _run("build-index", "--corpus", p["data"] / "corpus.jsonl",
                    "--emb", p["data"] / "passages.emb",
                    "--assignment", assignment_path, "--out", index2) == 0
        first = (p["index"] / "manifest.json").read_bytes()
        second = (index2 / "manifest.json").read_bytes()
        assert first == second

    def test_retrieve_with_external_distributions(self, pipeline):
        p = pipeline
        queries = [json.loads(l) for l in (p["data"] / "queries.jsonl").read_text().splitlines()]
        dist = p["tmp"] / "dist.jsonl"
        dist.write_text(
            "\n".join(json.dumps({"id": q["id"], "weights": [1.0, 0.0, 0.0]}) for q in queries)
            + "\n"
        )
        out = p["tmp"] / "ext.jsonl"
        assert _run("retrieve", "--index", p["index"], "--queries", p["data"] / "queries.jsonl",
                    "--emb", p["data"] / "queries.emb", "--distributions", dist,
                    "--k", 5, "--out", out) == 0
        for ranked in read_rankings(out).values():
            for s in ranked:
                if s.topic_id != 0:
                    assert s.score == 0.0

    def test_sweep_t(self, pipeline):
        p = pipeline
        # Reuse the query set for both splits; this is a smoke test of the
        # file surface, not of selection quality.
        out = p["tmp"] / "sweep.json"
        assert _run("sweep-t", "--corpus", p["data"] / "corpus.jsonl",
                    "--emb", p["data"] / "passages.emb",
                    "--val-queries", p["data"] / "queries.jsonl",
                    "--val-emb", p["data"] / "queries.emb",
                    "--test-queries", p["data"] / "queries.jsonl",
                    "--test-emb", p["data"] / "queries.emb",
                    "--t-min", 1, "--t-max", 3, "--runs", 2, "--seed", 5,
                    "--verify-oracle", "--out", out) == 0
        sweep = json.loads(out.read_text())
        assert sweep["chosen_T"] in (1, 2, 3)
        assert sweep["runs"] == 2
        assert set(sweep["per_T"]) == {"1", "2", "3"}
        assert "stdev" in sweep


class TestErrors:
    def test_unknown_subcommand(self, capsys):
        assert _run("frobnicate") == 2
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert len(err.strip().splitlines()) == 1

    def test_missing_required_flag(self, capsys):
        assert _run("train-topics", "--t", 2) == 2
        assert "error: " in capsys.readouterr().err

    def test_evaluate_without_gold_names_missing_field(self, pipeline, capsys, tmp_path):
        p = pipeline
        results = p["tmp"] / "results.jsonl"
        assert _run("retrieve", "--index", p["index"], "--queries", p["data"] / "queries.jsonl",
                    "--emb", p["data"] / "queries.emb", "--model", p["model"],
                    "--k", 5, "--out", results) == 0
        bare = tmp_path / "bare.jsonl"
        stripped = [
            {"id": json.loads(l)["id"], "turns": json.loads(l)["turns"]}
            for l in (p["data"] / "queries.jsonl").read_text().splitlines()
        ]
        bare.write_text("\n".join(json.dumps(q) for q in stripped) + "\n")
        code = _run("evaluate", "--corpus", p["data"] / "corpus.jsonl", "--queries", bare,
                    "--retrievals", results, "--metrics", "r@5")
        assert code == 2
        err = capsys.readouterr().err
        assert "gold_passage_ids" in err and err.startswith("error: invalid:")

    def test_bad_metric_token(self, pipeline, capsys):
        p = pipeline
        code = _run("evaluate", "--corpus", p["data"] / "corpus.jsonl",
                    "--queries", p["data"] / "queries.jsonl",
                    "--retrievals", p["data"] / "queries.jsonl", "--metrics", "rouge")
        assert code == 2
        assert "rouge" in capsys.readouterr().err

    def test_io_error_single_line(self, capsys):
        assert _run("ingest-check", "--corpus", "/nonexistent/x.jsonl",
                    "--emb", "/nonexistent/y.emb") == 2
        err = capsys.readouterr().err
        assert err.startswith("error: io:")


class TestDeterminism:
    def test_synth_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        _synth(a, seed=3)
        _synth(b, seed=3)
        for name in ("corpus.jsonl", "passages.emb", "queries.jsonl",
                     "queries.emb", "planted_assignment.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_retrieve_rerun_byte_identical(self, pipeline):
        p = pipeline
        outs = []
        for name in ("r1.jsonl", "r2.jsonl"):
            out = p["tmp"] / name
            assert _run("retrieve", "--index", p["index"],
                        "--queries", p["data"] / "queries.jsonl",
                        "--emb", p["data"] / "queries.emb", "--model", p["model"],
                        "--k", 10, "--out", out) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, pipeline, tmp_path):
        p = pipeline
        cfg = tmp_path / "run.cfg"
        cfg.write_text("k = 3\nseed = 0  # comment\n")
        out_cfg = p["tmp"] / "cfg.jsonl"
        assert _run("retrieve", "--config", cfg, "--index", p["index"],
                    "--queries", p["data"] / "queries.jsonl",
                    "--emb", p["data"] / "queries.emb", "--model", p["model"],
                    "--out", out_cfg) == 0
        assert all(len(r) == 3 for r in read_rankings(out_cfg).values())
        out_flag = p["tmp"] / "flag.jsonl"
        assert _run("retrieve", "--config", cfg, "--index", p["index"],
                    "--queries", p["data"] / "queries.jsonl",
                    "--emb", p["data"] / "queries.emb", "--model", p["model"],
                    "--k", 2, "--out", out_flag) == 0
        assert all(len(r) == 2 for r in read_rankings(out_flag).values())

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense = 1\n")
        assert _run("synth", "--config", cfg, "--out", tmp_path / "x") == 2
        assert "nonsense" in capsys.readouterr().err


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "topicshard", "synth", "--out", str(tmp_path / "d"),
             "--true-t", "2", "--passages-per-topic", "4", "--dim", "4",
             "--queries-per-topic", "2", "--vocab-per-topic", "4", "--seed", "1"],
            capture_output=True, text=True,
        )
        assert out.returncode == 0, out.stderr
        assert (tmp_path / "d" / "corpus.jsonl").is_file()
