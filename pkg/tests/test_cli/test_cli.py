"""
End-to-end CLI tests over the offline demo under fixtures/demo: scripted
generation fixtures and seeded scripted embeddings, so every run is
reproducible byte for byte.
"""

import json
from pathlib import Path

import pytest
import yaml

from app.cli import build_parser, main
from app.services.evaluation.datasets import load_corpus, load_dataset
from app.services.schema.loader import load_schema
from app.workers.build_pipeline import COST_FILE, GRAPH_FILE, SCHEMA_FILE

DEMO = Path(__file__).resolve().parents[2] / "fixtures" / "demo"


@pytest.fixture
def demo_config(tmp_path) -> Path:
    """The demo config with every path made absolute and outputs under tmp_path."""
    raw = yaml.safe_load((DEMO / "config.yaml").read_text())
    raw["providers"]["generation"]["fixtures_dir"] = str(DEMO / "scripted")
    raw["paths"] = {
        "schema_path": str(DEMO / "schema.yaml"),
        "corpus": str(DEMO / "corpus.jsonl"),
        "dataset": str(DEMO / "qa.jsonl"),
        "artifacts": str(tmp_path / "artifacts"),
        "output": str(tmp_path / "reports"),
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


@pytest.fixture
def built(demo_config, tmp_path) -> Path:
    assert main(["build", "--config", str(demo_config)]) == 0
    return demo_config


def _artifact_bytes(directory: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(directory)): p.read_bytes()
        for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


class TestBuild:
    def test_build_writes_artifacts(self, built, tmp_path, capsys):
        artifacts = tmp_path / "artifacts"
        for name in (GRAPH_FILE, SCHEMA_FILE, "tree.jsonl", COST_FILE, "indexes/entity.vec"):
            assert (artifacts / name).exists(), name
        schema = load_schema(artifacts / SCHEMA_FILE)
        assert {"Company"} <= schema.entity_types
        assert {"manufactures"} <= schema.relation_types
        assert schema.version == 1
        cost = json.loads((artifacts / COST_FILE).read_text())
        assert set(cost["stages"]) == {"extraction", "detection_embeddings", "summaries", "index_embeddings"}
        assert cost["total"]["llm_calls"] > 0
        assert "Built " in capsys.readouterr().out

    def test_worker_count_does_not_change_artifacts(self, demo_config, tmp_path):
        dirs = []
        for workers in (1, 8):
            target = tmp_path / f"w{workers}"
            args = ["build", "--config", str(demo_config), "--workers", str(workers), "--artifacts", str(target)]
            assert main(args) == 0
            dirs.append(target)
        assert _artifact_bytes(dirs[0]) == _artifact_bytes(dirs[1])

    def test_missing_schema_names_path(self, demo_config, tmp_path, capsys):
        missing = tmp_path / "nope" / "schema.yaml"
        assert main(["build", "--config", str(demo_config), "--schema", str(missing)]) == 1
        err = capsys.readouterr().err
        assert str(missing) in err
        assert not (tmp_path / "artifacts").exists()

    def test_failed_stage_named(self, demo_config, tmp_path, capsys):
        corpus = tmp_path / "unscripted.jsonl"
        corpus.write_text('{"id": "x", "text": "Nothing here is scripted."}\n')
        assert main(["build", "--config", str(demo_config), "--corpus", str(corpus)]) == 1
        assert "ERROR [extraction]" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["build", "--config", str(tmp_path / "absent.yaml")]) == 1
        assert "Config file not found" in capsys.readouterr().err

    def test_out_of_range_override(self, demo_config, capsys):
        assert main(["build", "--config", str(demo_config), "--mu", "1.5"]) == 1
        assert "Invalid override" in capsys.readouterr().err


class TestArgumentParsing:
    def test_invalid_mode_is_usage_error(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["query", "Who?", "--mode", "maybe"])
        assert exc_info.value.code == 2

    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args([])
        assert exc_info.value.code == 2

    def test_agent_flag_pair(self):
        args = build_parser().parse_args(["query", "Who?", "--no-agent"])
        assert args.agent is False


class TestQuery:
    def test_query_before_build(self, demo_config, capsys):
        assert main(["query", "What does aspirin treat?", "--config", str(demo_config)]) == 1
        assert "run the build command first" in capsys.readouterr().err

    def test_answer_and_trace(self, built, tmp_path, capsys):
        capsys.readouterr()
        trace_path = tmp_path / "trace.json"
        code = main(["query", "What does aspirin treat?", "--config", str(built), "--trace", str(trace_path)])
        assert code == 0
        assert capsys.readouterr().out.strip() == "Fever"
        trace = json.loads(trace_path.read_text())
        assert trace["final_answer"] == "Fever"
        assert len(trace["iterations"]) == 1

    def test_multi_hop_refines_once(self, built, tmp_path, capsys):
        capsys.readouterr()
        trace_path = tmp_path / "trace.json"
        question = "Which company manufactures the drug Dr. Kim prescribes?"
        assert main(["query", question, "--config", str(built), "--trace", str(trace_path)]) == 0
        assert capsys.readouterr().out.strip() == "Pfizer"
        verdicts = [it["verdict"] for it in json.loads(trace_path.read_text())["iterations"]]
        assert verdicts == ["refine", "answer"]

    def test_reject_mode_abstains(self, built, capsys):
        capsys.readouterr()
        assert main(["query", "Who discovered penicillin?", "--config", str(built)]) == 0
        assert capsys.readouterr().out.strip() == "INSUFFICIENT_EVIDENCE"


class TestEval:
    @pytest.mark.parametrize("top_k", [10, 20])
    def test_report_records_top_k(self, built, tmp_path, top_k):
        output = tmp_path / f"report_{top_k}"
        args = ["eval", "--config", str(built), "--top-k", str(top_k), "--output", str(output)]
        assert main(args) == 0
        report = json.loads((output / "report.json").read_text())
        assert report["top_k"] == top_k
        assert report["total"] == 4
        assert report["correct"] == 3
        assert report["abstentions"] == 1

    def test_missing_dataset(self, built, tmp_path, capsys):
        args = ["eval", "--config", str(built), "--dataset", str(tmp_path / "none.jsonl")]
        assert main(args) == 1
        assert "none.jsonl" in capsys.readouterr().err


class TestAnonymize:
    def test_corpus_and_dataset(self, tmp_path):
        out = tmp_path / "anon.jsonl"
        qa_out = tmp_path / "qa.anon.jsonl"
        args = [
            "anonymize",
            "--corpus", str(DEMO / "corpus.jsonl"),
            "--dictionary", str(DEMO / "dictionary.json"),
            "--output", str(out),
            "--dataset", str(DEMO / "qa.jsonl"),
            "--dataset-output", str(qa_out),
        ]
        assert main(args) == 0
        docs = {d.id: d.text for d in load_corpus(out)}
        assert docs["doc2"] == "PERSON#1, a cardiologist, works at LOCATION#1 and prescribes aspirin."
        assert docs["doc3"] == "PERSON#2 works at LOCATION#1. PERSON#2 prescribes ibuprofen."
        items = {i.id: i for i in load_dataset(qa_out)}
        assert items["q2"].question == "Where does PERSON#1 work?"
        assert items["q2"].gold == ["LOCATION#1"]
