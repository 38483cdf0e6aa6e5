"""Graph file round-trips and parse errors."""

import json

import pytest

from app.services.graph.persistence import GraphParseError, load_graph, save_graph
from app.services.graph.store import IntegrityError


class TestGraphPersistence:
    def test_reload_equals_original(self, medical_graph, tmp_path):
        path = save_graph(medical_graph, tmp_path / "graph.jsonl")
        assert load_graph(path) == medical_graph

    def test_save_is_byte_stable(self, medical_graph, tmp_path):
        a = save_graph(medical_graph, tmp_path / "a.jsonl")
        b = save_graph(load_graph(a), tmp_path / "b.jsonl")
        assert a.read_bytes() == b.read_bytes()

    def test_reloaded_graph_keeps_lookups_and_counters(self, medical_graph, tmp_path):
        graph = load_graph(save_graph(medical_graph, tmp_path / "g.jsonl"))
        assert graph.find_entity("dr. lee") == medical_graph.find_entity("Dr. Lee")
        assert graph.upsert_entity("Naproxen", "Drug") == str(len(medical_graph.entities) + 1)

    def test_record_order(self, medical_graph, tmp_path):
        lines = (tmp_path / "g.jsonl")
        save_graph(medical_graph, lines)
        kinds = [json.loads(line)["record"] for line in lines.read_text().splitlines()]
        assert kinds == sorted(kinds, key=["entity", "triple", "chunk"].index)

    @pytest.mark.parametrize(
        "line,message",
        [
            ("{not json", "invalid JSON"),
            ('{"record": "node", "id": "1"}', "unknown record kind"),
            ('{"record": "entity", "id": "1"}', "invalid entity record"),
            ("[1, 2]", "JSON object"),
        ],
    )
    def test_bad_lines_report_line_number(self, tmp_path, line, message):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"record": "chunk", "id": "c", "text": "t"}\n' + line + "\n")
        with pytest.raises(GraphParseError) as exc_info:
            load_graph(path)
        assert exc_info.value.line_no == 2
        assert message in str(exc_info.value)

    def test_duplicate_id_rejected(self, tmp_path):
        record = '{"record": "entity", "id": "1", "name": "A", "etype": "Drug"}\n'
        path = tmp_path / "dup.jsonl"
        path.write_text(record + record)
        with pytest.raises(GraphParseError, match="duplicate id"):
            load_graph(path)

    def test_dangling_triple_fails_on_load(self, tmp_path):
        path = tmp_path / "dangling.jsonl"
        path.write_text(
            '{"record": "entity", "id": "1", "name": "A", "etype": "Drug"}\n'
            '{"record": "triple", "id": "1", "head": "1", "relation": "treats", "tail": "2", '
            '"provenance": "", "kind": "entity-relation"}\n'
        )
        with pytest.raises(IntegrityError):
            load_graph(path)
