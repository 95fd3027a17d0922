import json

import pytest

from gdpref.graphs import (
    Graph,
    GraphCorpus,
    GraphParseError,
    GraphValidationError,
    parse_graph,
    serialize_adjacency_list,
    serialize_edge_list,
    write_edge_list_file,
)


class TestParse:
    def test_smallest_path(self):
        g = parse_graph("0 1\n1 2")
        assert g.n == 3
        assert g.edges == ((0, 1), (1, 2))

    def test_comments_and_blank_lines(self):
        g = parse_graph("# header\n0 1\n\n1 2  # trailing\n")
        assert g.m == 2

    def test_paren_comma_form(self):
        g = parse_graph("(0, 1)\n(1, 2)")
        assert g.edges == ((0, 1), (1, 2))

    def test_self_loop_rejected(self):
        with pytest.raises(GraphValidationError, match="self-loop"):
            parse_graph("0 0")

    def test_duplicate_edge_rejected(self):
        with pytest.raises(GraphValidationError, match="duplicate"):
            parse_graph("0 1\n1 0")

    def test_empty_graph_rejected(self):
        with pytest.raises(GraphValidationError, match="empty"):
            parse_graph("")

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(GraphParseError, match="line 2"):
            parse_graph("0 1\n0 1 2")

    def test_non_integer_rejected(self):
        with pytest.raises(GraphParseError, match="non-integer"):
            parse_graph("a b")

    def test_renumbering_first_appearance(self):
        g = parse_graph("10 20\n20 30")
        assert g.n == 3
        assert g.edges == ((0, 1), (1, 2))

    def test_contiguous_labels_kept(self):
        g = parse_graph("2 1\n0 2")
        assert g.edges == ((0, 2), (1, 2))

    def test_rome_scale_counts(self):
        edges = [(i, i + 1) for i in range(51)] + [(0, j) for j in range(10, 28)]
        text = "\n".join(f"{u} {v}" for u, v in edges)
        g = parse_graph(text)
        assert g.n == 52
        assert g.m == 69

    def test_graphml_subset(self):
        xml = (
            '<graphml><graph><node id="a"/><node id="b"/><node id="c"/>'
            '<edge source="a" target="b"/><edge source="b" target="c"/></graph></graphml>'
        )
        g = parse_graph(xml, fmt="graphml-subset")
        assert g.n == 3
        assert g.edges == ((0, 1), (1, 2))

    def test_graphml_bad_xml(self):
        with pytest.raises(GraphParseError, match="invalid XML"):
            parse_graph("<graphml>", fmt="graphml-subset")

    def test_unknown_format(self):
        with pytest.raises(ValueError, match="unknown graph format"):
            parse_graph("0 1", fmt="dot")


class TestSerialize:
    def test_edge_list_p3(self, p3):
        assert serialize_edge_list(p3) == "(0, 1)\n(1, 2)"

    def test_edge_list_k3(self, k3):
        assert serialize_edge_list(k3) == "(0, 1)\n(0, 2)\n(1, 2)"

    def test_edge_list_k4_brute(self, k4):
        expected = sorted((u, v) for u in range(4) for v in range(u + 1, 4))
        assert serialize_edge_list(k4) == "\n".join(f"({u}, {v})" for u, v in expected)

    def test_adjacency_p3(self, p3):
        assert serialize_adjacency_list(p3) == "0: 1\n1: 0, 2\n2: 1"

    def test_adjacency_star(self):
        g = parse_graph("0 1\n0 2\n0 3\n0 4")
        assert serialize_adjacency_list(g) == "0: 1, 2, 3, 4\n1: 0\n2: 0\n3: 0\n4: 0"

    def test_adjacency_nonempty_for_connected(self, k4):
        for line in serialize_adjacency_list(k4).splitlines():
            assert line.split(": ", 1)[1]

    def test_round_trip_preserves_numbering(self, k4):
        g2 = parse_graph(serialize_edge_list(k4))
        assert g2.edges == k4.edges
        assert g2.n == k4.n

    def test_determinism(self, k4):
        assert serialize_edge_list(k4) == serialize_edge_list(k4)

    def test_degree_sum(self, k4, p3, c4):
        for g in (k4, p3, c4):
            assert sum(g.degree(u) for u in range(g.n)) == 2 * g.m


class TestGraphStructure:
    def test_connectivity(self, p3):
        assert p3.is_connected()
        g = Graph(id="disc", n=4, edges=((0, 1), (2, 3)))
        assert not g.is_connected()

    def test_bfs_distances(self, p3):
        assert p3.bfs_distances(0) == [0, 1, 2]

    def test_neighbors_sorted(self, k4):
        assert k4.neighbors(0) == [1, 2, 3]


class TestCorpus:
    def test_manifest_round_trip(self, tmp_path):
        write_edge_list_file(parse_graph("0 1\n1 2"), tmp_path / "a.txt")
        write_edge_list_file(parse_graph("0 1"), tmp_path / "b.txt")
        manifest = tmp_path / "manifest.jsonl"
        manifest.write_text(
            json.dumps({"id": "a", "path": "a.txt", "split": "train"}) + "\n"
            + json.dumps({"id": "b", "path": "b.txt", "split": "test"}) + "\n"
        )
        corpus = GraphCorpus.from_manifest(manifest)
        assert corpus.ids() == ["a", "b"]
        assert corpus.ids("train") == ["a"]
        assert corpus.graphs["a"].n == 3

    def test_unknown_split_rejected(self, tmp_path):
        write_edge_list_file(parse_graph("0 1"), tmp_path / "a.txt")
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps({"id": "a", "path": "a.txt", "split": "dev"}) + "\n")
        with pytest.raises(GraphValidationError, match="unknown split"):
            GraphCorpus.from_manifest(manifest)

    def test_bad_manifest_record(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("{not json}\n")
        with pytest.raises(GraphParseError, match="line 1"):
            GraphCorpus.from_manifest(manifest)
