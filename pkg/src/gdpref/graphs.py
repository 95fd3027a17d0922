"""Graph representation, parsing, validation, and textual serializations.

The canonical interchange format is a plain edge list: one whitespace- (or
comma-) separated integer pair per line, ``#`` comments ignored.  A minimal
GraphML subset (node/edge elements only) is also accepted.  Node ids are
renumbered to 0..n-1 in first-appearance order unless the input labels are
already exactly {0..n-1}, in which case they are kept as-is so that
parse(serialize(g)) preserves numbering.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path


class GraphParseError(ValueError):
    """Malformed input text (carries a line number when available)."""


class GraphValidationError(ValueError):
    """Structurally invalid graph: self-loop, duplicate edge, or empty graph."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with contiguous 0-based node ids.

    Immutable after construction; safe to share across threads.
    """

    id: str
    n: int
    edges: tuple  # tuple of (u, v) with u < v, sorted

    _adj: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n <= 0:
            raise GraphValidationError("empty graph")
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise GraphValidationError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphValidationError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u > v:
                raise GraphValidationError(f"edge ({u}, {v}) not normalized (u < v required)")
            if (u, v) in seen:
                raise GraphValidationError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        adj = {i: [] for i in range(self.n)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for i in adj:
            adj[i].sort()
        object.__setattr__(self, "_adj", adj)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> list:
        return self._adj[u]

    def degree(self, u: int) -> int:
        return len(self._adj[u])

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    def bfs_distances(self, source: int) -> list:
        """Unweighted shortest-path distances from ``source`` (-1 if unreachable)."""
        dist = [-1] * self.n
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist


def _build_graph(graph_id: str, raw_edges: list, line_nos: list) -> Graph:
    if not raw_edges:
        raise GraphValidationError(f"{graph_id}: empty graph (no edges)")
    # keep original integer labels when they are already 0..n-1
    labels = []
    seen_labels = set()
    for u, v in raw_edges:
        for x in (u, v):
            if x not in seen_labels:
                seen_labels.add(x)
                labels.append(x)
    n = len(labels)
    if all(isinstance(x, int) for x in seen_labels) and seen_labels == set(range(n)):
        remap = {x: x for x in seen_labels}
    else:
        remap = {x: i for i, x in enumerate(labels)}
    edges = set()
    for (u, v), line_no in zip(raw_edges, line_nos):
        a, b = remap[u], remap[v]
        if a == b:
            raise GraphValidationError(f"{graph_id}: self-loop at line {line_no}")
        e = (min(a, b), max(a, b))
        if e in edges:
            raise GraphValidationError(f"{graph_id}: duplicate edge at line {line_no}")
        edges.add(e)
    return Graph(id=graph_id, n=n, edges=tuple(sorted(edges)))


def _parse_edge_list(text: str, graph_id: str) -> Graph:
    raw_edges, line_nos = [], []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace("(", " ").replace(")", " ").replace(",", " ").split()
        if len(tokens) != 2:
            raise GraphParseError(f"{graph_id}: line {line_no}: expected two node ids, got {line!r}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphParseError(f"{graph_id}: line {line_no}: non-integer node id in {line!r}") from None
        raw_edges.append((u, v))
        line_nos.append(line_no)
    return _build_graph(graph_id, raw_edges, line_nos)


def _parse_graphml(text: str, graph_id: str) -> Graph:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise GraphParseError(f"{graph_id}: invalid XML: {exc}") from None

    def local(tag):
        return tag.rsplit("}", 1)[-1]

    node_order = []
    raw_edges = []
    for elem in root.iter():
        tag = local(elem.tag)
        if tag == "node":
            node_order.append(elem.get("id"))
        elif tag == "edge":
            raw_edges.append((elem.get("source"), elem.get("target")))
    if any(s is None or t is None for s, t in raw_edges):
        raise GraphParseError(f"{graph_id}: edge element missing source/target")
    remap = {nid: i for i, nid in enumerate(node_order)}
    edges = []
    for s, t in raw_edges:
        if s not in remap or t not in remap:
            raise GraphParseError(f"{graph_id}: edge references undeclared node ({s}, {t})")
        edges.append((remap[s], remap[t]))
    return _build_graph(graph_id, edges, list(range(1, len(edges) + 1)))


def parse_graph(text: str, fmt: str = "edge-list", graph_id: str = "g") -> Graph:
    """Parse graph text in ``edge-list`` or ``graphml-subset`` format."""
    if fmt == "edge-list":
        return _parse_edge_list(text, graph_id)
    if fmt == "graphml-subset":
        return _parse_graphml(text, graph_id)
    raise ValueError(f"unknown graph format {fmt!r}")


def serialize_edge_list(g: Graph) -> str:
    """One ``(u, v)`` pair per line, u < v, sorted; deterministic."""
    return "\n".join(f"({u}, {v})" for u, v in g.edges)


def serialize_adjacency_list(g: Graph) -> str:
    """One ``i: n1, n2, ...`` line per node, neighbors ascending; deterministic."""
    return "\n".join(f"{i}: " + ", ".join(str(v) for v in g.neighbors(i)) for i in range(g.n))


def write_edge_list_file(g: Graph, path) -> None:
    Path(path).write_text("".join(f"{u} {v}\n" for u, v in g.edges), encoding="utf-8")


SPLITS = ("train", "test", "validation")


@dataclass
class GraphCorpus:
    """Graphs keyed by id, each assigned to exactly one split."""

    graphs: dict  # id -> Graph
    split: dict  # id -> "train" | "test" | "validation"

    def __post_init__(self):
        for gid, sp in self.split.items():
            if gid not in self.graphs:
                raise GraphValidationError(f"split entry for unknown graph {gid!r}")
            if sp not in SPLITS:
                raise GraphValidationError(f"unknown split {sp!r} for graph {gid!r}")
        missing = set(self.graphs) - set(self.split)
        if missing:
            raise GraphValidationError(f"graphs without split assignment: {sorted(missing)[:5]}")

    def ids(self, split: str = None) -> list:
        if split is None:
            return sorted(self.graphs)
        return sorted(gid for gid, sp in self.split.items() if sp == split)

    @classmethod
    def from_manifest(cls, manifest_path) -> "GraphCorpus":
        """Load from a line-delimited manifest of {id, path, split} records."""
        manifest_path = Path(manifest_path)
        graphs, split = {}, {}
        for line_no, line in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                gid, path, sp = rec["id"], rec["path"], rec["split"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise GraphParseError(f"{manifest_path}: line {line_no}: bad manifest record: {exc}") from None
            text = (manifest_path.parent / path).read_text(encoding="utf-8")
            fmt = "graphml-subset" if str(path).endswith((".graphml", ".xml")) else "edge-list"
            graphs[gid] = parse_graph(text, fmt=fmt, graph_id=gid)
            split[gid] = sp
        return cls(graphs=graphs, split=split)
