"""Preference-label persistence and semantics.

Labels are stored in canonical algorithm space (the chosen algorithm name),
with the display permutation recorded separately, so analytics are
permutation-free and permutation bugs stay detectable.  The on-disk format
is line-delimited JSON with fields exactly {graph_id, annotator_id, choice,
display_order, duration_ms, hard, timestamp}.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gdpref.layouts import ALGORITHMS

logger = logging.getLogger(__name__)

FIELDS = ("graph_id", "annotator_id", "choice", "display_order", "duration_ms", "hard", "timestamp")


class LabelFormatError(ValueError):
    pass


class LabelStateError(ValueError):
    pass


@dataclass(frozen=True)
class LabelRecord:
    graph_id: str
    annotator_id: str
    choice: str  # canonical algorithm name
    display_order: tuple
    duration_ms: int
    hard: bool
    timestamp: str  # ISO-8601 UTC instant

    def __post_init__(self):
        if self.choice not in ALGORITHMS:
            raise LabelFormatError(f"unknown algorithm tag {self.choice!r}")
        if sorted(self.display_order) != list(range(8)):
            raise LabelFormatError(f"invalid display_order {self.display_order!r}")
        if self.duration_ms < 0:
            raise LabelFormatError("duration_ms must be nonnegative")

    def to_json(self) -> str:
        return json.dumps(
            {
                "graph_id": self.graph_id,
                "annotator_id": self.annotator_id,
                "choice": self.choice,
                "display_order": list(self.display_order),
                "duration_ms": self.duration_ms,
                "hard": self.hard,
                "timestamp": self.timestamp,
            },
            separators=(", ", ": "),
        )

    @classmethod
    def from_json(cls, line: str, line_no: int = 0) -> "LabelRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LabelFormatError(f"line {line_no}: invalid record: {exc}") from None
        missing = [f for f in FIELDS if f not in obj]
        if missing:
            raise LabelFormatError(f"line {line_no}: missing fields {missing}")
        try:
            return cls(
                graph_id=str(obj["graph_id"]),
                annotator_id=str(obj["annotator_id"]),
                choice=obj["choice"],
                display_order=tuple(int(x) for x in obj["display_order"]),
                duration_ms=int(obj["duration_ms"]),
                hard=bool(obj["hard"]),
                timestamp=str(obj["timestamp"]),
            )
        except LabelFormatError as exc:
            raise LabelFormatError(f"line {line_no}: {exc}") from None


class LabelStore:
    """In-memory label store; duplicate (graph, annotator) pairs are
    last-write-wins with a logged warning."""

    def __init__(self):
        self._records = {}  # (graph_id, annotator_id) -> LabelRecord, insertion-ordered

    def add(self, record: LabelRecord) -> None:
        key = (record.graph_id, record.annotator_id)
        if key in self._records:
            logger.warning("duplicate label for graph=%s annotator=%s: last write wins", *key)
        self._records[key] = record

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list:
        return list(self._records.values())

    @property
    def graphs(self) -> list:
        return sorted({gid for gid, _ in self._records})

    @property
    def annotators(self) -> list:
        return sorted({aid for _, aid in self._records})

    def labels_for_graph(self, graph_id: str) -> list:
        return [r for (gid, _), r in self._records.items() if gid == graph_id]

    def choices_of(self, annotator_id: str) -> dict:
        return {gid: r.choice for (gid, aid), r in self._records.items() if aid == annotator_id}

    def count_for_graph(self, graph_id: str) -> int:
        return sum(1 for gid, _ in self._records if gid == graph_id)

    def has_label(self, graph_id: str, annotator_id: str) -> bool:
        return (graph_id, annotator_id) in self._records

    # -- serialization -----------------------------------------------------

    def serialize(self) -> str:
        return "".join(r.to_json() + "\n" for r in self._records.values())

    def write(self, path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def ingest(cls, lines) -> "LabelStore":
        """Build a store from an iterable of JSON lines (or one big string)."""
        if isinstance(lines, str):
            lines = lines.splitlines()
        store = cls()
        for line_no, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            store.add(LabelRecord.from_json(line, line_no))
        return store

    @classmethod
    def load(cls, path) -> "LabelStore":
        path = Path(path)
        if not path.exists():
            return cls()
        return cls.ingest(path.read_text(encoding="utf-8"))

    # -- analytics ---------------------------------------------------------

    def soft_targets(self, graph_id: str) -> np.ndarray:
        """Empirical choice distribution q over the eight algorithms."""
        recs = self.labels_for_graph(graph_id)
        if not recs:
            raise LabelStateError(f"no labels for graph {graph_id!r}")
        q = np.zeros(8)
        for r in recs:
            q[ALGORITHMS.index(r.choice)] += 1.0
        return q / q.sum()

    def consensus_distribution(self) -> dict:
        """Percentage of graphs per number of distinct chosen layouts (1..8)."""
        if not self._records:
            raise LabelStateError("empty store")
        distinct = {}
        for (gid, _), r in self._records.items():
            distinct.setdefault(gid, set()).add(r.choice)
        hist = {k: 0 for k in range(1, 9)}
        for choices in distinct.values():
            hist[len(choices)] += 1
        total = len(distinct)
        return {k: 100.0 * v / total for k, v in hist.items()}

    def choice_distribution(self, annotators=None) -> dict:
        """Per-algorithm counts and percentages over the (optionally filtered) labels."""
        recs = [
            r
            for (_, aid), r in self._records.items()
            if annotators is None or aid in annotators
        ]
        if not recs:
            raise LabelStateError("no labels match the annotator filter")
        counts = {alg: 0 for alg in ALGORITHMS}
        for r in recs:
            counts[r.choice] += 1
        total = len(recs)
        return {alg: (c, 100.0 * c / total) for alg, c in counts.items()}

    def labels_per_annotator(self) -> dict:
        out = {}
        for (_, aid) in self._records:
            out[aid] = out.get(aid, 0) + 1
        return out


def progress_message(store: LabelStore, annotator_id: str) -> str | None:
    """Motivational popup text on every 50th label by this annotator.

    Percentile is the fraction of other annotators with strictly fewer labels.
    """
    per = store.labels_per_annotator()
    total = per.get(annotator_id, 0)
    if total == 0 or total % 50 != 0:
        return None
    others = [v for aid, v in per.items() if aid != annotator_id]
    pct = 100.0 * sum(1 for v in others if v < total) / max(1, len(others))
    return (
        f"Good job! You have labeled {total} graphs. "
        f"You have labeled more graphs than {pct:.2f}% of users. "
        "Please keep up the great work!"
    )


@dataclass
class AssignmentState:
    """Adaptive-assignment state: per-annotator FIFO skip queues."""

    resurface_prob: float = 0.40
    skip_queues: dict = field(default_factory=dict)

    def queue(self, annotator_id: str) -> list:
        return self.skip_queues.setdefault(annotator_id, [])

    def record_skip(self, annotator_id: str, graph_id: str, store: LabelStore) -> None:
        if store.has_label(graph_id, annotator_id):
            raise LabelStateError(f"annotator {annotator_id!r} already labeled graph {graph_id!r}")
        q = self.queue(annotator_id)
        if graph_id not in q:
            q.append(graph_id)

    def on_labeled(self, annotator_id: str, graph_id: str) -> None:
        q = self.queue(annotator_id)
        if graph_id in q:
            q.remove(graph_id)


def next_assignment(
    state: AssignmentState,
    store: LabelStore,
    graph_ids,
    annotator_id: str,
    rng: np.random.Generator,
) -> str | None:
    """Pick the next graph for an annotator.

    With probability ``resurface_prob`` the head of the skip queue is served
    (if nonempty).  Otherwise: unlabeled-by-annotator graphs in the
    minimum-label-count tier, zero-label graphs first; within a tier of
    count >= 2, graphs with conflicting labels are prioritized; ties broken
    by a seeded-uniform draw.  Returns None when exhausted.
    """
    queue = state.queue(annotator_id)
    take_skip = rng.random() < state.resurface_prob
    if take_skip and queue:
        return queue[0]
    labeled = set(store.choices_of(annotator_id))
    candidates = [gid for gid in graph_ids if gid not in labeled]
    if not candidates:
        return queue[0] if queue else None
    counts = [store.count_for_graph(gid) for gid in candidates]
    min_count = min(counts)
    tier = [gid for gid, c in zip(candidates, counts) if c == min_count]
    if min_count >= 2:
        conflicted = [gid for gid in tier if len({r.choice for r in store.labels_for_graph(gid)}) >= 2]
        if conflicted:
            tier = conflicted
    return tier[int(rng.integers(len(tier)))]
