"""End-to-end demonstration pipeline on the bundled toy corpus.

Twenty small connected graphs ship with the package.  The demo lays each
out with all eight algorithms, synthesizes three seeded human labelers,
labels every graph with the deterministic mock LLM (structural prompts),
trains the preference model on raster features of the training split, and
writes a full alignment report.  Everything is seed-deterministic so the
report text can be golden-tested byte for byte.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from gdpref.alignment import (
    alignment_alpha_micro,
    alignment_report,
    confidence_curve,
    paired_t_test,
)
from gdpref.graphs import GraphCorpus
from gdpref.labels import LabelRecord, LabelStore
from gdpref.layouts import ALGORITHMS, layout_all, normalize
from gdpref.llm import (
    MockLLMClient,
    PromptStrategy,
    build_prompt,
    label_with_llm,
    structure_text_for,
)
from gdpref.model import (
    CandidateSample,
    TrainConfig,
    predict,
    raster_features,
    save_checkpoint,
    train,
)
from gdpref.raster import render
from gdpref.report import (
    render_report_text,
    write_confidence_png,
    write_heatmap_pgm,
    write_heatmap_png,
    write_pairwise_tsv,
)
from gdpref.rng import child_rng

HUMANS = ("h1", "h2", "h3")
ALPHA_GRID = (0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
CONFIDENCE_THRESHOLDS = (0.0, 0.2, 0.4, 0.6, 0.8)
RENDER_SIZE = 64
PYRAMID_LEVELS = 2

# biased toward the stress-based layouts, mirroring observed human taste
_CHOICE_WEIGHTS = np.array([0.24, 0.30] + [0.46 / 6] * 6)


def toy_corpus() -> GraphCorpus:
    manifest = resources.files("gdpref.data.toy") / "manifest.jsonl"
    with resources.as_file(manifest) as path:
        return GraphCorpus.from_manifest(path)


def _clock(counter: list) -> str:
    counter[0] += 1
    t = counter[0]
    return f"2026-01-05T{10 + t // 3600:02d}:{(t // 60) % 60:02d}:{t % 60:02d}Z"


def _synthesize_human_labels(corpus, layout_sets, seed, counter) -> LabelStore:
    store = LabelStore()
    for aid in HUMANS:
        for gid in corpus.ids():
            rng = child_rng(seed, "demo-human", aid, gid)
            choice = ALGORITHMS[int(rng.choice(8, p=_CHOICE_WEIGHTS))]
            store.add(
                LabelRecord(
                    graph_id=gid,
                    annotator_id=aid,
                    choice=choice,
                    display_order=layout_sets[gid].display_order,
                    duration_ms=int(rng.integers(2000, 15000)),
                    hard=bool(rng.random() < 0.1),
                    timestamp=_clock(counter),
                )
            )
    return store


def _mock_llm_script(corpus, layout_sets, human_store, seed) -> dict:
    """Scripted responses: half the time the display position of the human
    majority choice, otherwise a seeded-uniform position."""
    script = {}
    for gid in corpus.ids():
        rng = child_rng(seed, "demo-llm", gid)
        q = human_store.soft_targets(gid)
        majority = int(np.argmax(q))
        if rng.random() < 0.5:
            position = layout_sets[gid].display_order.index(majority) + 1
        else:
            position = 1 + int(rng.integers(8))
        logprob = -round(float(rng.random() * 0.8 + 0.05), 4)
        script[gid] = {
            "text": (
                "The chosen drawing balances node spacing with few edge crossings. "
                f"In conclusion, I will pick layout {position}"
            ),
            "token_logprobs": [{"token": str(position), "logprob": logprob}],
        }
    return script


def _label_with_mock_llm(corpus, layout_sets, human_store, seed, transcript_dir):
    strategy = PromptStrategy(kind="structural", structural_encoding="edge_list")
    script = _mock_llm_script(corpus, layout_sets, human_store, seed)
    client = MockLLMClient(script)

    def prompt_builder(graph_id, layout_set):
        return build_prompt(
            strategy,
            layout_set=layout_set,
            structure_text=structure_text_for(corpus.graphs[graph_id], "edge_list"),
        )

    tasks = [(gid, layout_sets[gid]) for gid in corpus.ids()]
    return label_with_llm(strategy, tasks, client, prompt_builder, transcript_dir=transcript_dir)


def _graph_features(g, layout_set) -> np.ndarray:
    rows = []
    for alg in ALGORITHMS:
        img = render(
            normalize(layout_set.layouts[alg]), size=RENDER_SIZE, node_radius=2, edges=g.edges
        )
        rows.append(raster_features(img, pyramid_levels=PYRAMID_LEVELS))
    return np.stack(rows)


def _train_vm(corpus, layout_sets, human_store, seed):
    features = {gid: _graph_features(corpus.graphs[gid], layout_sets[gid]) for gid in corpus.ids()}
    samples = [
        CandidateSample(graph_id=gid, features=features[gid], target=human_store.soft_targets(gid))
        for gid in corpus.ids("train")
    ]
    config = TrainConfig(lr=1e-3, epochs=30, batch=16, seed=seed, augment_k=4)
    params, losses = train(samples, config)
    identity = tuple(range(8))
    predictions = [
        predict(params, features[gid], identity, graph_id=gid) for gid in corpus.ids()
    ]
    return params, losses, predictions


def _per_graph_human_match(store, choices: dict, graph_ids) -> list:
    """Fraction of human labels per graph matching the given labeler."""
    scores = []
    for gid in graph_ids:
        human = [r.choice for r in store.labels_for_graph(gid) if r.annotator_id in HUMANS]
        scores.append(sum(1 for c in human if c == choices[gid]) / len(human))
    return scores


def run_demo(out_dir, seed: int = 0) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    transcripts = out / "transcripts"
    transcripts.mkdir(exist_ok=True)
    counter = [0]

    corpus = toy_corpus()
    layout_sets = {gid: layout_all(corpus.graphs[gid], seed=seed) for gid in corpus.ids()}

    human_store = _synthesize_human_labels(corpus, layout_sets, seed, counter)

    llm_labels, llm_summary = _label_with_mock_llm(
        corpus, layout_sets, human_store, seed, transcripts
    )
    params, losses, vm_predictions = _train_vm(corpus, layout_sets, human_store, seed)
    save_checkpoint(params, out / "model.npz")

    store = LabelStore.ingest(human_store.serialize())
    for lab in llm_labels:
        store.add(
            LabelRecord(
                graph_id=lab.graph_id,
                annotator_id="llm",
                choice=lab.choice,
                display_order=layout_sets[lab.graph_id].display_order,
                duration_ms=0,
                hard=False,
                timestamp=_clock(counter),
            )
        )
    identity = tuple(range(8))
    for pred in vm_predictions:
        store.add(
            LabelRecord(
                graph_id=pred.graph_id,
                annotator_id="vm",
                choice=pred.choice,
                display_order=identity,
                duration_ms=0,
                hard=False,
                timestamp=_clock(counter),
            )
        )
    store.write(out / "labels.jsonl")

    llm_preds = [
        {"graph_id": l.graph_id, "choice": l.choice, "confidence": l.confidence}
        for l in llm_labels
    ]
    vm_preds = [
        {"graph_id": p.graph_id, "choice": p.choice, "confidence": p.confidence}
        for p in vm_predictions
    ]
    (out / "predictions.jsonl").write_text(
        "".join(json.dumps({"labeler": "llm", **p}) + "\n" for p in llm_preds)
        + "".join(json.dumps({"labeler": "vm", **p}) + "\n" for p in vm_preds),
        encoding="utf-8",
    )

    report = alignment_report(store)
    alpha_sweep = [
        (a, alignment_alpha_micro(store, layout_sets, a, annotators=HUMANS)) for a in ALPHA_GRID
    ]
    curves = {
        "llm": confidence_curve(llm_preds, human_store, CONFIDENCE_THRESHOLDS),
        "vm": confidence_curve(vm_preds, human_store, CONFIDENCE_THRESHOLDS),
    }
    gids = corpus.ids()
    t_tests = {
        "llm vs vm (per-graph human-match)": paired_t_test(
            _per_graph_human_match(store, {p["graph_id"]: p["choice"] for p in llm_preds}, gids),
            _per_graph_human_match(store, {p["graph_id"]: p["choice"] for p in vm_preds}, gids),
        )
    }
    extra = [
        f"llm labeled: {llm_summary['labeled']} (unparseable: {len(llm_summary['unparseable'])})",
        f"vm training: epochs={len(losses)} first_loss={losses[0]:.6f} final_loss={losses[-1]:.6f}",
    ]
    text = render_report_text(
        report, store, alpha_sweep=alpha_sweep, curves=curves, t_tests=t_tests, extra_lines=extra
    )
    (out / "report.txt").write_text(text, encoding="utf-8")
    write_pairwise_tsv(report, out / "pairwise.tsv")
    write_heatmap_pgm(report, out / "heatmap.pgm")
    write_heatmap_png(report, out / "heatmap.png")
    write_confidence_png(curves, out / "confidence.png")
    return out / "report.txt"
