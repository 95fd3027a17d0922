"""Command-line surface tying the toolkit together.

Subcommands: layout, embed, labels, align, train, predict, llm-label,
serve, demo.  Delimited/text outputs are deterministic; the ``align
--report-dir`` and ``demo`` paths additionally render matplotlib figures
next to the delimited files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from gdpref import __version__
from gdpref.alignment import (
    alignment_alpha_micro,
    alignment_report,
    confidence_curve,
    macro_alignment,
    micro_alignment,
    pairwise_alignment,
    paired_t_test,
)
from gdpref.embeddings import node2vec_embedding, spectral_embedding, write_embedding_file
from gdpref.graphs import GraphCorpus, parse_graph
from gdpref.labels import LabelStore
from gdpref.layouts import ALGORITHMS, layout, layout_all, normalize, write_layout_file
from gdpref.model import (
    CandidateSample,
    TrainConfig,
    build_dataset,
    load_checkpoint,
    load_external_features,
    predict,
    save_checkpoint,
    train,
)
from gdpref.raster import render, write_pgm
from gdpref.report import (
    render_report_text,
    write_confidence_png,
    write_heatmap_pgm,
    write_heatmap_png,
    write_pairwise_tsv,
)

RENDER_SIZE = 64
PYRAMID_LEVELS = 2


def _load_graph(path, fmt):
    text = Path(path).read_text(encoding="utf-8")
    return parse_graph(text, fmt=fmt, graph_id=Path(path).stem)


def _corpus_features(corpus, seed):
    from gdpref.model import raster_features

    out = {}
    for gid in corpus.ids():
        g = corpus.graphs[gid]
        ls = layout_all(g, seed=seed)
        rows = [
            raster_features(
                render(normalize(ls.layouts[alg]), size=RENDER_SIZE, node_radius=2, edges=g.edges),
                pyramid_levels=PYRAMID_LEVELS,
            )
            for alg in ALGORITHMS
        ]
        out[gid] = np.stack(rows)
    return out


# -- subcommands ---------------------------------------------------------------


def cmd_layout(args) -> int:
    g = _load_graph(args.graph, args.format)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    algorithms = ALGORITHMS if args.algorithm == "all" else (args.algorithm,)
    for alg in algorithms:
        l = layout(g, alg, seed=args.seed)
        write_layout_file(l, out / f"{g.id}.{alg}.layout")
        if args.render:
            img = render(normalize(l), size=args.size, edges=g.edges)
            write_pgm(img, out / f"{g.id}.{alg}.pgm")
        print(f"{g.id} {alg}: wrote layout" + (" + raster" if args.render else ""))
    return 0


def cmd_embed(args) -> int:
    g = _load_graph(args.graph, args.format)
    if args.method == "spectral":
        emb = spectral_embedding(g, k=args.k)
    else:
        emb = node2vec_embedding(g, dim=args.dim, seed=args.seed)
    write_embedding_file(emb, args.out)
    print(f"{g.id} {args.method}: {emb.n} x {emb.dim} -> {args.out}")
    return 0


def cmd_labels(args) -> int:
    if args.action == "ingest":
        store = LabelStore.ingest(Path(args.input).read_text(encoding="utf-8"))
        store.write(args.store)
        print(f"ingested {len(store)} labels over {len(store.graphs)} graphs -> {args.store}")
        return 0
    store = LabelStore.load(args.store)
    if args.action == "stats":
        per = store.labels_per_annotator()
        print(f"labels: {len(store)}")
        print(f"graphs: {len(store.graphs)}")
        print(f"annotators: {len(per)}")
        if store.graphs:
            print(f"mean labels per graph: {len(store) / len(store.graphs):.2f}")
        for aid in sorted(per):
            print(f"  {aid}: {per[aid]}")
    elif args.action == "consensus":
        for k, pct in store.consensus_distribution().items():
            print(f"{k}\t{pct:.2f}")
    elif args.action == "distribution":
        annotators = set(args.annotator) if args.annotator else None
        for alg, (count, pct) in store.choice_distribution(annotators).items():
            print(f"{alg}\t{count}\t{pct:.2f}")
    return 0


def cmd_align(args) -> int:
    store = LabelStore.load(args.store)
    if args.t_test:
        a = [float(x) for x in Path(args.t_test[0]).read_text().split()]
        b = [float(x) for x in Path(args.t_test[1]).read_text().split()]
        res = paired_t_test(a, b)
        print(f"t={res['t']:.4f} p={res['p']:.4f} df={res['df']}")
        return 0
    if args.pairwise:
        pa = pairwise_alignment(store, *args.pairwise)
        value = "n/a" if pa.alignment is None else f"{pa.alignment:.4f}"
        print(f"{args.pairwise[0]} vs {args.pairwise[1]}: {pa.matches}/{pa.overlap} = {value}")
        return 0
    if args.alpha_sweep:
        corpus = GraphCorpus.from_manifest(args.manifest)
        layout_sets = {gid: layout_all(corpus.graphs[gid], seed=args.seed) for gid in corpus.ids()}
        for alpha in (0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
            value = alignment_alpha_micro(store, layout_sets, alpha)
            print(f"{alpha:.2f}\t{value:.4f}")
        return 0
    if args.confidence_curve:
        preds = [
            json.loads(line)
            for line in Path(args.confidence_curve).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        curve = confidence_curve(preds, store, args.thresholds)
        for pt in curve.points:
            al = "n/a" if pt["alignment"] is None else f"{pt['alignment']:.4f}"
            print(f"{pt['threshold']:.2f}\t{pt['retained_fraction']:.4f}\t{al}")
        return 0
    report = alignment_report(store)
    if args.report_dir:
        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(render_report_text(report, store), encoding="utf-8")
        write_pairwise_tsv(report, out / "pairwise.tsv")
        write_heatmap_pgm(report, out / "heatmap.pgm")
        write_heatmap_png(report, out / "heatmap.png")
        print(f"wrote report to {out}")
        return 0
    print(f"micro\t{micro_alignment(store):.4f}")
    print(f"macro\t{macro_alignment(store):.4f}")
    return 0


def _samples_from(corpus, store, features):
    samples = []
    for gid in corpus.ids("train"):
        if gid in features and store.count_for_graph(gid) > 0:
            samples.append(
                CandidateSample(graph_id=gid, features=features[gid], target=store.soft_targets(gid))
            )
    return samples


def cmd_train(args) -> int:
    corpus = GraphCorpus.from_manifest(args.manifest)
    store = LabelStore.load(args.store)
    if args.features:
        features = load_external_features(args.features)
    else:
        features = _corpus_features(corpus, args.seed)
    samples = _samples_from(corpus, store, features)
    config = TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        batch=args.batch,
        seed=args.seed,
        augment_k=args.augment,
        unanimous_only=args.unanimous_only,
    )
    if args.config:
        Path(args.config).write_text(config.to_json(), encoding="utf-8")
    dataset = build_dataset(samples, config)
    print(f"training samples: {len(dataset)} ({len(samples)} graphs x augment {config.augment_k})")
    params, losses = train(samples, config)
    save_checkpoint(params, args.out)
    print(f"epochs: {len(losses)} first loss: {losses[0]:.6f} final loss: {losses[-1]:.6f}")
    print(f"checkpoint -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    corpus = GraphCorpus.from_manifest(args.manifest)
    params = load_checkpoint(args.model)
    if args.features:
        features = load_external_features(args.features)
    else:
        features = _corpus_features(corpus, args.seed)
    identity = tuple(range(8))
    lines = []
    for gid in corpus.ids(args.split):
        pred = predict(params, features[gid], identity, graph_id=gid)
        lines.append(
            json.dumps(
                {"graph_id": gid, "choice": pred.choice, "confidence": round(pred.confidence, 6)}
            )
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(lines)} predictions -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_llm_label(args) -> int:
    from gdpref.llm import (
        HTTPLLMClient,
        LLMClientConfig,
        MockLLMClient,
        PromptStrategy,
        build_prompt,
        label_with_llm,
        structure_text_for,
    )
    from gdpref.raster import to_png_bytes

    corpus = GraphCorpus.from_manifest(args.manifest)
    strategy = PromptStrategy(
        kind=args.strategy, shots=args.shots, structural_encoding=args.encoding
    )
    if args.mock:
        client = MockLLMClient.load(args.mock)
    else:
        client = HTTPLLMClient(LLMClientConfig(base_url=args.base_url, model=args.model))
    layout_sets = {gid: layout_all(corpus.graphs[gid], seed=args.seed) for gid in corpus.ids()}

    def prompt_builder(graph_id, layout_set):
        g = corpus.graphs[graph_id]
        if strategy.kind in ("zero_shot_image", "few_shot_image"):
            images = [
                to_png_bytes(render(normalize(layout_set.at_position(p)), size=256, edges=g.edges))
                for p in range(8)
            ]
            return build_prompt(strategy, query_images=images)
        return build_prompt(
            strategy,
            layout_set=layout_set,
            structure_text=structure_text_for(g, strategy.structural_encoding, seed=args.seed),
        )

    if args.transcripts:
        Path(args.transcripts).mkdir(parents=True, exist_ok=True)
    tasks = [(gid, layout_sets[gid]) for gid in corpus.ids(args.split)]
    labels, summary = label_with_llm(
        strategy, tasks, client, prompt_builder, transcript_dir=args.transcripts
    )
    lines = [
        json.dumps(
            {
                "graph_id": l.graph_id,
                "choice": l.choice,
                "position": l.raw_choice_position,
                "confidence": l.confidence,
            }
        )
        for l in labels
    ]
    Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    print(f"labeled: {summary['labeled']} unparseable: {len(summary['unparseable'])} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from gdpref.service import create_app

    secret = os.environ.get("GDPREF_SECRET")
    if not secret:
        print("error: set $GDPREF_SECRET (display-token signing secret)", file=sys.stderr)
        return 2
    corpus = GraphCorpus.from_manifest(args.manifest)
    app = create_app(corpus, args.store, secret, seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_demo(args) -> int:
    from gdpref.demo import run_demo

    report_path = run_demo(args.out, seed=args.seed)
    print(f"report -> {report_path}")
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gdpref", description="graph-layout preference toolkit")
    p.add_argument("--version", action="version", version=f"gdpref {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("layout", help="compute layouts (and optional rasters) for one graph")
    sp.add_argument("graph")
    sp.add_argument("--algorithm", default="all", choices=("all",) + ALGORITHMS)
    sp.add_argument("--format", default="edge-list", choices=("edge-list", "graphml-subset"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--render", action="store_true")
    sp.add_argument("--size", type=int, default=512)
    sp.set_defaults(func=cmd_layout)

    sp = sub.add_parser("embed", help="spectral or node2vec embeddings for one graph")
    sp.add_argument("graph")
    sp.add_argument("--method", required=True, choices=("spectral", "node2vec"))
    sp.add_argument("--format", default="edge-list", choices=("edge-list", "graphml-subset"))
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--dim", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("labels", help="label-store operations")
    sp.add_argument("action", choices=("ingest", "stats", "consensus", "distribution"))
    sp.add_argument("--store", required=True)
    sp.add_argument("--input", help="label file to ingest")
    sp.add_argument("--annotator", action="append", help="distribution filter (repeatable)")
    sp.set_defaults(func=cmd_labels)

    sp = sub.add_parser("align", help="alignment analytics")
    sp.add_argument("--store", required=True)
    sp.add_argument("--pairwise", nargs=2, metavar=("I", "J"))
    sp.add_argument("--alpha-sweep", action="store_true")
    sp.add_argument("--manifest", help="corpus manifest (alpha sweep)")
    sp.add_argument("--confidence-curve", metavar="PREDICTIONS")
    sp.add_argument("--thresholds", type=float, nargs="+", default=[0.0, 0.2, 0.4, 0.6, 0.8])
    sp.add_argument("--t-test", nargs=2, metavar=("A", "B"))
    sp.add_argument("--report-dir")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_align)

    sp = sub.add_parser("train", help="train the preference model")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--features", help="external embedding file (default: raster features)")
    sp.add_argument("--out", default="model.npz")
    sp.add_argument("--config", help="write the effective training config here")
    sp.add_argument("--lr", type=float, default=1e-4)
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--batch", type=int, default=16)
    sp.add_argument("--augment", type=int, default=1)
    sp.add_argument("--unanimous-only", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="predict preferences with a trained model")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--features")
    sp.add_argument("--split", default=None, choices=(None, "train", "test", "validation"))
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("llm-label", help="label graphs with an LLM (or the offline mock)")
    sp.add_argument("--manifest", required=True)
    sp.add_argument(
        "--strategy",
        default="zero_shot_image",
        choices=("zero_shot_image", "few_shot_image", "structural", "memory_bank"),
    )
    sp.add_argument("--shots", type=int, default=0)
    sp.add_argument("--encoding", default="edge_list", choices=("edge_list", "adjacency", "node2vec", "spectral"))
    sp.add_argument("--mock", help="mock script file (graph_id -> response)")
    sp.add_argument("--base-url", default="http://localhost:8000/v1")
    sp.add_argument("--model", default="gpt-4o-mini")
    sp.add_argument("--split", default=None, choices=(None, "train", "test", "validation"))
    sp.add_argument("--transcripts")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_llm_label)

    sp = sub.add_parser("serve", help="run the labeling HTTP service")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8080)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("demo", help="end-to-end pipeline on the bundled toy corpus")
    sp.add_argument("--out", default="demo-out")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_demo)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
