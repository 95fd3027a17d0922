"""HTTP service backing the labeling UI.

Display permutations travel in signed stateless tokens (HMAC-SHA256 with a
service secret), so clients cannot forge the position-to-algorithm mapping
and the service survives restarts without session state.  All store
mutations are serialized through one lock (single-writer contract); the
store file is rewritten after every accepted label.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel

from gdpref.labels import (
    AssignmentState,
    LabelRecord,
    LabelStateError,
    LabelStore,
    next_assignment,
    progress_message,
)
from gdpref.layouts import ALGORITHMS, layout_all, normalize
from gdpref.raster import render, to_png_bytes
from gdpref.rng import child_rng


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def sign_token(secret: str, graph_id: str, annotator_id: str, permutation) -> str:
    payload = json.dumps(
        {"g": graph_id, "a": annotator_id, "p": list(int(x) for x in permutation)},
        separators=(",", ":"),
    ).encode("utf-8")
    b64 = base64.urlsafe_b64encode(payload).decode("ascii")
    sig = hmac.new(secret.encode("utf-8"), payload, hashlib.sha256).hexdigest()
    return f"{b64}.{sig}"


def verify_token(secret: str, token: str) -> dict:
    try:
        b64, sig = token.split(".", 1)
        payload = base64.urlsafe_b64decode(b64.encode("ascii"))
    except (ValueError, TypeError):
        raise HTTPException(status_code=400, detail="malformed display token") from None
    expect = hmac.new(secret.encode("utf-8"), payload, hashlib.sha256).hexdigest()
    if not hmac.compare_digest(sig, expect):
        raise HTTPException(status_code=403, detail="display token signature invalid")
    obj = json.loads(payload)
    if sorted(obj["p"]) != list(range(8)):
        raise HTTPException(status_code=400, detail="display token permutation invalid")
    return obj


class LabelBody(BaseModel):
    annotator: str
    graph_id: str
    position: int
    duration_ms: int
    hard: bool = False
    display_token: str


class SkipBody(BaseModel):
    annotator: str
    graph_id: str
    display_token: str


def create_app(
    corpus,
    store_path,
    secret: str,
    seed: int = 0,
    render_size: int = 128,
    clock=None,
) -> FastAPI:
    store_path = Path(store_path)
    store = LabelStore.load(store_path)
    state = AssignmentState()
    lock = threading.Lock()
    clock = clock or _utc_now
    assign_counter = [0]
    raster_cache = {}
    layout_cache = {}

    def layouts_of(graph_id: str):
        if graph_id not in layout_cache:
            layout_cache[graph_id] = layout_all(corpus.graphs[graph_id], seed=seed)
        return layout_cache[graph_id]

    def raster_b64(graph_id: str, algorithm: str) -> str:
        key = (graph_id, algorithm, seed, render_size)
        if key not in raster_cache:
            g = corpus.graphs[graph_id]
            lay = normalize(layouts_of(graph_id).layouts[algorithm])
            png = to_png_bytes(render(lay, size=render_size, node_radius=2, edges=g.edges))
            raster_cache[key] = base64.b64encode(png).decode("ascii")
        return raster_cache[key]

    app = FastAPI(title="gdpref label service")

    @app.get("/api/next")
    def api_next(annotator: str = Query(min_length=1)):
        with lock:
            rng = child_rng(seed, "assign", annotator, assign_counter[0])
            assign_counter[0] += 1
            gid = next_assignment(state, store, corpus.ids(), annotator, rng)
            if gid is None:
                return Response(status_code=204)
            perm = tuple(int(x) for x in child_rng(seed, "serve", gid, annotator).permutation(8))
            images = [raster_b64(gid, ALGORITHMS[perm[pos]]) for pos in range(8)]
            labeled = len(store.choices_of(annotator))
        return {
            "graph_id": gid,
            "images": images,
            "display_token": sign_token(secret, gid, annotator, perm),
            "progress": {"labeled": labeled},
        }

    @app.post("/api/label")
    def api_label(body: LabelBody):
        tok = verify_token(secret, body.display_token)
        if tok["g"] != body.graph_id or tok["a"] != body.annotator:
            raise HTTPException(status_code=403, detail="token does not match request")
        if not 1 <= body.position <= 8:
            raise HTTPException(status_code=400, detail="position must be 1..8")
        perm = tuple(tok["p"])
        choice = ALGORITHMS[perm[body.position - 1]]
        with lock:
            store.add(
                LabelRecord(
                    graph_id=body.graph_id,
                    annotator_id=body.annotator,
                    choice=choice,
                    display_order=perm,
                    duration_ms=body.duration_ms,
                    hard=body.hard,
                    timestamp=clock(),
                )
            )
            state.on_labeled(body.annotator, body.graph_id)
            store.write(store_path)
            message = progress_message(store, body.annotator)
        return {"ok": True, "choice_recorded": True, "message": message}

    @app.post("/api/skip")
    def api_skip(body: SkipBody):
        tok = verify_token(secret, body.display_token)
        if tok["g"] != body.graph_id or tok["a"] != body.annotator:
            raise HTTPException(status_code=403, detail="token does not match request")
        with lock:
            try:
                state.record_skip(body.annotator, body.graph_id, store)
            except LabelStateError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from None
        return {"ok": True}

    @app.get("/api/stats")
    def api_stats():
        with lock:
            total = len(store)
            graphs = store.graphs
            per_annotator = store.labels_per_annotator()
            if total:
                dist = {alg: {"count": c, "percent": p} for alg, (c, p) in store.choice_distribution().items()}
                consensus = store.consensus_distribution()
            else:
                dist = {alg: {"count": 0, "percent": 0.0} for alg in ALGORITHMS}
                consensus = {k: 0.0 for k in range(1, 9)}
        return {
            "total_labels": total,
            "graphs_labeled": len(graphs),
            "mean_labels_per_graph": (total / len(graphs)) if graphs else 0.0,
            "per_annotator": per_annotator,
            "choice_distribution": dist,
            "consensus_distribution": consensus,
        }

    app.state.store = store
    app.state.assignment = state
    return app
