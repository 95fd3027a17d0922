"""Structural node embeddings used in LLM prompts.

Spectral embeddings are the eigenvectors of the unnormalized Laplacian
L = D - A for the k smallest nonzero eigenvalues.  Node2Vec embeddings are
produced by second-order biased random walks followed by skip-gram training
with negative sampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gdpref.graphs import Graph
from gdpref.rng import child_rng


class EmbeddingError(ValueError):
    pass


@dataclass
class NodeEmbeddings:
    graph_id: str
    method: str  # "spectral" | "node2vec"
    vectors: np.ndarray  # shape (n, dim)
    eigenvalues: np.ndarray = None  # spectral only

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


@dataclass
class WalkCorpus:
    walks: list  # list of lists of node ids
    n_nodes: int
    params: dict


def laplacian(g: Graph) -> np.ndarray:
    L = np.zeros((g.n, g.n))
    for u, v in g.edges:
        L[u, v] = L[v, u] = -1.0
    for i in range(g.n):
        L[i, i] = g.degree(i)
    return L


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    out = vectors.copy()
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        if out[k, j] < 0:
            out[:, j] = -out[:, j]
    return out


def spectral_embedding(g: Graph, k: int) -> NodeEmbeddings:
    """Eigenvectors of L for the k smallest nonzero eigenvalues, ascending."""
    if not g.is_connected():
        raise EmbeddingError(f"{g.id}: spectral embedding requires a connected graph")
    if k > g.n - 1:
        raise EmbeddingError(f"{g.id}: k={k} exceeds |V|-1={g.n - 1}")
    if k < 1:
        raise EmbeddingError("k must be >= 1")
    evals, evecs = np.linalg.eigh(laplacian(g))
    # connected graph: exactly one zero eigenvalue, skip it
    vectors = _fix_signs(evecs[:, 1 : k + 1])
    return NodeEmbeddings(graph_id=g.id, method="spectral", vectors=vectors, eigenvalues=evals[1 : k + 1])


def random_walks(g: Graph, l: int, walks_per_node: int, p: float, q: float, seed: int) -> WalkCorpus:
    """Second-order biased walks: weight 1/p back to the previous node,
    1 to a common neighbor of the previous node, 1/q otherwise."""
    if not g.is_connected():
        raise EmbeddingError(f"{g.id}: walks require a connected graph")
    if l < 2:
        raise EmbeddingError("walk length must be >= 2")
    if p <= 0 or q <= 0:
        raise EmbeddingError("p and q must be positive")
    neighbor_sets = [set(g.neighbors(i)) for i in range(g.n)]
    walks = []
    for start in range(g.n):
        for w in range(walks_per_node):
            rng = child_rng(seed, "walk", start, w)
            walk = [start]
            nbrs = g.neighbors(start)
            walk.append(int(nbrs[rng.integers(len(nbrs))]))
            while len(walk) < l:
                prev, cur = walk[-2], walk[-1]
                nbrs = g.neighbors(cur)
                weights = np.empty(len(nbrs))
                prev_nbrs = neighbor_sets[prev]
                for i, x in enumerate(nbrs):
                    if x == prev:
                        weights[i] = 1.0 / p
                    elif x in prev_nbrs:
                        weights[i] = 1.0
                    else:
                        weights[i] = 1.0 / q
                weights /= weights.sum()
                walk.append(int(nbrs[rng.choice(len(nbrs), p=weights)]))
            walks.append(walk)
    params = {"l": l, "walks_per_node": walks_per_node, "p": p, "q": q, "seed": seed}
    return WalkCorpus(walks=walks, n_nodes=g.n, params=params)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))


def skipgram_train(
    walks: WalkCorpus,
    dim: int,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    lr: float = 0.025,
    seed: int = 0,
) -> tuple:
    """Skip-gram with negative sampling over walk sequences.

    Returns (NodeEmbeddings, per-epoch mean losses).  Deterministic given seed.
    """
    if not walks.walks:
        raise EmbeddingError("empty walk corpus")
    if dim < 2:
        raise EmbeddingError("dim must be >= 2")
    n = walks.n_nodes
    rng = child_rng(seed, "skipgram-init")
    emb_in = (rng.random((n, dim)) - 0.5) / dim
    emb_out = np.zeros((n, dim))

    centers, contexts = [], []
    for walk in walks.walks:
        for i, c in enumerate(walk):
            lo, hi = max(0, i - window), min(len(walk), i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(c)
                    contexts.append(walk[j])
    centers = np.asarray(centers)
    contexts = np.asarray(contexts)
    n_pairs = len(centers)

    counts = np.bincount(np.concatenate([np.concatenate(walks.walks)]), minlength=n).astype(float)
    noise = counts**0.75
    noise /= noise.sum()

    batch = 256
    losses = []
    total_steps = epochs * ((n_pairs + batch - 1) // batch)
    step = 0
    for epoch in range(epochs):
        order = child_rng(seed, "skipgram-shuffle", epoch).permutation(n_pairs)
        neg = child_rng(seed, "skipgram-neg", epoch).choice(n, size=(n_pairs, negatives), p=noise)
        epoch_loss = 0.0
        for s in range(0, n_pairs, batch):
            idx = order[s : s + batch]
            cur_lr = lr * max(1e-4, 1.0 - step / total_steps)
            step += 1
            c, o = centers[idx], contexts[idx]
            vn = neg[idx]  # (b, negatives)
            vc = emb_in[c]  # (b, dim)
            vo = emb_out[o]
            vneg = emb_out[vn]  # (b, negatives, dim)

            pos_score = _sigmoid(np.einsum("bd,bd->b", vc, vo))
            neg_score = _sigmoid(-np.einsum("bd,bnd->bn", vc, vneg))
            epoch_loss += float(-np.log(np.maximum(pos_score, 1e-12)).sum() - np.log(np.maximum(neg_score, 1e-12)).sum())

            g_pos = pos_score - 1.0  # d loss / d (vc.vo)
            g_neg = 1.0 - neg_score  # d loss / d (vc.vneg)
            grad_c = g_pos[:, None] * vo + np.einsum("bn,bnd->bd", g_neg, vneg)
            grad_o = g_pos[:, None] * vc
            grad_neg = g_neg[:, :, None] * vc[:, None, :]

            np.add.at(emb_in, c, -cur_lr * grad_c)
            np.add.at(emb_out, o, -cur_lr * grad_o)
            np.add.at(emb_out, vn.ravel(), -cur_lr * grad_neg.reshape(-1, emb_out.shape[1]))
        losses.append(epoch_loss / n_pairs)

    gid = walks.params.get("graph_id", "g")
    return NodeEmbeddings(graph_id=gid, method="node2vec", vectors=emb_in), losses


def node2vec_embedding(
    g: Graph,
    dim: int = 32,
    l: int = 40,
    walks_per_node: int = 10,
    p: float = 1.0,
    q: float = 1.0,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    lr: float = 0.025,
    seed: int = 0,
) -> NodeEmbeddings:
    """Random walks followed by skip-gram training (defaults d=32)."""
    walks = random_walks(g, l=l, walks_per_node=walks_per_node, p=p, q=q, seed=seed)
    walks.params["graph_id"] = g.id
    emb, _ = skipgram_train(walks, dim=dim, window=window, negatives=negatives, epochs=epochs, lr=lr, seed=seed)
    return emb


def write_embedding_file(emb: NodeEmbeddings, path) -> None:
    """Header ``graph_id method n dim``, then n rows of dim decimals."""
    lines = [f"{emb.graph_id} {emb.method} {emb.n} {emb.dim}"]
    for row in emb.vectors:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_embedding_file(path) -> NodeEmbeddings:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmbeddingError(f"{path}: empty embedding file")
    head = lines[0].split()
    if len(head) != 4:
        raise EmbeddingError(f"{path}: bad header {lines[0]!r}")
    gid, method, n, dim = head[0], head[1], int(head[2]), int(head[3])
    rows = [line.split() for line in lines[1 : n + 1]]
    if len(rows) != n or any(len(r) != dim for r in rows):
        raise EmbeddingError(f"{path}: expected {n} rows of {dim} values")
    vectors = np.array([[float(x) for x in r] for r in rows])
    return NodeEmbeddings(graph_id=gid, method=method, vectors=vectors)
