"""Deterministic implementations of the eight layout algorithms.

Algorithms: neato (full stress majorization, w_ij = d_ij^-2), kamada_kawai
(per-node Newton on the spring energy), spring (Fruchterman-Reingold with
linear cooling), fdp (FR with grid-bucketed repulsion cutoff), fa2
(degree-weighted repulsion, linear attraction), sfdp (matching-based
coarsening + FR refinement), pmds (pivot MDS), spectral (Laplacian
eigenvectors 2 and 3).

All randomness (initial positions, pivot choice, display permutation) comes
from one seeded generator via the stream-splitting rule in gdpref.rng, so
identical (graph, algorithm, params, seed) yields bit-identical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from gdpref.graphs import Graph
from gdpref.rng import child_rng

ALGORITHMS = ("neato", "kamada_kawai", "fa2", "fdp", "sfdp", "spring", "pmds", "spectral")

# algorithms that need graph-theoretic distances and hence connectivity
DISTANCE_BASED = frozenset({"neato", "kamada_kawai", "pmds", "spectral"})


class LayoutError(ValueError):
    pass


@dataclass
class Layout:
    graph_id: str
    algorithm: str
    coords: np.ndarray  # (n, 2)
    converged: bool = True
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise LayoutError("coords must have shape (n, 2)")
        if not np.all(np.isfinite(self.coords)):
            raise LayoutError("coords must be finite")


@dataclass
class LayoutSet:
    graph_id: str
    layouts: dict  # algorithm -> Layout
    display_order: tuple  # display position p shows ALGORITHMS[display_order[p]]

    def __post_init__(self):
        if set(self.layouts) != set(ALGORITHMS):
            raise LayoutError("layout set must contain all eight algorithms exactly once")
        if sorted(self.display_order) != list(range(8)):
            raise LayoutError("display_order must be a permutation of 0..7")

    def at_position(self, position: int) -> Layout:
        """Layout shown at display position ``position`` (0-based)."""
        return self.layouts[ALGORITHMS[self.display_order[position]]]

    def algorithm_at(self, position: int) -> str:
        return ALGORITHMS[self.display_order[position]]


def distance_matrix(g: Graph) -> np.ndarray:
    """All-pairs BFS distances; graph must be connected."""
    D = np.empty((g.n, g.n))
    for s in range(g.n):
        d = g.bfs_distances(s)
        if min(d) < 0:
            raise LayoutError(f"{g.id}: graph is disconnected")
        D[s] = d
    return D


def _random_init(g: Graph, seed: int, algorithm: str) -> np.ndarray:
    return child_rng(seed, "layout", algorithm, "init").random((g.n, 2))


def _stress(X: np.ndarray, D: np.ndarray, W: np.ndarray) -> float:
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    iu = np.triu_indices(len(X), k=1)
    return float((W[iu] * (dist[iu] - D[iu]) ** 2).sum())


def _neato(g: Graph, seed: int, params: dict) -> Layout:
    D = distance_matrix(g)
    W = np.zeros_like(D)
    off = ~np.eye(g.n, dtype=bool)
    W[off] = 1.0 / D[off] ** 2
    X = _random_init(g, seed, "neato") * g.n**0.5
    if g.n == 1:
        return Layout(g.id, "neato", X)
    V = np.diag(W.sum(1)) - W
    Vp = np.linalg.pinv(V)
    max_iter, tol = params["max_iter"], params["tol"]
    history = [_stress(X, D, W)]
    converged = False
    for _ in range(max_iter):
        diff = X[:, None, :] - X[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, D / np.where(dist > 0, dist, 1.0), 0.0)
        B = -W * ratio
        np.fill_diagonal(B, 0.0)
        np.fill_diagonal(B, -B.sum(1))
        X = Vp @ (B @ X)
        s = _stress(X, D, W)
        history.append(s)
        if history[-2] - s <= tol * max(history[-2], 1e-30):
            converged = True
            break
    return Layout(g.id, "neato", X, converged=converged, stats={"stress_history": history})


def _kk_energy_grad(X, D, K, m):
    """Gradient and Hessian of the Kamada-Kawai energy wrt node m."""
    diff = X[m] - X
    dist = np.sqrt((diff**2).sum(-1))
    mask = np.arange(len(X)) != m
    d, k = D[m][mask], K[m][mask]
    dx, dy = diff[mask, 0], diff[mask, 1]
    r = dist[mask]
    r = np.maximum(r, 1e-12)
    gx = (k * (dx - d * dx / r)).sum()
    gy = (k * (dy - d * dy / r)).sum()
    hxx = (k * (1 - d * dy**2 / r**3)).sum()
    hyy = (k * (1 - d * dx**2 / r**3)).sum()
    hxy = (k * d * dx * dy / r**3).sum()
    return np.array([gx, gy]), np.array([[hxx, hxy], [hxy, hyy]])


def _kamada_kawai(g: Graph, seed: int, params: dict) -> Layout:
    D = distance_matrix(g)
    K = np.zeros_like(D)
    off = ~np.eye(g.n, dtype=bool)
    K[off] = 1.0 / D[off] ** 2
    # circle initialization, radius half the graph diameter
    theta = 2 * np.pi * np.arange(g.n) / g.n
    radius = D.max() / 2.0 if g.n > 1 else 1.0
    X = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    max_iter, tol = params["max_iter"], params["tol"]
    converged = False
    grad_norm = 0.0
    for _ in range(max_iter):
        norms = np.empty(g.n)
        for i in range(g.n):
            gvec, _ = _kk_energy_grad(X, D, K, i)
            norms[i] = np.hypot(*gvec)
        m = int(np.argmax(norms))
        grad_norm = norms[m]
        if grad_norm < tol:
            converged = True
            break
        for _ in range(50):
            gvec, H = _kk_energy_grad(X, D, K, m)
            if np.hypot(*gvec) < tol:
                break
            try:
                step = np.linalg.solve(H, gvec)
            except np.linalg.LinAlgError:
                step = gvec
            X[m] -= step
    return Layout(g.id, "kamada_kawai", X, converged=converged, stats={"final_grad_norm": float(grad_norm)})


def _force_loop(g, X, repulse, attract, iters, t0, rng_tag, seed, record):
    """Shared displacement loop: per-node moves capped by a cooling cap that is
    forced non-increasing after the first 10% of iterations."""
    n = len(X)
    burn_in = max(1, iters // 10)
    cap = t0
    max_disp_history = []
    for it in range(iters):
        t = t0 * (1.0 - it / iters)
        disp = repulse(X) + attract(X)
        mag = np.sqrt((disp**2).sum(1))
        allowed = min(t, cap) if it >= burn_in else t
        scale = np.where(mag > allowed, allowed / np.maximum(mag, 1e-30), 1.0)
        step = disp * scale[:, None]
        X = X + step
        actual = float(np.sqrt((step**2).sum(1)).max()) if n else 0.0
        if it >= burn_in:
            cap = min(cap, actual) if actual > 0 else cap
        max_disp_history.append(actual)
    record["max_disp_history"] = max_disp_history
    return X


def _fr_layout(g: Graph, seed: int, params: dict, algorithm: str, X0=None) -> Layout:
    n = g.n
    k = params.get("k") or (1.0 / n) ** 0.5
    iters = params["max_iter"]
    t0 = params.get("t0", 0.1)
    X = X0 if X0 is not None else _random_init(g, seed, algorithm)
    edges = np.array(g.edges, dtype=int).reshape(-1, 2)
    cutoff = params.get("cutoff")  # fdp: grid-bucketed repulsion radius

    def repulse(X):
        if cutoff is None:
            diff = X[:, None, :] - X[None, :, :]
            dist = np.sqrt((diff**2).sum(-1))
            np.fill_diagonal(dist, np.inf)
            dist = np.maximum(dist, 1e-9)
            f = k**2 / dist  # magnitude k^2/d
            return (f[:, :, None] * diff / dist[:, :, None]).sum(1)
        return _grid_repulsion(X, k, cutoff)

    def attract(X):
        out = np.zeros_like(X)
        if len(edges) == 0:
            return out
        d = X[edges[:, 0]] - X[edges[:, 1]]
        dist = np.maximum(np.sqrt((d**2).sum(1)), 1e-9)
        f = (dist**2 / k)[:, None] * d / dist[:, None]
        np.add.at(out, edges[:, 0], -f)
        np.add.at(out, edges[:, 1], f)
        return out

    stats = {}
    X = _force_loop(g, X, repulse, attract, iters, t0, algorithm, seed, stats)
    return Layout(g.id, algorithm, X, stats=stats)


def _grid_repulsion(X, k, cutoff_factor):
    """Repulsion restricted to node pairs within cutoff_factor*k, found via
    spatial hashing into grid cells of that size."""
    n = len(X)
    radius = cutoff_factor * k
    cells = {}
    keys = np.floor(X / radius).astype(int)
    for i in range(n):
        cells.setdefault((keys[i, 0], keys[i, 1]), []).append(i)
    out = np.zeros_like(X)
    for (cx, cy), members in cells.items():
        cand = []
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                cand.extend(cells.get((cx + ox, cy + oy), ()))
        cand = np.array(cand, dtype=int)
        for i in members:
            diff = X[i] - X[cand]
            dist = np.sqrt((diff**2).sum(1))
            mask = (dist > 0) & (dist < radius)
            if mask.any():
                d = np.maximum(dist[mask], 1e-9)
                out[i] += ((k**2 / d)[:, None] * diff[mask] / d[:, None]).sum(0)
    return out


def _fa2(g: Graph, seed: int, params: dict) -> Layout:
    n = g.n
    iters = params["max_iter"]
    t0 = params.get("t0", 0.1)
    kr = params.get("kr", 0.01)
    deg = np.array([g.degree(i) + 1 for i in range(n)], dtype=float)
    edges = np.array(g.edges, dtype=int).reshape(-1, 2)
    X = _random_init(g, seed, "fa2")

    def repulse(X):
        diff = X[:, None, :] - X[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        dist = np.maximum(dist, 1e-9)
        f = kr * deg[:, None] * deg[None, :] / dist
        return (f[:, :, None] * diff / dist[:, :, None]).sum(1)

    def attract(X):
        out = np.zeros_like(X)
        if len(edges) == 0:
            return out
        d = X[edges[:, 0]] - X[edges[:, 1]]
        # linear attraction: force magnitude equals the distance
        np.add.at(out, edges[:, 0], -d)
        np.add.at(out, edges[:, 1], d)
        return out

    stats = {}
    X = _force_loop(g, X, repulse, attract, iters, t0, "fa2", seed, stats)
    return Layout(g.id, "fa2", X, stats=stats)


def _maximal_matching_coarsen(g: Graph, rng) -> tuple:
    """Greedy maximal matching over seeded-shuffled edges; returns the coarse
    graph and the fine->coarse node map."""
    order = rng.permutation(len(g.edges))
    matched = [False] * g.n
    coarse_of = [-1] * g.n
    nxt = 0
    for ei in order:
        u, v = g.edges[ei]
        if not matched[u] and not matched[v]:
            matched[u] = matched[v] = True
            coarse_of[u] = coarse_of[v] = nxt
            nxt += 1
    for i in range(g.n):
        if coarse_of[i] < 0:
            coarse_of[i] = nxt
            nxt += 1
    coarse_edges = set()
    for u, v in g.edges:
        a, b = coarse_of[u], coarse_of[v]
        if a != b:
            coarse_edges.add((min(a, b), max(a, b)))
    coarse = Graph(id=g.id + "~", n=nxt, edges=tuple(sorted(coarse_edges)))
    return coarse, coarse_of


def _sfdp(g: Graph, seed: int, params: dict) -> Layout:
    threshold = params.get("coarsen_threshold", 20)
    level_sizes = [g.n]
    graphs = [g]
    maps = []
    level = 0
    cur = g
    while cur.n > threshold and cur.m > 0:
        coarse, coarse_of = _maximal_matching_coarsen(cur, child_rng(seed, "sfdp-match", level))
        if coarse.n >= cur.n:
            break
        graphs.append(coarse)
        maps.append(coarse_of)
        level_sizes.append(coarse.n)
        cur = coarse
        level += 1
    # layout coarsest level from scratch, then interpolate and refine upward
    fr_params = {"max_iter": params["max_iter"], "t0": params.get("t0", 0.1), "k": None}
    lay = _fr_layout(graphs[-1], seed, dict(fr_params), "sfdp")
    X = lay.coords
    for lvl in range(len(maps) - 1, -1, -1):
        fine = graphs[lvl]
        jitter = 0.01 * child_rng(seed, "sfdp-jitter", lvl).standard_normal((fine.n, 2))
        X = X[np.array(maps[lvl])] + jitter
        refine = dict(fr_params)
        refine["max_iter"] = max(50, params["max_iter"] // 4)
        refine["t0"] = 0.03
        X = _fr_layout(fine, seed, refine, "sfdp", X0=X).coords
    return Layout(g.id, "sfdp", X, stats={"level_sizes": level_sizes})


def _double_center(D2: np.ndarray) -> np.ndarray:
    row = D2.mean(1, keepdims=True)
    col = D2.mean(0, keepdims=True)
    return -0.5 * (D2 - row - col + D2.mean())


def classical_mds(D: np.ndarray) -> np.ndarray:
    """Top-2 classical MDS coordinates of a full distance matrix."""
    B = _double_center(D**2)
    evals, evecs = np.linalg.eigh(B)
    idx = np.argsort(evals)[::-1][:2]
    lam = np.maximum(evals[idx], 0.0)
    return evecs[:, idx] * np.sqrt(lam)


def _pmds(g: Graph, seed: int, params: dict) -> Layout:
    n = g.n
    n_pivots = min(params.get("pivots", 50), n)
    # farthest-first pivot selection from a seeded start
    rng = child_rng(seed, "layout", "pmds", "pivots")
    pivots = [int(rng.integers(n))]
    dists = np.array(g.bfs_distances(pivots[0]), dtype=float)
    if dists.min() < 0:
        raise LayoutError(f"{g.id}: graph is disconnected")
    mind = dists.copy()
    pivot_dists = [dists]
    while len(pivots) < n_pivots:
        nxt = int(np.argmax(mind))
        pivots.append(nxt)
        d = np.array(g.bfs_distances(nxt), dtype=float)
        pivot_dists.append(d)
        mind = np.minimum(mind, d)
    Dpiv = np.column_stack(pivot_dists)  # (n, k)
    C = _double_center(Dpiv**2)
    M = C.T @ C  # (k, k)
    evals, evecs = np.linalg.eigh(M)
    idx = np.argsort(evals)[::-1][:2]
    sigma = np.sqrt(np.maximum(evals[idx], 1e-30))  # singular values of C
    X = (C @ evecs[:, idx]) / np.sqrt(sigma)
    return Layout(g.id, "pmds", X, stats={"pivots": pivots})


def _spectral(g: Graph, seed: int, params: dict) -> Layout:
    from gdpref.embeddings import spectral_embedding

    if g.n < 2:
        raise LayoutError(f"{g.id}: spectral layout needs at least 2 nodes")
    k = min(2, g.n - 1)
    emb = spectral_embedding(g, k)
    X = emb.vectors
    if k == 1:
        X = np.column_stack([X[:, 0], np.zeros(g.n)])
    return Layout(g.id, "spectral", X)


_DEFAULTS = {
    "neato": {"max_iter": 500, "tol": 1e-7},
    "kamada_kawai": {"max_iter": 500, "tol": 1e-7},
    "spring": {"max_iter": 1000, "t0": 0.1, "k": None},
    "fdp": {"max_iter": 1000, "t0": 0.1, "k": None, "cutoff": 2.0},
    "fa2": {"max_iter": 1000, "t0": 0.1, "kr": 0.01},
    "sfdp": {"max_iter": 1000, "t0": 0.1, "coarsen_threshold": 20},
    "pmds": {"pivots": 50},
    "spectral": {},
}


def layout(g: Graph, algorithm: str, seed: int = 0, params: dict = None) -> Layout:
    """Compute one layout; pure and deterministic given (g, algorithm, params, seed)."""
    if algorithm not in ALGORITHMS:
        raise LayoutError(f"unknown algorithm {algorithm!r}")
    if algorithm in DISTANCE_BASED and not g.is_connected():
        raise LayoutError(f"{g.id}: {algorithm} requires a connected graph")
    p = dict(_DEFAULTS[algorithm])
    if params:
        p.update(params)
    fn = {
        "neato": _neato,
        "kamada_kawai": _kamada_kawai,
        "spring": lambda g, s, p: _fr_layout(g, s, p, "spring"),
        "fdp": lambda g, s, p: _fr_layout(g, s, p, "fdp"),
        "fa2": _fa2,
        "sfdp": _sfdp,
        "pmds": _pmds,
        "spectral": _spectral,
    }[algorithm]
    return fn(g, seed, p)


def layout_all(g: Graph, seed: int = 0) -> LayoutSet:
    """All eight layouts plus a seeded-uniform display permutation.

    Layouts are assembled in fixed algorithm order regardless of how they are
    computed, so output is order-deterministic.
    """
    if not g.is_connected():
        raise LayoutError(f"{g.id}: layout_all requires a connected graph")
    layouts = {alg: layout(g, alg, seed=seed) for alg in ALGORITHMS}
    order = tuple(int(x) for x in child_rng(seed, "display", g.id).permutation(8))
    return LayoutSet(graph_id=g.id, layouts=layouts, display_order=order)


def normalize(l: Layout) -> Layout:
    """Translate/uniformly scale into [0,1]^2; longer axis spans exactly [0,1],
    shorter axis centered.  Relative geometry (distance ratios) preserved."""
    X = l.coords
    lo, hi = X.min(0), X.max(0)
    span = hi - lo
    extent = span.max()
    if extent <= 0:
        raise LayoutError(f"{l.graph_id}/{l.algorithm}: all points coincident, cannot normalize")
    long_axis = int(np.argmax(span))
    short_axis = 1 - long_axis
    # fixed point: already normalized inputs pass through bit-identically
    if (
        lo[long_axis] == 0.0
        and hi[long_axis] == 1.0
        and lo[short_axis] >= 0.0
        and hi[short_axis] <= 1.0
        and abs((lo[short_axis] + hi[short_axis]) / 2.0 - 0.5) < 1e-12
    ):
        return Layout(l.graph_id, l.algorithm, X.copy(), converged=l.converged, stats=l.stats)
    Y = (X - lo) / extent + (1.0 - span / extent) / 2.0
    return Layout(l.graph_id, l.algorithm, Y, converged=l.converged, stats=l.stats)


def write_layout_file(l: Layout, path) -> None:
    """Header ``graph_id algorithm n``, then n lines ``x y`` (17 significant digits)."""
    lines = [f"{l.graph_id} {l.algorithm} {len(l.coords)}"]
    for x, y in l.coords:
        lines.append(f"{x:.17g} {y:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_layout_file(path) -> Layout:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    gid, alg, n = lines[0].split()
    coords = np.array([[float(t) for t in line.split()] for line in lines[1 : int(n) + 1]])
    return Layout(gid, alg, coords)
