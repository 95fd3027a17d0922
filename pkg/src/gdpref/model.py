"""Preference classifier over eight candidate layouts.

Each sample concatenates eight per-layout feature vectors (built-in raster
pyramid features or externally supplied embeddings) and passes them through
an MLP head 8*d -> 4096 -> 1024 -> 8 with a softmax output.  Training uses
cross-entropy against soft targets (the empirical annotator distribution),
with permutation augmentation of the candidate order.  Gradients are
computed by hand-written reverse-mode accumulation; the optimizer is Adam.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from gdpref.layouts import ALGORITHMS
from gdpref.raster import RasterImage
from gdpref.rng import child_rng

CHECKPOINT_VERSION = 1


class ModelError(ValueError):
    pass


# -- features ----------------------------------------------------------------


def raster_features(img: RasterImage, pyramid_levels: int = 3) -> np.ndarray:
    """Mean-intensity grids at 2^j x 2^j for j = 1..levels (row-major,
    top-left origin), plus global lit-pixel density; dim = sum(4^j) + 1."""
    if pyramid_levels < 1:
        raise ModelError("pyramid_levels must be >= 1")
    size = img.size
    parts = []
    for j in range(1, pyramid_levels + 1):
        cells = 2**j
        idx = np.minimum((np.arange(size) * cells) // size, cells - 1)
        sums = np.zeros((cells, cells))
        np.add.at(sums, (idx[:, None], idx[None, :]), img.pixels)
        per_axis = np.bincount(idx, minlength=cells).astype(float)
        parts.append((sums / np.outer(per_axis, per_axis)).ravel())
    density = float((img.pixels > 0).mean())
    return np.concatenate(parts + [np.array([density])])


def load_external_features(path) -> dict:
    """Embedding interchange file with 8 rows per graph, canonical algorithm
    order: repeated blocks of header ``graph_id method n dim`` + n rows."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    out = {}
    i = 0
    dim_seen = None
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = lines[i].split()
        if len(head) != 4:
            raise ModelError(f"{path}: bad header at line {i + 1}: {lines[i]!r}")
        gid, _method, n, dim = head[0], head[1], int(head[2]), int(head[3])
        if n != 8:
            raise ModelError(f"{path}: graph {gid!r} has {n} rows, expected 8")
        if dim_seen is None:
            dim_seen = dim
        elif dim != dim_seen:
            raise ModelError(f"{path}: ragged dims ({dim} vs {dim_seen}) for graph {gid!r}")
        rows = lines[i + 1 : i + 1 + n]
        if len(rows) != n or any(len(r.split()) != dim for r in rows):
            raise ModelError(f"{path}: graph {gid!r}: expected {n} rows of {dim} values")
        out[gid] = np.array([[float(x) for x in r.split()] for r in rows])
        i += 1 + n
    if not out:
        raise ModelError(f"{path}: no feature blocks found")
    return out


# -- samples -----------------------------------------------------------------


@dataclass
class CandidateSample:
    """Eight per-layout feature vectors in display order, with the soft
    target permuted identically."""

    graph_id: str
    features: np.ndarray  # (8, d)
    target: np.ndarray  # (8,), sums to 1
    permutation: tuple = tuple(range(8))  # applied on top of canonical order

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.target = np.asarray(self.target, dtype=float)
        if self.features.shape[0] != 8:
            raise ModelError("sample must have exactly 8 candidate feature vectors")
        if self.target.shape != (8,) or abs(self.target.sum() - 1.0) > 1e-9:
            raise ModelError("target must be an 8-vector on the simplex")


def augment(sample: CandidateSample, k: int, rng: np.random.Generator) -> list:
    """k copies of the sample under fresh uniform permutations of the eight
    candidates, target permuted identically."""
    if k < 1:
        raise ModelError("k must be >= 1")
    out = []
    for _ in range(k):
        pi = rng.permutation(8)
        combined = tuple(sample.permutation[p] for p in pi)
        out.append(
            CandidateSample(
                graph_id=sample.graph_id,
                features=sample.features[pi],
                target=sample.target[pi],
                permutation=combined,
            )
        )
    return out


# -- MLP ---------------------------------------------------------------------


@dataclass
class ModelParams:
    feature_dim: int
    weights: list  # [W1, W2, W3]
    biases: list  # [b1, b2, b3]
    seed: int
    activation: str = "relu"
    hidden: tuple = (4096, 1024)

    @property
    def layer_dims(self) -> tuple:
        return (8 * self.feature_dim, *self.hidden, 8)


def init_params(feature_dim: int, seed: int = 0, hidden: tuple = (4096, 1024)) -> ModelParams:
    dims = (8 * feature_dim, *hidden, 8)
    rng = child_rng(seed, "mlp-init")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
        biases.append(np.zeros(fan_out))
    return ModelParams(feature_dim=feature_dim, weights=weights, biases=biases, seed=seed, hidden=tuple(hidden))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(params: ModelParams, x: np.ndarray):
    """x: (b, 8*d).  Returns (probs, activations for backprop)."""
    acts = [x]
    h = x
    n_layers = len(params.weights)
    for li, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W + b
        if li < n_layers - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return _softmax(acts[-1]), acts


@dataclass
class Prediction:
    graph_id: str
    probs: np.ndarray  # (8,), display order
    choice: str  # canonical algorithm
    confidence: float


def forward(params: ModelParams, sample: CandidateSample) -> Prediction:
    if sample.features.shape[1] != params.feature_dim:
        raise ModelError(
            f"feature dim {sample.features.shape[1]} does not match model dim {params.feature_dim}"
        )
    probs, _ = _forward_batch(params, sample.features.reshape(1, -1))
    probs = probs[0]
    pos = int(np.argmax(probs))  # ties break at the lowest index
    canonical = sample.permutation[pos]
    return Prediction(
        graph_id=sample.graph_id,
        probs=probs,
        choice=ALGORITHMS[canonical],
        confidence=float(probs[pos]),
    )


def predict(params: ModelParams, features: np.ndarray, display_order, graph_id: str = "g") -> Prediction:
    """Candidates given in display order; the choice is reported in canonical
    algorithm space through the inverse display permutation."""
    features = np.asarray(features, dtype=float)
    if features.shape[0] != 8:
        raise ModelError(f"expected 8 candidates, got {features.shape[0]}")
    sample = CandidateSample(
        graph_id=graph_id,
        features=features,
        target=np.full(8, 0.125),
        permutation=tuple(display_order),
    )
    return forward(params, sample)


def soft_ce_loss(probs: np.ndarray, q: np.ndarray) -> float:
    """Cross-entropy with soft targets: -sum_k q_k log p_k (p floored at 1e-12)."""
    p = np.maximum(np.asarray(probs, dtype=float), 1e-12)
    return float(-(np.asarray(q, dtype=float) * np.log(p)).sum())


def _loss_and_grads(params: ModelParams, X: np.ndarray, Q: np.ndarray):
    """Mean soft cross-entropy over a batch, with gradients."""
    b = len(X)
    probs, acts = _forward_batch(params, X)
    loss = float(-(Q * np.log(np.maximum(probs, 1e-12))).sum() / b)
    delta = (probs - Q) / b  # softmax + CE
    gw, gb = [], []
    n_layers = len(params.weights)
    for li in range(n_layers - 1, -1, -1):
        a_in = acts[li]
        gw.insert(0, a_in.T @ delta)
        gb.insert(0, delta.sum(0))
        if li > 0:
            delta = delta @ params.weights[li].T
            delta = delta * (acts[li] > 0)
    return loss, gw, gb


def gradient_check(params: ModelParams, sample: CandidateSample, epsilon: float = 1e-5) -> float:
    """Central finite differences vs analytic gradients; max relative error."""
    X = sample.features.reshape(1, -1)
    Q = sample.target.reshape(1, -1)
    _, gw, gb = _loss_and_grads(params, X, Q)
    worst = 0.0
    for arrs, grads in ((params.weights, gw), (params.biases, gb)):
        for arr, grad in zip(arrs, grads):
            flat = arr.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + epsilon
                lp = _loss_and_grads(params, X, Q)[0]
                flat[idx] = orig - epsilon
                lm = _loss_and_grads(params, X, Q)[0]
                flat[idx] = orig
                g_fd = (lp - lm) / (2 * epsilon)
                g = grad.ravel()[idx]
                rel = abs(g_fd - g) / max(1e-8, abs(g_fd) + abs(g))
                worst = max(worst, rel)
    return worst


@dataclass
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 50
    batch: int = 16
    seed: int = 0
    augment_k: int = 1
    unanimous_only: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: tuple = (4096, 1024)

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["hidden"] = list(self.hidden)
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        d = json.loads(text)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


def build_dataset(samples, config: TrainConfig) -> list:
    """Apply the unanimous-only filter and permutation augmentation."""
    if config.unanimous_only:
        samples = [s for s in samples if np.isclose(s.target.max(), 1.0)]
    if not samples:
        raise ModelError("empty training set after filtering")
    if config.augment_k > 1:
        rng = child_rng(config.seed, "augment")
        out = []
        for s in samples:
            out.extend(augment(s, config.augment_k, rng))
        return out
    return list(samples)


def train(samples, config: TrainConfig) -> tuple:
    """Train the MLP head; returns (ModelParams, per-epoch mean losses).

    Bitwise seed-deterministic: fixed shuffling streams, fixed batch order,
    single-threaded numpy reductions.
    """
    data = build_dataset(samples, config)
    dims = {s.features.shape[1] for s in data}
    if len(dims) != 1:
        raise ModelError(f"non-uniform feature dims: {sorted(dims)}")
    d = dims.pop()
    X = np.stack([s.features.reshape(-1) for s in data])
    Q = np.stack([s.target for s in data])
    params = init_params(d, seed=config.seed, hidden=config.hidden)

    m = [np.zeros_like(w) for w in params.weights] + [np.zeros_like(b) for b in params.biases]
    v = [np.zeros_like(w) for w in params.weights] + [np.zeros_like(b) for b in params.biases]
    step = 0
    losses = []
    for epoch in range(config.epochs):
        order = child_rng(config.seed, "train-shuffle", epoch).permutation(len(data))
        epoch_loss = 0.0
        n_batches = 0
        for s0 in range(0, len(data), config.batch):
            idx = order[s0 : s0 + config.batch]
            loss, gw, gb = _loss_and_grads(params, X[idx], Q[idx])
            if not np.isfinite(loss):
                raise ModelError(f"NaN/inf loss at epoch {epoch}, batch {n_batches}")
            epoch_loss += loss
            n_batches += 1
            step += 1
            grads = gw + gb
            tensors = params.weights + params.biases
            for t_i, (tensor, grad) in enumerate(zip(tensors, grads)):
                m[t_i] = config.beta1 * m[t_i] + (1 - config.beta1) * grad
                v[t_i] = config.beta2 * v[t_i] + (1 - config.beta2) * grad**2
                mhat = m[t_i] / (1 - config.beta1**step)
                vhat = v[t_i] / (1 - config.beta2**step)
                tensor -= config.lr * mhat / (np.sqrt(vhat) + config.eps)
        losses.append(epoch_loss / n_batches)
    return params, losses


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(params: ModelParams, path) -> None:
    arrays = {}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    meta = json.dumps(
        {
            "version": CHECKPOINT_VERSION,
            "feature_dim": params.feature_dim,
            "seed": params.seed,
            "activation": params.activation,
            "hidden": list(params.hidden),
            "n_layers": len(params.weights),
        }
    )
    np.savez(path, meta=np.frombuffer(meta.encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> ModelParams:
    data = np.load(path)
    meta = json.loads(bytes(data["meta"]).decode("utf-8"))
    if meta["version"] != CHECKPOINT_VERSION:
        raise ModelError(f"unsupported checkpoint version {meta['version']}")
    n = meta["n_layers"]
    return ModelParams(
        feature_dim=meta["feature_dim"],
        weights=[data[f"w{i}"] for i in range(n)],
        biases=[data[f"b{i}"] for i in range(n)],
        seed=meta["seed"],
        activation=meta["activation"],
        hidden=tuple(meta["hidden"]),
    )
