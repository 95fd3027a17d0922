"""Agreement mathematics.

Pairwise alignment is the fraction of commonly labeled graphs on which two
labelers choose the same layout; micro pools matches over pairs, macro
averages pairwise values.  Procrustes similarity S compares two point
configurations after centering, unit-Frobenius scaling, and optimal
orthogonal alignment: S = sum of singular values of X~'Y~, so S is in
[0, 1] with S = 1 exactly for similar shapes.  Similarity-aware alignment
counts a pair-match when S(chosen_i, chosen_j) >= alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gdpref.labels import LabelStore
from gdpref.layouts import Layout


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class PairAlignment:
    matches: int
    overlap: int

    @property
    def alignment(self) -> float | None:
        return self.matches / self.overlap if self.overlap > 0 else None


def pairwise_alignment(store: LabelStore, i: str, j: str) -> PairAlignment:
    ci, cj = store.choices_of(i), store.choices_of(j)
    shared = set(ci) & set(cj)
    matches = sum(1 for gid in shared if ci[gid] == cj[gid])
    return PairAlignment(matches=matches, overlap=len(shared))


def _pairs(annotators):
    annotators = sorted(annotators)
    for a in range(len(annotators)):
        for b in range(a + 1, len(annotators)):
            yield annotators[a], annotators[b]


def micro_alignment(store: LabelStore, annotators=None, counts: bool = False):
    """Pooled matches over pooled overlaps; each unordered pair counted once
    (the symmetric double sum gives the identical ratio)."""
    subset = annotators if annotators is not None else store.annotators
    total_matches = total_overlap = 0
    for i, j in _pairs(subset):
        pa = pairwise_alignment(store, i, j)
        total_matches += pa.matches
        total_overlap += pa.overlap
    if total_overlap == 0:
        raise AlignmentError("no labeler pair with overlapping graphs")
    if counts:
        return total_matches, total_overlap
    return total_matches / total_overlap


def macro_alignment(store: LabelStore, annotators=None) -> float:
    subset = annotators if annotators is not None else store.annotators
    values = []
    for i, j in _pairs(subset):
        pa = pairwise_alignment(store, i, j)
        if pa.overlap > 0:
            values.append(pa.alignment)
    if not values:
        raise AlignmentError("no labeler pair with overlapping graphs")
    return float(np.mean(values))


@dataclass
class AlignmentReport:
    annotators: list
    pairwise: dict  # (i, j) -> PairAlignment, i < j
    micro: float
    macro: float


def alignment_report(store: LabelStore, annotators=None) -> AlignmentReport:
    subset = sorted(annotators if annotators is not None else store.annotators)
    pairwise = {(i, j): pairwise_alignment(store, i, j) for i, j in _pairs(subset)}
    return AlignmentReport(
        annotators=subset,
        pairwise=pairwise,
        micro=micro_alignment(store, subset),
        macro=macro_alignment(store, subset),
    )


# -- Procrustes ------------------------------------------------------------


def _configuration(X) -> np.ndarray:
    coords = X.coords if isinstance(X, Layout) else np.asarray(X, dtype=float)
    if coords.ndim != 2 or coords.shape[0] < 2:
        raise AlignmentError("configuration must have at least 2 points")
    centered = coords - coords.mean(0)
    norm = np.linalg.norm(centered)
    if norm == 0:
        raise AlignmentError("degenerate configuration (all points equal)")
    return centered / norm


def procrustes_similarity(X, Y, allow_reflection: bool = True) -> float:
    """S(X, Y) = sum of singular values of X~'Y~ on centered, unit-norm
    configurations; restricted to rotations when reflection is disallowed."""
    A = _configuration(X)
    B = _configuration(Y)
    if A.shape != B.shape:
        raise AlignmentError(f"node-count mismatch: {A.shape[0]} vs {B.shape[0]}")
    M = A.T @ B
    U, s, Vt = np.linalg.svd(M)
    if allow_reflection or np.linalg.det(U @ Vt) >= 0:
        value = s.sum()
    else:
        value = s[:-1].sum() - s[-1]
    return float(min(max(value, 0.0), 1.0))


def procrustes_distance(X, Y, allow_reflection: bool = True) -> float:
    return 1.0 - procrustes_similarity(X, Y, allow_reflection)


# -- similarity-aware alignment ---------------------------------------------


def _chosen_coords(layout_sets, graph_id: str, algorithm: str):
    try:
        return layout_sets[graph_id].layouts[algorithm]
    except KeyError:
        raise AlignmentError(f"missing layout for graph {graph_id!r} / {algorithm!r}") from None


def alignment_alpha(
    store: LabelStore,
    layout_sets: dict,
    i: str,
    j: str,
    alpha: float,
    allow_reflection: bool = True,
    counts: bool = False,
):
    """Pairwise alignment where choices agree when the chosen layouts'
    Procrustes similarity reaches alpha.  Identical choices always agree."""
    if not 0.0 <= alpha <= 1.0:
        raise AlignmentError("alpha must lie in [0, 1]")
    ci, cj = store.choices_of(i), store.choices_of(j)
    shared = set(ci) & set(cj)
    matches = 0
    for gid in shared:
        if ci[gid] == cj[gid]:
            matches += 1
        else:
            s = procrustes_similarity(
                _chosen_coords(layout_sets, gid, ci[gid]),
                _chosen_coords(layout_sets, gid, cj[gid]),
                allow_reflection,
            )
            if s >= alpha:
                matches += 1
    if counts:
        return matches, len(shared)
    if not shared:
        raise AlignmentError(f"labelers {i!r} and {j!r} share no graphs")
    return matches / len(shared)


def alignment_alpha_micro(
    store: LabelStore,
    layout_sets: dict,
    alpha: float,
    annotators=None,
    allow_reflection: bool = True,
) -> float:
    subset = annotators if annotators is not None else store.annotators
    total_matches = total_overlap = 0
    for i, j in _pairs(subset):
        m, o = alignment_alpha(store, layout_sets, i, j, alpha, allow_reflection, counts=True)
        total_matches += m
        total_overlap += o
    if total_overlap == 0:
        raise AlignmentError("no labeler pair with overlapping graphs")
    return total_matches / total_overlap


# -- confidence filtering ----------------------------------------------------


@dataclass
class ConfidenceCurve:
    points: list  # {threshold, retained_fraction, alignment (None when undefined)}


def confidence_curve(predictions, store: LabelStore, thresholds) -> ConfidenceCurve:
    """Alignment of an AI labeler with all human labelers, restricted to
    predictions at or above each confidence threshold."""
    thresholds = list(thresholds)
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise AlignmentError("thresholds must be strictly ascending")
    preds = [p for p in predictions if p.get("confidence") is not None]
    humans = store.annotators
    points = []
    for t in thresholds:
        retained = [p for p in preds if p["confidence"] >= t]
        retained_fraction = len(retained) / len(predictions) if predictions else 0.0
        choice_by_graph = {p["graph_id"]: p["choice"] for p in retained}
        matches = overlap = 0
        for j in humans:
            cj = store.choices_of(j)
            for gid, choice in choice_by_graph.items():
                if gid in cj:
                    overlap += 1
                    if cj[gid] == choice:
                        matches += 1
        alignment = matches / overlap if overlap > 0 else None
        points.append({"threshold": t, "retained_fraction": retained_fraction, "alignment": alignment})
    return ConfidenceCurve(points=points)


# -- paired t-test -----------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for the incomplete beta function (modified Lentz)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 200):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: int) -> float:
    """Two-sided p-value for a Student-t statistic."""
    x = df / (df + t * t)
    return _betainc(df / 2.0, 0.5, x)


def paired_t_test(scores_a, scores_b) -> dict:
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise AlignmentError("paired t-test needs two equal-length vectors of length >= 2")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0:
        if d.mean() == 0:
            return {"t": 0.0, "p": 1.0, "df": len(d) - 1}
        raise AlignmentError("zero-variance nonzero differences")
    n = len(d)
    t = float(d.mean() / (sd / math.sqrt(n)))
    return {"t": t, "p": student_t_sf2(t, n - 1), "df": n - 1}
