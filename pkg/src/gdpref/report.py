"""Alignment report rendering.

One report directory holds a deterministic plain-text summary, a
tab-separated pairwise matrix, a portable-graymap heatmap of that matrix,
and matplotlib figures (heatmap + confidence curves) for human readers.
The text and delimited outputs are byte-stable across runs; the figures are
presentation artifacts and are not golden-tested.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from gdpref.alignment import AlignmentReport
from gdpref.layouts import ALGORITHMS
from gdpref.raster import RasterImage, write_pgm


def _fmt(x, nd: int = 4) -> str:
    return f"{x:.{nd}f}" if x is not None else "n/a"


def pairwise_matrix(report: AlignmentReport) -> np.ndarray:
    """Symmetric matrix of pairwise alignments (diagonal 1, no-overlap nan)."""
    ann = report.annotators
    M = np.full((len(ann), len(ann)), np.nan)
    np.fill_diagonal(M, 1.0)
    for (i, j), pa in report.pairwise.items():
        a, b = ann.index(i), ann.index(j)
        if pa.overlap > 0:
            M[a, b] = M[b, a] = pa.alignment
    return M


def render_report_text(
    report: AlignmentReport,
    store,
    alpha_sweep=None,  # list of (alpha, value)
    curves=None,  # {labeler_name: ConfidenceCurve}
    t_tests=None,  # {description: {t, p, df}}
    extra_lines=None,
) -> str:
    lines = ["alignment report", "================", ""]
    lines.append(f"labels: {len(store)}")
    lines.append(f"graphs: {len(store.graphs)}")
    lines.append(f"annotators: {', '.join(report.annotators)}")
    lines.append("")

    lines.append("pairwise alignment (matches/overlap)")
    for (i, j), pa in sorted(report.pairwise.items()):
        lines.append(f"  {i} vs {j}: {pa.matches}/{pa.overlap} = {_fmt(pa.alignment)}")
    lines.append(f"micro alignment: {_fmt(report.micro)}")
    lines.append(f"macro alignment: {_fmt(report.macro)}")
    lines.append("")

    lines.append("choice distribution")
    for alg, (count, pct) in store.choice_distribution().items():
        lines.append(f"  {alg}: {count} ({pct:.2f}%)")
    lines.append("")

    lines.append("consensus distribution (distinct choices per graph)")
    for k, pct in store.consensus_distribution().items():
        lines.append(f"  {k}: {pct:.2f}%")
    lines.append("")

    if alpha_sweep:
        lines.append("similarity-aware alignment sweep")
        for alpha, value in alpha_sweep:
            lines.append(f"  alpha={alpha:.2f}: {_fmt(value)}")
        lines.append("")

    if curves:
        for name, curve in sorted(curves.items()):
            lines.append(f"confidence curve ({name})")
            for pt in curve.points:
                lines.append(
                    f"  threshold={pt['threshold']:.2f}"
                    f" retained={pt['retained_fraction']:.4f}"
                    f" alignment={_fmt(pt['alignment'])}"
                )
            lines.append("")

    if t_tests:
        for desc, res in sorted(t_tests.items()):
            lines.append(f"paired t-test ({desc}): t={res['t']:.4f} p={res['p']:.4f} df={res['df']}")
        lines.append("")

    if extra_lines:
        lines.extend(extra_lines)
        lines.append("")

    return "\n".join(lines).rstrip("\n") + "\n"


def write_pairwise_tsv(report: AlignmentReport, path) -> None:
    ann = report.annotators
    M = pairwise_matrix(report)
    rows = ["\t".join(["labeler"] + ann)]
    for a, name in enumerate(ann):
        cells = ["nan" if np.isnan(M[a, b]) else f"{M[a, b]:.6f}" for b in range(len(ann))]
        rows.append("\t".join([name] + cells))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_heatmap_pgm(report: AlignmentReport, path, cell: int = 32) -> None:
    """Pairwise matrix as a portable graymap, one cell block per pair."""
    M = pairwise_matrix(report)
    M = np.nan_to_num(M, nan=0.0)
    img = np.kron(M, np.ones((cell, cell)))
    write_pgm(RasterImage(pixels=np.clip(img, 0.0, 1.0)), path)


def write_heatmap_png(report: AlignmentReport, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ann = report.annotators
    M = pairwise_matrix(report)
    fig, ax = plt.subplots(figsize=(1.2 + 0.6 * len(ann), 1.0 + 0.6 * len(ann)))
    im = ax.imshow(M, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(ann)), ann, rotation=45, ha="right")
    ax.set_yticks(range(len(ann)), ann)
    for a in range(len(ann)):
        for b in range(len(ann)):
            if not np.isnan(M[a, b]):
                ax.text(b, a, f"{M[a, b]:.2f}", ha="center", va="center", fontsize=8)
    fig.colorbar(im, ax=ax, label="alignment")
    ax.set_title("pairwise alignment")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def write_confidence_png(curves: dict, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for name, curve in sorted(curves.items()):
        ts = [pt["threshold"] for pt in curve.points]
        ax1.plot(ts, [pt["retained_fraction"] for pt in curve.points], marker="o", label=name)
        defined = [(pt["threshold"], pt["alignment"]) for pt in curve.points if pt["alignment"] is not None]
        if defined:
            ax2.plot(*zip(*defined), marker="o", label=name)
    ax1.set_xlabel("confidence threshold")
    ax1.set_ylabel("retained fraction")
    ax2.set_xlabel("confidence threshold")
    ax2.set_ylabel("alignment with humans")
    for ax in (ax1, ax2):
        ax.set_ylim(-0.05, 1.05)
        ax.legend()
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
