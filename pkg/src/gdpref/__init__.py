"""Graph-layout preference toolkit.

Generates eight canonical layouts per graph, collects preference labels
through an adaptive assignment service, computes annotator-agreement
statistics (including Procrustes similarity-aware agreement), trains a
soft-multiclass preference classifier, and drives an LLM labeler.
"""

from gdpref.graphs import Graph, GraphCorpus, parse_graph
from gdpref.layouts import ALGORITHMS, Layout, LayoutSet, layout, layout_all, normalize

__all__ = [
    "ALGORITHMS",
    "Graph",
    "GraphCorpus",
    "Layout",
    "LayoutSet",
    "layout",
    "layout_all",
    "normalize",
    "parse_graph",
]

__version__ = "0.1.0"
