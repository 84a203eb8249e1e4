"""Impact/Engagement ranking of pages and users on a bipartite interaction network."""

from .engine import PopRankConfig, estimate_T, iterate_once, popularity, run, sweep_alpha
from .model import (BiadjacencyMatrix, Category, DataError, DegenerateError, FitReport,
                    InteractionRecord, MatrixKind, NumericalError, PageMeta, ParseError,
                    PopRankError, RankResult, prune_matrix)
from .rca import binarize, rca_matrix, rca_values

__version__ = "0.1.0"

__all__ = [
    "BiadjacencyMatrix", "Category", "DataError", "DegenerateError", "FitReport",
    "InteractionRecord", "MatrixKind", "NumericalError", "PageMeta", "ParseError",
    "PopRankConfig", "PopRankError", "RankResult", "binarize", "estimate_T",
    "iterate_once", "popularity", "prune_matrix", "rca_matrix", "rca_values", "run",
    "sweep_alpha",
]
