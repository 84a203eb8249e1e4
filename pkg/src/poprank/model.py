"""Core domain types shared across the pipeline.

All types are immutable after construction. Matrices are stored as
``scipy.sparse.csr_matrix``; the contract is value-level, so callers may
pass dense arrays to the constructors and get the same object back.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class PopRankError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PopRankError, ValueError):
    """Input data violates a documented precondition."""


class ParseError(DataError):
    """A line of an input file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateError(DataError):
    """The input leaves nothing meaningful to compute on."""


class NumericalError(PopRankError, ArithmeticError):
    """A non-finite value appeared during iteration."""

    def __init__(self, message: str, iteration: int | None = None, diagnostics: dict | None = None):
        self.iteration = iteration
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class Category(str, enum.Enum):
    SCIENCE = "science"
    CONSPIRACY = "conspiracy"
    UNKNOWN = "unknown"


class MatrixKind(str, enum.Enum):
    RAW_COUNTS = "raw_counts"
    BINARY_RCA = "binary_rca"


@dataclass(frozen=True)
class InteractionRecord:
    """Number of comments ``user_id`` left on ``page_id`` during ``month``."""

    user_id: str
    page_id: str
    month: int
    comments: int

    def __post_init__(self):
        if self.month < 1:
            raise DataError(f"month must be >= 1, got {self.month}")
        if self.comments < 1:
            raise DataError(f"comments must be >= 1, got {self.comments}")

    def to_dict(self) -> dict:
        return {"user_id": self.user_id, "page_id": self.page_id,
                "month": self.month, "comments": self.comments}

    @classmethod
    def from_dict(cls, d: Mapping) -> "InteractionRecord":
        return cls(str(d["user_id"]), str(d["page_id"]), int(d["month"]), int(d["comments"]))


@dataclass(frozen=True)
class PageMeta:
    page_id: str
    posts_per_month: Mapping[int, int] = field(default_factory=dict)
    category: Category = Category.UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "posts_per_month", dict(sorted(self.posts_per_month.items())))
        for month, posts in self.posts_per_month.items():
            if month < 1:
                raise DataError(f"page {self.page_id}: month must be >= 1, got {month}")
            if posts < 0:
                raise DataError(f"page {self.page_id}: negative post count in month {month}")

    def posts_between(self, start: int, end: int) -> int:
        return sum(n for m, n in self.posts_per_month.items() if start <= m <= end)

    def to_dict(self) -> dict:
        return {"page_id": self.page_id, "category": self.category.value,
                "posts_per_month": {str(m): n for m, n in self.posts_per_month.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PageMeta":
        return cls(str(d["page_id"]),
                   {int(m): int(n) for m, n in d["posts_per_month"].items()},
                   Category(d["category"]))


@dataclass(frozen=True, eq=False)
class BiadjacencyMatrix:
    """User x page matrix with the id <-> index maps.

    ``removed_users``/``removed_pages`` keep the ids dropped by
    :func:`prune_matrix` so callers can report them.
    """

    user_index: tuple[str, ...]
    page_index: tuple[str, ...]
    weights: sp.csr_matrix
    kind: MatrixKind = MatrixKind.RAW_COUNTS
    removed_users: tuple[str, ...] = ()
    removed_pages: tuple[str, ...] = ()

    def __post_init__(self):
        users = tuple(str(u) for u in self.user_index)
        pages = tuple(str(p) for p in self.page_index)
        if len(set(users)) != len(users):
            raise DataError("duplicate user ids")
        if len(set(pages)) != len(pages):
            raise DataError("duplicate page ids")
        w = sp.csr_matrix(self.weights, dtype=float, copy=True)
        if w.shape != (len(users), len(pages)):
            raise DataError(f"weights shape {w.shape} does not match index sizes "
                            f"({len(users)}, {len(pages)})")
        w.eliminate_zeros()
        w.sort_indices()
        if w.nnz and (not np.all(np.isfinite(w.data)) or w.data.min() < 0):
            raise DataError("weights must be finite and nonnegative")
        kind = MatrixKind(self.kind)
        if kind is MatrixKind.BINARY_RCA and w.nnz and not np.all(w.data == 1.0):
            raise DataError("binary_rca matrix must contain only 0/1 weights")
        w.data.setflags(write=False)
        object.__setattr__(self, "user_index", users)
        object.__setattr__(self, "page_index", pages)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "removed_users", tuple(self.removed_users))
        object.__setattr__(self, "removed_pages", tuple(self.removed_pages))

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_pages(self) -> int:
        return len(self.page_index)

    def dense(self) -> np.ndarray:
        return self.weights.toarray()

    def __eq__(self, other):
        if not isinstance(other, BiadjacencyMatrix):
            return NotImplemented
        return (self.user_index == other.user_index
                and self.page_index == other.page_index
                and self.kind == other.kind
                and self.removed_users == other.removed_users
                and self.removed_pages == other.removed_pages
                and (self.weights != other.weights).nnz == 0)

    __hash__ = None

    @classmethod
    def from_dense(cls, weights, users: Sequence[str] | None = None,
                   pages: Sequence[str] | None = None,
                   kind: MatrixKind = MatrixKind.RAW_COUNTS) -> "BiadjacencyMatrix":
        """Build from a dense array; default ids are ``u0, u1, ...`` and ``p0, p1, ...``."""
        arr = np.atleast_2d(np.asarray(weights, dtype=float))
        if users is None:
            users = [f"u{i}" for i in range(arr.shape[0])]
        if pages is None:
            pages = [f"p{j}" for j in range(arr.shape[1])]
        return cls(tuple(users), tuple(pages), sp.csr_matrix(arr), kind)

    def to_dict(self) -> dict:
        coo = self.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        entries = [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]
        return {"kind": self.kind.value, "users": list(self.user_index),
                "pages": list(self.page_index), "entries": entries,
                "removed_users": list(self.removed_users),
                "removed_pages": list(self.removed_pages)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BiadjacencyMatrix":
        users, pages = d["users"], d["pages"]
        entries = d["entries"]
        if entries:
            rows, cols, vals = zip(*entries)
        else:
            rows, cols, vals = (), (), ()
        w = sp.csr_matrix((np.asarray(vals, dtype=float), (np.asarray(rows, dtype=int),
                                                          np.asarray(cols, dtype=int))),
                          shape=(len(users), len(pages)))
        return cls(tuple(users), tuple(pages), w, MatrixKind(d["kind"]),
                   tuple(d.get("removed_users", ())), tuple(d.get("removed_pages", ())))


def prune_matrix(m: BiadjacencyMatrix) -> BiadjacencyMatrix:
    """Drop all-zero rows and columns until none remain.

    Raises DegenerateError if nothing is left.
    """
    users, pages, w = list(m.user_index), list(m.page_index), m.weights
    removed_users, removed_pages = list(m.removed_users), list(m.removed_pages)
    while True:
        row_keep = np.diff(w.indptr) > 0
        col_keep = np.bincount(w.indices, minlength=w.shape[1]) > 0
        if row_keep.all() and col_keep.all():
            break
        removed_users += [u for u, k in zip(users, row_keep) if not k]
        removed_pages += [p for p, k in zip(pages, col_keep) if not k]
        users = [u for u, k in zip(users, row_keep) if k]
        pages = [p for p, k in zip(pages, col_keep) if k]
        w = w[row_keep][:, col_keep]
        if not users or not pages:
            break
    if not users or not pages:
        raise DegenerateError("degenerate input: no connected users/pages")
    return BiadjacencyMatrix(tuple(users), tuple(pages), w, m.kind,
                             tuple(removed_users), tuple(removed_pages))


TIE_RTOL = 1e-12


def _tie_groups(vals: list[float], members: list[int]) -> list[list[int]]:
    """Split ``members`` into groups of near-equal value, largest first.

    Neighbours in descending order closer than ``TIE_RTOL`` (relative) chain
    into one group, so the grouping does not depend on input order.
    """
    members = sorted(members, key=lambda i: -vals[i])
    groups: list[list[int]] = []
    for i in members:
        if groups:
            prev = vals[groups[-1][-1]]
            if prev - vals[i] <= TIE_RTOL * max(abs(prev), abs(vals[i])):
                groups[-1].append(i)
                continue
        groups.append([i])
    return groups


def normalized_ranks(ids: Sequence[str], values: Iterable[float],
                     secondary: Iterable[float] | None = None) -> dict[str, float]:
    """Map scores to ``{1/N, ..., 1}``; the largest score gets 1.

    Scores agreeing to ``TIE_RTOL`` count as tied: such ties fall back to
    ``secondary`` (larger is better, same tolerance), then to lexicographic
    id order (smaller id ranks higher).
    """
    ids = list(ids)
    vals = [float(v) for v in values]
    if len(vals) != len(ids):
        raise ValueError("ids and values differ in length")
    if not ids:
        raise ValueError("cannot rank an empty collection")
    sec = None if secondary is None else [float(s) for s in secondary]
    order: list[int] = []
    for group in _tie_groups(vals, list(range(len(ids)))):
        subgroups = [group] if sec is None else _tie_groups(sec, group)
        for sub in subgroups:
            order.extend(sorted(sub, key=lambda i: ids[i]))
    n = len(ids)
    return {ids[i]: (n - pos) / n for pos, i in enumerate(order)}


def _float_out(x: float):
    return None if math.isinf(x) and x > 0 else x


def _float_in(x) -> float:
    return math.inf if x is None else float(x)


@dataclass(frozen=True)
class RankResult:
    """Output of one PopRank run.

    When ``underflow`` is set some values were clamped to the floor and only
    the rankings are meaningful.
    """

    alpha: float
    impact: Mapping[str, float]
    engagement: Mapping[str, float]
    impact_rank: Mapping[str, float]
    engagement_rank: Mapping[str, float]
    iterations: int
    converged: bool
    final_T: float
    underflow: bool = False
    update_order: str = "sequential"

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "impact": dict(self.impact),
                "engagement": dict(self.engagement),
                "impact_rank": dict(self.impact_rank),
                "engagement_rank": dict(self.engagement_rank),
                "iterations": self.iterations, "converged": self.converged,
                "final_T": _float_out(self.final_T), "underflow": self.underflow,
                "update_order": self.update_order}

    @classmethod
    def from_dict(cls, d: Mapping) -> "RankResult":
        return cls(float(d["alpha"]), dict(d["impact"]), dict(d["engagement"]),
                   dict(d["impact_rank"]), dict(d["engagement_rank"]),
                   int(d["iterations"]), bool(d["converged"]), _float_in(d["final_T"]),
                   bool(d.get("underflow", False)), d.get("update_order", "sequential"))


@dataclass(frozen=True)
class FitReport:
    """Ordinary least squares fit of a target on a single regressor."""

    slope: float
    intercept: float
    r_squared: float
    mse: float
    p_value: float
    residuals: Mapping[str, tuple[float, Category]]
    n_points: int
    t_statistic: float = math.nan

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "mse": self.mse, "p_value": self.p_value,
                "t_statistic": _float_out(self.t_statistic), "n_points": self.n_points,
                "residuals": {k: [r, Category(c).value] for k, (r, c) in self.residuals.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FitReport":
        return cls(float(d["slope"]), float(d["intercept"]), float(d["r_squared"]),
                   float(d["mse"]), float(d["p_value"]),
                   {k: (float(r), Category(c)) for k, (r, c) in d["residuals"].items()},
                   int(d["n_points"]), _float_in(d.get("t_statistic")))
