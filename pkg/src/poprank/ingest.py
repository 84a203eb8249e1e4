"""Reading interaction/page files and building biadjacency matrices.

File formats (UTF-8, comma separated, ``#`` lines ignored, header optional):

    interactions:  user_id,page_id,month,comments
    pages:         page_id,month,posts,category
"""

from __future__ import annotations

import csv
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .model import (BiadjacencyMatrix, Category, DataError, DegenerateError,
                    InteractionRecord, MatrixKind, PageMeta, ParseError)

INTERACTIONS_HEADER = ("user_id", "page_id", "month", "comments")
PAGES_HEADER = ("page_id", "month", "posts", "category")


@dataclass(frozen=True)
class WindowConfig:
    """Training/test month windows (inclusive) and the page activity threshold."""

    train_start: int
    train_end: int
    test_start: int
    test_end: int
    min_page_comments: int = 5

    def __post_init__(self):
        if not (self.train_start <= self.train_end < self.test_start <= self.test_end):
            raise DataError(
                "windows must satisfy train_start <= train_end < test_start <= test_end, got "
                f"{self.train_start}:{self.train_end} / {self.test_start}:{self.test_end}")
        if self.train_start < 1:
            raise DataError("month indices start at 1")
        if self.min_page_comments < 0:
            raise DataError("min_page_comments must be >= 0")

    @property
    def train_months(self) -> range:
        return range(self.train_start, self.train_end + 1)

    @property
    def test_months(self) -> range:
        return range(self.test_start, self.test_end + 1)

    def to_dict(self) -> dict:
        return {"train_start": self.train_start, "train_end": self.train_end,
                "test_start": self.test_start, "test_end": self.test_end,
                "min_page_comments": self.min_page_comments}

    @classmethod
    def from_dict(cls, d: Mapping) -> "WindowConfig":
        return cls(**{k: int(v) for k, v in d.items()})


class Targets(NamedTuple):
    """Test-window activity of one page."""

    activity_of: float
    activity_on: float
    n_users: int


def parse_window(text: str) -> tuple[int, int]:
    """Parse ``"a:b"`` into an inclusive month range."""
    try:
        a, b = text.split(":")
        start, end = int(a), int(b)
    except ValueError:
        raise ValueError(f"expected a window of the form START:END, got {text!r}") from None
    if start > end:
        raise ValueError(f"window start {start} is after its end {end}")
    return start, end


def _rows(path: Path, header: tuple[str, ...]):
    """Yield ``(line_number, fields)`` skipping comments, blanks and the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        seen_data = False
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = [f.strip() for f in next(csv.reader([stripped]))]
            if not seen_data and tuple(fields) == header:
                seen_data = True
                continue
            seen_data = True
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno)
            yield lineno, fields


def _int_field(value: str, name: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"{name} is not an integer: {value!r}", lineno) from None


def load_interactions(path) -> list[InteractionRecord]:
    """Read an interactions file, summing duplicate (user, page, month) rows.

    Zero-count rows are dropped. Records come back in first-seen order.
    """
    totals: dict[tuple[str, str, int], int] = {}
    for lineno, (user, page, month_s, count_s) in _rows(Path(path), INTERACTIONS_HEADER):
        if not user or not page:
            raise ParseError("empty user_id or page_id", lineno)
        month = _int_field(month_s, "month", lineno)
        count = _int_field(count_s, "comments", lineno)
        if month < 1:
            raise ParseError(f"month must be >= 1, got {month}", lineno)
        if count < 0:
            raise ParseError(f"negative comment count {count}", lineno)
        if count == 0:
            continue
        key = (user, page, month)
        totals[key] = totals.get(key, 0) + count
    return [InteractionRecord(u, p, m, c) for (u, p, m), c in totals.items()]


def load_pages(path) -> list[PageMeta]:
    posts: dict[str, dict[int, int]] = {}
    categories: dict[str, Category] = {}
    for lineno, (page, month_s, posts_s, cat) in _rows(Path(path), PAGES_HEADER):
        if not page:
            raise ParseError("empty page_id", lineno)
        month = _int_field(month_s, "month", lineno)
        n = _int_field(posts_s, "posts", lineno)
        if month < 1:
            raise ParseError(f"month must be >= 1, got {month}", lineno)
        if n < 0:
            raise ParseError(f"negative post count {n}", lineno)
        try:
            category = Category(cat)
        except ValueError:
            raise ParseError(f"unknown category {cat!r}", lineno) from None
        if categories.setdefault(page, category) is not category:
            raise ParseError(f"page {page} has conflicting categories", lineno)
        per_month = posts.setdefault(page, {})
        per_month[month] = per_month.get(month, 0) + n
    return [PageMeta(p, posts[p], categories[p]) for p in posts]


def write_interactions(records: Iterable[InteractionRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTERACTIONS_HEADER)
        for r in records:
            w.writerow([r.user_id, r.page_id, r.month, r.comments])


def write_pages(meta: Iterable[PageMeta], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PAGES_HEADER)
        for pm in meta:
            for month, n in pm.posts_per_month.items():
                w.writerow([pm.page_id, month, n, pm.category.value])


def subsample_users(records: Sequence[InteractionRecord], n_users: int,
                    seed: int = 0) -> list[InteractionRecord]:
    """Keep the records of a uniform random sample of ``n_users`` users."""
    users = sorted({r.user_id for r in records})
    if n_users >= len(users):
        return list(records)
    keep = set(random.Random(seed).sample(users, n_users))
    return [r for r in records if r.user_id in keep]


def _build(entries: Iterable[tuple[str, str, float]], kind=MatrixKind.RAW_COUNTS,
           users: Sequence[str] | None = None,
           pages: Sequence[str] | None = None) -> BiadjacencyMatrix:
    """Sum ``(user, page, weight)`` triples into a matrix, ids in first-seen order."""
    entries = list(entries)
    if users is None:
        users = list(dict.fromkeys(u for u, _, _ in entries))
    if pages is None:
        pages = list(dict.fromkeys(p for _, p, _ in entries))
    ui = {u: i for i, u in enumerate(users)}
    pi = {p: j for j, p in enumerate(pages)}
    rows = np.fromiter((ui[u] for u, _, _ in entries), dtype=np.int64, count=len(entries))
    cols = np.fromiter((pi[p] for _, p, _ in entries), dtype=np.int64, count=len(entries))
    vals = np.fromiter((w for _, _, w in entries), dtype=float, count=len(entries))
    w = sp.coo_matrix((vals, (rows, cols)), shape=(len(users), len(pages))).tocsr()
    return BiadjacencyMatrix(tuple(users), tuple(pages), w, kind)


def monthly_matrices(records: Iterable[InteractionRecord],
                     months: tuple[int, int] | range) -> dict[int, BiadjacencyMatrix]:
    """One raw-count matrix per month holding exactly that month's active users/pages."""
    if isinstance(months, tuple):
        months = range(months[0], months[1] + 1)
    if len(months) == 0:
        raise DataError("month range is empty")
    by_month: dict[int, list] = {m: [] for m in months}
    for r in records:
        if r.month in by_month:
            by_month[r.month].append((r.user_id, r.page_id, r.comments))
    return {m: _build(entries) for m, entries in by_month.items()}


def aggregate_training(records: Iterable[InteractionRecord],
                       cfg: WindowConfig) -> BiadjacencyMatrix:
    """Aggregate the training window into one raw-count matrix V.

    Steps, in order:

    1. in each training month, pages with fewer than ``min_page_comments``
       comments that month are treated as inactive;
    2. keep pages active in every training month, then users with at least
       one comment on those pages in every training month;
    3. sum the monthly counts of the survivors;
    4. drop pages whose aggregate total is below ``min_page_comments``.
    """
    months = cfg.train_months
    window = [r for r in records if r.month in months]
    page_month_total: dict[tuple[str, int], int] = defaultdict(int)
    for r in window:
        page_month_total[r.page_id, r.month] += r.comments

    active_months: dict[str, set[int]] = defaultdict(set)
    for (page, month), total in page_month_total.items():
        if total >= cfg.min_page_comments:
            active_months[page].add(month)
    n_months = len(months)
    pages_ok = {p for p, ms in active_months.items() if len(ms) == n_months}

    user_months: dict[str, set[int]] = defaultdict(set)
    for r in window:
        if r.page_id in pages_ok:
            user_months[r.user_id].add(r.month)
    users_ok = {u for u, ms in user_months.items() if len(ms) == n_months}

    kept = [r for r in window if r.page_id in pages_ok and r.user_id in users_ok]
    page_total: dict[str, int] = defaultdict(int)
    for r in kept:
        page_total[r.page_id] += r.comments
    pages_final = {p for p, t in page_total.items() if t >= cfg.min_page_comments}
    kept = [r for r in kept if r.page_id in pages_final]
    if not kept:
        raise DegenerateError("no page/user survives the activity filters")
    return _build((r.user_id, r.page_id, r.comments) for r in kept)


def future_targets(records: Iterable[InteractionRecord], pages: Sequence[str],
                   meta: Sequence[PageMeta], cfg: WindowConfig) -> dict[str, Targets]:
    """Log-scaled test-window activity for each page in ``pages``.

    ``activity_of = log10(1 + posts)``, ``activity_on = log10(1 + comments)``;
    ``n_users`` is the raw count of distinct commenters.
    """
    months = cfg.test_months
    meta_by_id = {pm.page_id: pm for pm in meta}
    comments: dict[str, int] = defaultdict(int)
    commenters: dict[str, set[str]] = defaultdict(set)
    seen_pages: set[str] = set()
    for r in records:
        seen_pages.add(r.page_id)
        if r.month in months:
            comments[r.page_id] += r.comments
            commenters[r.page_id].add(r.user_id)
    out = {}
    for p in pages:
        if p not in meta_by_id and p not in seen_pages:
            raise DataError(f"unknown page_id {p!r}")
        posts = meta_by_id[p].posts_between(cfg.test_start, cfg.test_end) if p in meta_by_id else 0
        out[p] = Targets(math.log10(1 + posts), math.log10(1 + comments[p]),
                         len(commenters[p]))
    return out


def categories_of(meta: Sequence[PageMeta]) -> dict[str, Category]:
    return {pm.page_id: pm.category for pm in meta}
