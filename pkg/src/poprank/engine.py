"""Coupled Impact/Engagement iteration on a user x page matrix.

One step, in the default ``sequential`` order::

    I~_p = sum_u M[u, p] / E_u          I = I~ / mean(I~)
    E~_u = sum_p M[u, p] * (1/I_p)**a   E = E~ / mean(E~)

where the Engagement update reads the Impact just computed. ``jacobi``
order makes it read the Impact from the previous step instead.

Iteration stops when the ranking has settled: ``estimate_T`` extrapolates
the per-page log growth rates and returns the number of further steps
before any two adjacent pages would swap. Values may drift to zero on
sparse matrices, so a plain tolerance on values is not used.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .model import (BiadjacencyMatrix, DegenerateError, NumericalError, PopRankError,
                    RankResult, normalized_ranks)

log = logging.getLogger(__name__)

UPDATE_ORDERS = ("sequential", "jacobi")
_EPS = np.finfo(float).eps
_FIXED_RTOL = 8 * _EPS


@dataclass(frozen=True)
class PopRankConfig:
    alpha: float = -0.5
    max_iterations: int = 1_000_000
    T_threshold: float = 1e6
    underflow_floor: float = 1e-300
    initial_value: float = 1.0
    update_order: str = "sequential"
    # growth rates are noisy during the first steps
    burn_in: int = 10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.T_threshold > 0:
            raise ValueError("T_threshold must be > 0")
        if not self.underflow_floor > 0:
            raise ValueError("underflow_floor must be > 0")
        if not self.initial_value > 0:
            raise ValueError("initial_value must be > 0")
        if self.update_order not in UPDATE_ORDERS:
            raise ValueError(f"update_order must be one of {UPDATE_ORDERS}")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "PopRankConfig":
        return cls(**d)


class _Operator:
    """Row-wise products with M and M^T.

    Each output is a plain left-to-right sum over the stored entries of one
    row, so identical rows (or columns) give bit-identical results.
    """

    def __init__(self, weights: sp.spmatrix):
        m = sp.csr_matrix(weights, dtype=float)
        m.sort_indices()
        mt = sp.csr_matrix(m.T)
        mt.sort_indices()
        self.shape = m.shape
        self._rows = (m.indices, m.indptr[:-1], m.data, bool(np.all(np.diff(m.indptr))))
        self._cols = (mt.indices, mt.indptr[:-1], mt.data, bool(np.all(np.diff(mt.indptr))))
        self._m, self._mt = m, mt

    @staticmethod
    def _apply(parts, fallback, x):
        indices, starts, data, dense_rows = parts
        if not dense_rows:
            return fallback @ x
        return np.add.reduceat(data * x[indices], starts)

    def matvec(self, x):
        """``M @ x``: one value per user."""
        return self._apply(self._rows, self._m, x)

    def rmatvec(self, x):
        """``M.T @ x``: one value per page."""
        return self._apply(self._cols, self._mt, x)


def _inv_power(x: np.ndarray, a: float) -> np.ndarray:
    """``(1/x)**a``, rescaled by a common factor if it would overflow."""
    out = np.power(1.0 / x, a)
    if math.isfinite(out.sum()):
        return out
    expo = -a * np.log(x)
    return np.exp(expo - expo.max())


def _normalized(op_apply, x, a, what, iteration):
    """``op_apply((1/x)**a)`` divided by its mean."""
    raw = op_apply(_inv_power(x, a))
    total = raw.sum()
    if not math.isfinite(total):
        # rescale before summing; the mean normalization removes the factor
        expo = -a * np.log(x)
        raw = op_apply(np.exp(expo - expo.max()))
        total = raw.sum()
    if not math.isfinite(total):
        raise NumericalError(f"non-finite {what}", iteration,
                             {"n_nonfinite": int((~np.isfinite(raw)).sum())})
    if not total > 0:
        raise NumericalError(f"{what} collapsed to zero", iteration, {"sum": float(total)})
    return raw / (total / raw.size)


def _step(op: _Operator, impact, engagement, alpha, order, iteration=None, floor=None):
    """One map application; with ``floor`` set, values below it are clamped
    and the second return pair flags which entries were."""
    new_i = _normalized(op.rmatvec, engagement, 1.0, "impact", iteration)
    low_i = None
    if floor is not None:
        low_i = new_i < floor
        if low_i.any():
            new_i = np.maximum(new_i, floor)
    source = new_i if order == "sequential" else impact
    new_e = _normalized(op.matvec, source, alpha, "engagement", iteration)
    low_e = None
    if floor is not None:
        low_e = new_e < floor
        if low_e.any():
            new_e = np.maximum(new_e, floor)
    return new_i, new_e, low_i, low_e


def _check_positive(x: np.ndarray, what: str):
    if x.ndim != 1 or not np.all(np.isfinite(x)) or not np.all(x > 0):
        raise ValueError(f"{what} must be a finite, strictly positive vector")


def iterate_once(m: BiadjacencyMatrix, impact, engagement, alpha: float,
                 update_order: str = "sequential") -> tuple[np.ndarray, np.ndarray]:
    """Apply one step of the map; both outputs have unit mean."""
    impact = np.asarray(impact, dtype=float)
    engagement = np.asarray(engagement, dtype=float)
    _check_positive(impact, "impact")
    _check_positive(engagement, "engagement")
    if impact.shape != (m.n_pages,) or engagement.shape != (m.n_users,):
        raise ValueError("impact/engagement lengths do not match the matrix")
    if update_order not in UPDATE_ORDERS:
        raise ValueError(f"update_order must be one of {UPDATE_ORDERS}")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        new_i, new_e, _, _ = _step(_Operator(m.weights), impact, engagement, alpha,
                                   update_order)
    return new_i, new_e


def estimate_T(impact_prev, impact_curr) -> float:
    """Extrapolated number of steps until the next swap of adjacent pages.

    Growth rates are ``g = ln(curr / prev)``. For each pair of neighbours
    in the current descending order, a lower page growing faster than the
    one above it crosses after ``ln(I_above / I_below) / (g_below - g_above)``
    steps. Rate differences at the rounding-noise level count as zero.
    """
    prev = np.asarray(impact_prev, dtype=float)
    curr = np.asarray(impact_curr, dtype=float)
    if prev.shape != curr.shape or prev.ndim != 1 or prev.size < 2:
        raise ValueError("need two vectors of equal length >= 2")
    if not (np.all(prev > 0) and np.all(curr > 0)):
        raise ValueError("impacts must be strictly positive")
    return _crossing_time(np.log(prev), np.log(curr))


def _crossing_time(lp: np.ndarray, lc: np.ndarray) -> float:
    order = np.argsort(-lc, kind="stable")
    lc_s = lc[order]
    g_s = (lc - lp)[order]
    gap = lc_s[:-1] - lc_s[1:]
    dg = g_s[1:] - g_s[:-1]
    scale = 1.0 + np.maximum(np.abs(lc), np.abs(lp))[order]
    noise = (16 * _EPS) * np.maximum(scale[:-1], scale[1:])
    moving = dg > noise
    if not moving.any():
        return math.inf
    return float(np.min(gap[moving] / dg[moving]))


def _validate_matrix(m: BiadjacencyMatrix):
    w = m.weights
    if w.shape[0] == 0 or w.shape[1] == 0:
        raise DegenerateError("degenerate input: empty matrix")
    if (np.diff(w.indptr) == 0).any() or (np.bincount(w.indices, minlength=w.shape[1]) == 0).any():
        raise DegenerateError("matrix has all-zero rows or columns; prune it first")


def run(m: BiadjacencyMatrix, cfg: PopRankConfig | None = None,
        initial_impact=None, initial_engagement=None) -> RankResult:
    """Iterate from a uniform (or given) start until the ranking has settled."""
    cfg = cfg or PopRankConfig()
    _validate_matrix(m)
    op = _Operator(m.weights)
    n_p, n_u = m.n_pages, m.n_users
    impact = (np.full(n_p, cfg.initial_value) if initial_impact is None
              else np.array(initial_impact, dtype=float))
    engagement = (np.full(n_u, cfg.initial_value) if initial_engagement is None
                  else np.array(initial_engagement, dtype=float))
    _check_positive(impact, "initial impact")
    _check_positive(engagement, "initial engagement")
    if impact.shape != (n_p,) or engagement.shape != (n_u,):
        raise ValueError("initial vectors do not match the matrix")

    floor = cfg.underflow_floor
    underflow = False
    trail_i, trail_e = impact.copy(), engagement.copy()
    converged = False
    T = math.nan
    n = 0
    log_i = np.log(impact)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for n in range(1, cfg.max_iterations + 1):
            new_i, new_e, low_i, low_e = _step(op, impact, engagement, cfg.alpha,
                                               cfg.update_order, n, floor)
            if low_i.any() or low_e.any():
                underflow = True
                trail_i = np.where(low_i, trail_i, new_i)
                trail_e = np.where(low_e, trail_e, new_e)
            else:
                trail_i, trail_e = new_i, new_e
            new_log_i = np.log(new_i)
            T = _crossing_time(log_i, new_log_i) if n_p >= 2 else math.inf
            settled = T > cfg.T_threshold
            if settled and n < cfg.burn_in:
                # a fixed point (up to a few ulps) needs no burn-in
                settled = (np.allclose(new_i, impact, rtol=_FIXED_RTOL, atol=0.0)
                           and np.allclose(new_e, engagement, rtol=_FIXED_RTOL, atol=0.0))
            impact, engagement, log_i = new_i, new_e, new_log_i
            if settled:
                converged = True
                break
    if not converged:
        log.warning("no ranking convergence after %d iterations (alpha=%g, T=%g)",
                    n, cfg.alpha, T)

    pages, users = m.page_index, m.user_index
    return RankResult(
        alpha=float(cfg.alpha),
        impact={p: float(v) for p, v in zip(pages, impact)},
        engagement={u: float(v) for u, v in zip(users, engagement)},
        impact_rank=normalized_ranks(pages, impact, trail_i),
        engagement_rank=normalized_ranks(users, engagement, trail_e),
        iterations=n,
        converged=converged,
        final_T=float(T),
        underflow=underflow,
        update_order=cfg.update_order,
    )


def popularity(m: BiadjacencyMatrix) -> tuple[dict[str, float], dict[str, float]]:
    """Column sums of ``m`` and their normalized ranking."""
    sums = np.asarray(m.weights.sum(axis=0)).ravel()
    values = {p: float(s) for p, s in zip(m.page_index, sums)}
    return values, normalized_ranks(m.page_index, sums)


def _threads_from_env() -> int:
    raw = os.environ.get("POPRANK_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def sweep_alpha(m: BiadjacencyMatrix, alphas: Sequence[float], cfg: PopRankConfig | None = None,
                max_workers: int | None = None
                ) -> tuple[dict[float, RankResult], dict[float, str]]:
    """Run once per alpha.

    Returns ``(results, errors)``; an alpha that raised ends up in
    ``errors`` with the message and the sweep carries on. Parallelism is
    capped by ``max_workers`` or ``POPRANK_THREADS`` (default 1); the
    output does not depend on it.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("alphas must be nonempty")
    cfg = cfg or PopRankConfig()
    workers = max_workers or _threads_from_env()

    def one(alpha):
        try:
            return alpha, run(m, replace(cfg, alpha=alpha)), None
        except PopRankError as exc:
            return alpha, None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, alphas))
    else:
        outcomes = [one(a) for a in alphas]
    results = {a: r for a, r, _ in outcomes if r is not None}
    errors = {a: e for a, _, e in outcomes if e is not None}
    return results, errors


def alpha_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid ``start, start+step, ..., stop`` without float drift."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9))
    if n < 0:
        raise ValueError("stop is below start")
    return [round(start + k * step, 12) for k in range(n + 1)]
