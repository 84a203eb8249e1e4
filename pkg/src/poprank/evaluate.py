"""Prediction harness: regress future page activity on the Impact ranking."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .ingest import Targets
from .model import (Category, DataError, DegenerateError, FitReport, InteractionRecord,
                    RankResult, normalized_ranks)

TARGET_KINDS = ("activity_of", "activity_on", "n_users")
DEFAULT_THRESHOLDS = tuple(k / 10 for k in range(1, 11))


def rank_transform(values: Mapping[str, float]) -> dict[str, float]:
    """Highest value -> 1, lowest -> 1/N; ties go to the smaller id."""
    if not values:
        raise ValueError("values must be nonempty")
    ids = list(values)
    return normalized_ranks(ids, [values[k] for k in ids])


# ---------------------------------------------------------------------------
# t distribution
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, 10_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t * t))))


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------

def linear_fit(x: Mapping[str, float], y: Mapping[str, float],
               categories: Mapping[str, Category] | None = None) -> FitReport:
    """OLS of ``y`` on ``x`` over their common keys.

    The MSE divides by ``P - 2``; the p-value is the two-sided t-test of a
    zero slope.
    """
    categories = categories or {}
    keys = sorted(set(x) & set(y))
    P = len(keys)
    if P < 3:
        raise DegenerateError(f"need at least 3 points, got {P}")
    xs = [float(x[k]) for k in keys]
    ys = [float(y[k]) for k in keys]
    mx, my = math.fsum(xs) / P, math.fsum(ys) / P
    sxx = math.fsum((a - mx) ** 2 for a in xs)
    syy = math.fsum((b - my) ** 2 for b in ys)
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(xs, ys))
    if sxx == 0.0:
        raise DegenerateError("degenerate regressor: x is constant")
    if syy == 0.0:
        raise DegenerateError("degenerate target: y is constant")
    slope = sxy / sxx
    intercept = my - slope * mx
    resid = [b - (intercept + slope * a) for a, b in zip(xs, ys)]
    ssr = math.fsum(r * r for r in resid)
    r2 = min(1.0, max(0.0, 1.0 - ssr / syy))
    mse = ssr / (P - 2)
    se = math.sqrt(mse / sxx)
    if se == 0.0:
        t = math.copysign(math.inf, slope) if slope != 0 else math.nan
    else:
        t = slope / se
    p = t_two_sided_p(t, P - 2) if not math.isnan(t) else 1.0
    residuals = {k: (r, Category(categories.get(k, Category.UNKNOWN)))
                 for k, r in zip(keys, resid)}
    return FitReport(slope, intercept, r2, mse, p, residuals, P, t)


def _target_values(targets: Mapping[str, Targets], kind: str) -> dict[str, float]:
    if kind not in TARGET_KINDS:
        raise ValueError(f"unknown target kind {kind!r}")
    if kind == "n_users":
        return {p: math.log10(1 + t.n_users) for p, t in targets.items()}
    return {p: float(getattr(t, kind)) for p, t in targets.items()}


def regressor(rank_result: RankResult, regress_on: str = "rank") -> dict[str, float]:
    if regress_on == "rank":
        return dict(rank_result.impact_rank)
    if regress_on == "value":
        return dict(rank_result.impact)
    raise ValueError("regress_on must be 'rank' or 'value'")


@dataclass(frozen=True)
class PredictReport:
    """One fit per target kind, for Impact and for the Popularity baseline."""

    impact: dict[str, FitReport]
    baseline: dict[str, FitReport] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"impact": {k: v.to_dict() for k, v in self.impact.items()},
                "baseline": {k: v.to_dict() for k, v in self.baseline.items()}}


def predict_report(rank_result: RankResult, targets: Mapping[str, Targets],
                   categories: Mapping[str, Category] | None = None,
                   baseline: Mapping[str, float] | None = None,
                   regress_on: str = "rank",
                   kinds: Sequence[str] = TARGET_KINDS) -> PredictReport:
    """Regress each target kind on Impact (and on ``baseline``, a ranking).

    ``n_users`` is fitted as ``log10(1 + n_users)`` like the other targets.
    """
    missing = set(rank_result.impact) - set(targets)
    if missing:
        raise DataError(f"targets missing for {len(missing)} ranked pages")
    x = regressor(rank_result, regress_on)
    impact, base = {}, {}
    for kind in kinds:
        y = _target_values(targets, kind)
        impact[kind] = linear_fit(x, y, categories)
        if baseline is not None:
            base[kind] = linear_fit(baseline, y, categories)
    return PredictReport(impact, base)


@dataclass(frozen=True)
class CurveRow:
    alpha: float
    mse_impact: float
    mse_popularity: float
    r_squared: float
    converged: bool


def mse_curve(sweep: Mapping[float, RankResult], targets: Mapping[str, Targets],
              baseline_popularity: Mapping[str, float], kind: str = "activity_of",
              regress_on: str = "rank") -> list[CurveRow]:
    """MSE of Impact vs Popularity per alpha; non-converged runs are left out."""
    y = _target_values(targets, kind)
    mse_pop = linear_fit(baseline_popularity, y).mse
    rows = []
    for alpha in sorted(sweep):
        res = sweep[alpha]
        if not res.converged:
            continue
        fit = linear_fit(regressor(res, regress_on), y)
        rows.append(CurveRow(alpha, fit.mse, mse_pop, fit.r_squared, True))
    return rows


def category_mean_rank(ranks: Mapping[str, float],
                       categories: Mapping[str, Category]) -> dict[str, float]:
    """Mean rank per category; descriptive only."""
    groups: dict[str, list[float]] = defaultdict(list)
    for p, r in ranks.items():
        groups[Category(categories.get(p, Category.UNKNOWN)).value].append(r)
    return {c: math.fsum(v) / len(v) for c, v in sorted(groups.items())}


# ---------------------------------------------------------------------------
# Polarization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolarizationGroups:
    """``membership[x][page]``: users whose share of comments on ``page`` is >= x."""

    thresholds: tuple[float, ...]
    membership: Mapping[float, Mapping[str, frozenset[str]]]
    ratios: Mapping[tuple[str, str], float] = field(default_factory=dict, repr=False)


def polarization_groups(records: Iterable[InteractionRecord], window: tuple[int, int],
                        thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> PolarizationGroups:
    """Share of each user's window comments that land on each page, bucketed."""
    start, end = window
    if start > end:
        raise ValueError("window is empty")
    per_pair: dict[tuple[str, str], int] = defaultdict(int)
    per_user: dict[str, int] = defaultdict(int)
    for r in records:
        if start <= r.month <= end:
            per_pair[r.user_id, r.page_id] += r.comments
            per_user[r.user_id] += r.comments
    ratios = {(u, p): c / per_user[u] for (u, p), c in per_pair.items()}
    thresholds = tuple(sorted(float(t) for t in thresholds))
    membership: dict[float, dict[str, frozenset[str]]] = {}
    for t in thresholds:
        groups: dict[str, set[str]] = defaultdict(set)
        for (u, p), x in ratios.items():
            if x >= t:
                groups[p].add(u)
        membership[t] = {p: frozenset(us) for p, us in sorted(groups.items())}
    return PolarizationGroups(thresholds, membership, ratios)


@dataclass(frozen=True)
class PolarizationRow:
    threshold: float
    impact: FitReport | None
    baseline: FitReport | None
    skipped: bool = False
    reason: str = ""


def polarization_report(groups: PolarizationGroups, rank_result: RankResult,
                        test_records: Iterable[InteractionRecord],
                        categories: Mapping[str, Category] | None = None,
                        baseline: Mapping[str, float] | None = None,
                        test_window: tuple[int, int] | None = None,
                        regress_on: str = "rank") -> dict[float, PolarizationRow]:
    """Per threshold, fit ``log10(1 + group users commenting in the test window)``.

    Thresholds whose target is identically zero (or constant) are skipped.
    """
    commenters: dict[str, set[str]] = defaultdict(set)
    for r in test_records:
        if test_window is None or test_window[0] <= r.month <= test_window[1]:
            commenters[r.page_id].add(r.user_id)
    x = regressor(rank_result, regress_on)
    pages = list(rank_result.impact)
    out = {}
    for t in groups.thresholds:
        members = groups.membership[t]
        y = {p: math.log10(1 + len(commenters.get(p, set()) & members.get(p, frozenset())))
             for p in pages}
        if all(v == 0 for v in y.values()):
            out[t] = PolarizationRow(t, None, None, True, "no group users in the test window")
            continue
        try:
            fit = linear_fit(x, y, categories)
            base = linear_fit(baseline, y, categories) if baseline is not None else None
        except DegenerateError as exc:
            out[t] = PolarizationRow(t, None, None, True, str(exc))
            continue
        out[t] = PolarizationRow(t, fit, base)
    return out


# ---------------------------------------------------------------------------
# Plot-ready CSVs
# ---------------------------------------------------------------------------

def _num(x) -> str:
    return "" if x is None else repr(float(x))


def write_scatter(path, rank_result: RankResult, targets: Mapping[str, Targets],
                  fit: FitReport, kind: str = "activity_of") -> None:
    y = _target_values(targets, kind)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["page_id", "impact_rank", "target", "category", "residual"])
        for p in sorted(fit.residuals, key=lambda k: (-rank_result.impact_rank[k], k)):
            resid, cat = fit.residuals[p]
            w.writerow([p, _num(rank_result.impact_rank[p]), _num(y[p]), cat.value, _num(resid)])


def write_mse_curve(path, rows: Sequence[CurveRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "mse_impact", "mse_popularity"])
        for r in rows:
            w.writerow([_num(r.alpha), _num(r.mse_impact), _num(r.mse_popularity)])


def write_polarization(path, rows: Mapping[float, PolarizationRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "r_squared", "mse_impact", "mse_popularity"])
        for t in sorted(rows):
            row = rows[t]
            if row.skipped:
                w.writerow([_num(t), "", "", ""])
                continue
            w.writerow([_num(t), _num(row.impact.r_squared), _num(row.impact.mse),
                        _num(row.baseline.mse if row.baseline else None)])
