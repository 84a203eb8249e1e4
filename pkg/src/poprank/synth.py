"""Synthetic interaction data with planted page quality, plus naive oracles.

Generative model
----------------
Each page has a latent quality ``q_p`` and each user a propensity ``e_u``.
A user follows ``1 + Poisson(follow_mean * e_u)`` pages drawn without
replacement with probability proportional to ``q_p``, and only ever
comments on followed pages. In month ``m`` the number of comments of user
``u`` on followed page ``p`` is Poisson with mean

    base_rate * e_u * Q_u * w_up(m) / sum_{p' followed} w_up'(m),
    w_up(m) = q_p * (1 + reinforcement) ** h_up(m),

where ``Q_u`` is the total quality of the followed set and ``h_up(m)`` the
number of earlier months in which ``u`` commented ``p``. With
``reinforcement = 0`` this is exactly ``base_rate * e_u * q_p``; larger
values concentrate a user's attention on the pages they already comment.
Pages publish ``Poisson(post_rate * q_p)`` posts per month.

Random draws happen in a fixed order: qualities, propensities, categories,
follow sets (user by user), then for each month the comment counts
(user-major, followed pages in drawn order) followed by the post counts.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .model import BiadjacencyMatrix, Category, InteractionRecord, PageMeta

QUALITY_LAWS = ("uniform", "beta", "lognormal")


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 500
    n_pages: int = 50
    n_months: int = 22
    seed: int = 0
    # first month index; 40 lines up with the 40:55 / 56:61 windows
    start_month: int = 40
    page_quality: str = "uniform"
    quality_min: float = 0.05
    propensity_min: float = 0.05
    reinforcement: float = 0.3
    category_split: float = 0.5
    follow_mean: float = 12.0
    base_rate: float = 10.0
    post_rate: float = 20.0

    def __post_init__(self):
        if min(self.n_users, self.n_pages, self.n_months) < 1:
            raise ValueError("n_users, n_pages and n_months must be >= 1")
        if self.start_month < 1:
            raise ValueError("start_month must be >= 1")
        if self.page_quality not in QUALITY_LAWS:
            raise ValueError(f"page_quality must be one of {QUALITY_LAWS}")
        if not 0 < self.quality_min <= 1 or not 0 < self.propensity_min <= 1:
            raise ValueError("quality_min and propensity_min must lie in (0, 1]")
        if self.reinforcement < 0:
            raise ValueError("reinforcement must be >= 0")
        if not 0 <= self.category_split <= 1:
            raise ValueError("category_split must lie in [0, 1]")
        if self.follow_mean < 0 or self.base_rate <= 0 or self.post_rate < 0:
            raise ValueError("rates must be nonnegative (base_rate positive)")

    @property
    def months(self) -> range:
        return range(self.start_month, self.start_month + self.n_months)

    def to_dict(self) -> dict:
        return asdict(self)


class Latent(NamedTuple):
    quality: np.ndarray
    propensity: np.ndarray
    categories: list[Category]
    follows: list[np.ndarray]


def page_id(j: int) -> str:
    return f"p{j:03d}"


def user_id(i: int) -> str:
    return f"u{i:05d}"


def _quality(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    lo = cfg.quality_min
    if cfg.page_quality == "uniform":
        q = rng.uniform(lo, 1.0, cfg.n_pages)
    elif cfg.page_quality == "beta":
        q = lo + (1 - lo) * rng.beta(2.0, 5.0, cfg.n_pages)
    else:
        q = np.exp(rng.normal(0.0, 1.0, cfg.n_pages))
        q = np.clip(q / q.max(), lo, 1.0)
    return q


def _latent(cfg: SynthConfig, rng: np.random.Generator) -> Latent:
    q = _quality(cfg, rng)
    e = rng.uniform(cfg.propensity_min, 1.0, cfg.n_users)
    n_science = int(round(cfg.category_split * cfg.n_pages))
    science = set(rng.permutation(cfg.n_pages)[:n_science].tolist())
    cats = [Category.SCIENCE if j in science else Category.CONSPIRACY
            for j in range(cfg.n_pages)]
    probs = q / q.sum()
    follows = []
    for i in range(cfg.n_users):
        k = min(cfg.n_pages, 1 + int(rng.poisson(cfg.follow_mean * e[i])))
        follows.append(rng.choice(cfg.n_pages, size=k, replace=False, p=probs))
    return Latent(q, e, cats, follows)


def latent(cfg: SynthConfig) -> Latent:
    """The latent variables ``generate`` draws for ``cfg``."""
    return _latent(cfg, np.random.default_rng(cfg.seed))


def generate(cfg: SynthConfig) -> tuple[list[InteractionRecord], list[PageMeta], dict[str, float]]:
    """Draw a dataset; returns ``(records, page_meta, planted_quality)``."""
    rng = np.random.default_rng(cfg.seed)
    q, e, cats, follows = _latent(cfg, rng)
    history = [np.zeros(len(f)) for f in follows]
    records: list[InteractionRecord] = []
    posts = {j: {} for j in range(cfg.n_pages)}
    for month in cfg.months:
        for i, pages in enumerate(follows):
            qs = q[pages]
            w = qs * (1.0 + cfg.reinforcement) ** history[i]
            lam = cfg.base_rate * e[i] * qs.sum() * w / w.sum()
            counts = rng.poisson(lam)
            for j, c in zip(pages, counts):
                if c > 0:
                    records.append(InteractionRecord(user_id(i), page_id(int(j)), month, int(c)))
            history[i] += counts > 0
        for j, n in enumerate(rng.poisson(cfg.post_rate * q)):
            posts[j][month] = int(n)
    meta = [PageMeta(page_id(j), posts[j], cats[j]) for j in range(cfg.n_pages)]
    truth = {page_id(j): float(q[j]) for j in range(cfg.n_pages)}
    return records, meta, truth


# ---------------------------------------------------------------------------
# Oracles: deliberately plain loops, for tests only.
# ---------------------------------------------------------------------------

ORACLE_MAX_SIZE = 12


def _as_lists(m) -> list[list[float]]:
    if isinstance(m, BiadjacencyMatrix):
        m = m.dense()
    rows = [[float(x) for x in row] for row in np.asarray(m, dtype=float)]
    if len(rows) > ORACLE_MAX_SIZE or any(len(r) > ORACLE_MAX_SIZE for r in rows):
        raise ValueError(f"oracle only accepts matrices up to {ORACLE_MAX_SIZE}x{ORACLE_MAX_SIZE}")
    return rows


def oracle_iterate(m, alpha: float, n_steps: int, update_order: str = "sequential",
                   impact0=None, engagement0=None) -> tuple[list[float], list[float]]:
    """Apply the Impact/Engagement map ``n_steps`` times with explicit loops."""
    M = _as_lists(m)
    n_u, n_p = len(M), len(M[0])
    I = [1.0] * n_p if impact0 is None else [float(x) for x in impact0]
    E = [1.0] * n_u if engagement0 is None else [float(x) for x in engagement0]
    for _ in range(n_steps):
        I_raw = []
        for p in range(n_p):
            s = 0.0
            for u in range(n_u):
                s += M[u][p] * (1.0 / E[u])
            I_raw.append(s)
        mean_i = sum(I_raw) / n_p
        I_new = [x / mean_i for x in I_raw]
        src = I_new if update_order == "sequential" else I
        E_raw = []
        for u in range(n_u):
            s = 0.0
            for p in range(n_p):
                s += M[u][p] * (1.0 / src[p]) ** alpha
            E_raw.append(s)
        mean_e = sum(E_raw) / n_u
        I, E = I_new, [x / mean_e for x in E_raw]
    return I, E


def fitness_complexity(m, n_steps: int) -> tuple[list[float], list[float]]:
    """Fitness of rows and Complexity of columns.

    Each step first updates complexity from fitness,
    ``Q_p = 1 / sum_c M[c, p] / F_c``, then fitness from the new complexity,
    ``F_c = sum_p M[c, p] Q_p``; both are divided by their mean.
    """
    M = _as_lists(m)
    n_c, n_p = len(M), len(M[0])
    F = [1.0] * n_c
    Q = [1.0] * n_p
    for _ in range(n_steps):
        Q = [1.0 / sum(M[c][p] / F[c] for c in range(n_c)) for p in range(n_p)]
        mq = sum(Q) / n_p
        Q = [x / mq for x in Q]
        F = [sum(M[c][p] * Q[p] for p in range(n_p)) for c in range(n_c)]
        mf = sum(F) / n_c
        F = [x / mf for x in F]
    return F, Q
