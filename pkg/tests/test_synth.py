import numpy as np
import pytest
from scipy import stats

from poprank.evaluate import polarization_groups
from poprank.synth import (ORACLE_MAX_SIZE, SynthConfig, fitness_complexity, generate, latent,
                           oracle_iterate, page_id, user_id)


def test_fixed_seed_is_bit_identical():
    cfg = SynthConfig(n_users=60, n_pages=12, n_months=4, seed=9)
    assert generate(cfg) == generate(cfg)
    assert generate(cfg) != generate(SynthConfig(n_users=60, n_pages=12, n_months=4, seed=10))


@pytest.mark.parametrize("law", ["uniform", "beta", "lognormal"])
def test_quality_laws(law):
    cfg = SynthConfig(n_users=30, n_pages=20, n_months=2, page_quality=law)
    _, meta, truth = generate(cfg)
    q = np.array(list(truth.values()))
    assert len(meta) == 20 and q.min() >= cfg.quality_min and q.max() <= 1.0


def test_config_validation():
    for bad in (dict(n_users=0), dict(page_quality="x"), dict(reinforcement=-1),
                dict(category_split=2), dict(base_rate=0)):
        with pytest.raises(ValueError):
            SynthConfig(**bad)


def test_records_stay_on_followed_pages_and_months():
    cfg = SynthConfig(n_users=50, n_pages=15, n_months=3, seed=4)
    records, _, _ = generate(cfg)
    follows = latent(cfg).follows
    allowed = {(user_id(i), page_id(int(j))) for i, f in enumerate(follows) for j in f}
    assert records
    assert all((r.user_id, r.page_id) in allowed for r in records)
    assert {r.month for r in records} <= set(cfg.months)


def test_no_reinforcement_follows_the_multiplicative_law():
    """One month, reinforcement 0: the count of user u on followed page p is
    Poisson(base_rate * e_u * q_p). Pooled per page, a chi-square test at the
    1% level must not reject."""
    cfg = SynthConfig(n_users=2000, n_pages=20, n_months=1, reinforcement=0.0,
                      base_rate=30.0, seed=21)
    records, _, _ = generate(cfg)
    q, e, _, follows = latent(cfg)
    expected = np.zeros(cfg.n_pages)
    for i, f in enumerate(follows):
        expected[f] += cfg.base_rate * e[i] * q[f]
    observed = np.zeros(cfg.n_pages)
    for r in records:
        observed[int(r.page_id[1:])] += r.comments
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    assert stats.chi2.sf(chi2, cfg.n_pages) > 0.01
    # per-user totals too: Poisson(base_rate * e_u * sum of followed q)
    per_user = np.zeros(cfg.n_users)
    for r in records:
        per_user[int(r.user_id[1:])] += r.comments
    lam = np.array([cfg.base_rate * e[i] * q[f].sum() for i, f in enumerate(follows)])
    chi2_u = float(((per_user - lam) ** 2 / lam).sum())
    assert stats.chi2.sf(chi2_u, cfg.n_users) > 0.01


def test_reinforcement_concentrates_attention():
    def top_share(r):
        cfg = SynthConfig(n_users=200, n_pages=20, n_months=12, reinforcement=r, seed=2)
        records, _, _ = generate(cfg)
        g = polarization_groups(records, (cfg.months[0], cfg.months[-1]))
        per_user = {}
        for (u, _), x in g.ratios.items():
            per_user[u] = max(per_user.get(u, 0.0), x)
        return np.mean(list(per_user.values()))
    assert top_share(1.0) > top_share(0.0)


def test_single_page_means_full_polarization():
    cfg = SynthConfig(n_users=40, n_pages=1, n_months=3)
    records, _, _ = generate(cfg)
    g = polarization_groups(records, (cfg.months[0], cfg.months[-1]))
    assert set(g.ratios.values()) == {1.0}
    assert g.membership[1.0]["p000"] == {r.user_id for r in records}


def test_oracles_on_complete_bipartite():
    i, e = oracle_iterate(np.ones((3, 5)), -0.5, 7)
    assert i == [1.0] * 5 and e == [1.0] * 3
    f, q = fitness_complexity(np.ones((3, 5)), 7)
    assert f == [1.0] * 3 and q == [1.0] * 5


def test_oracle_size_guard():
    with pytest.raises(ValueError):
        oracle_iterate(np.ones((ORACLE_MAX_SIZE + 1, 2)), 0.0, 1)
