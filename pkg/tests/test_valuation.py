import random
from fractions import Fraction

import numpy as np
import pytest

from shapcert.valuation import (
    HarmonicTable,
    HashParams,
    QuantizedDataset,
    RationalScore,
    brute_force_bucket_shapley,
    brute_force_knn_shapley,
    bucket_statistics,
    bucket_weight_tensors,
    gaussian_projections,
    knn_shapley_baseline,
    lsh_shapley,
    phi_closed_form,
    phi_fixed,
    quantize_features,
    simhash_assign,
)
from shapcert.field import P

rng = random.Random(2024)


def toy_instance():
    """K=1, L=1, d=2 hand-traceable instance; projection forced to (s_r, 0)."""
    train = QuantizedDataset.from_raw(
        np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]]), [0, 1, 0], num_classes=2
    )
    val = QuantizedDataset.from_raw(np.array([[1.0, 0.0]]), [0], num_classes=2)
    h = HashParams(1, 1, seed=0, dim=2)
    h.projections = np.array([[[h.scale, 0]]], dtype=np.int64)
    return train, val, h


# -- harmonic table -----------------------------------------------------------


def test_harmonic_first_entry_is_scale():
    ht = HarmonicTable(4, scale=1 << 12)
    assert ht.fixed[1] == 1 << 12


def test_harmonic_h2_exact_when_scale_even():
    ht = HarmonicTable(4, scale=1 << 12)
    assert ht.fixed[2] == 3 * (1 << 12) // 2


def test_harmonic_h3_rational():
    ht = HarmonicTable(4)
    assert ht.exact[3] == Fraction(11, 6)


def test_harmonic_monotone_and_close():
    ht = HarmonicTable(64)
    for m in range(1, 64):
        assert ht.fixed[m + 1] > ht.fixed[m]
        assert abs(Fraction(ht.fixed[m], ht.scale) - ht.exact[m]) <= Fraction(1, 2 * ht.scale)


# -- closed form vs enumeration oracle ----------------------------------------


def test_singleton_same_label_is_one():
    ht = HarmonicTable(4)
    assert phi_closed_form(1, 1, True, ht).as_fraction() == 1


def test_m2_pair_cases_match_oracle():
    ht = HarmonicTable(4)
    assert phi_closed_form(2, 2, True, ht).as_fraction() == Fraction(1, 2)
    assert phi_closed_form(2, 1, False, ht).as_fraction() == Fraction(-1, 4)
    scores = brute_force_bucket_shapley([0, 1], 0)
    assert scores[0].as_fraction() == Fraction(3, 4)
    assert scores[1].as_fraction() == Fraction(-1, 4)


def test_closed_form_equals_oracle_all_m_to_10():
    ht = HarmonicTable(10)
    for m in range(1, 11):
        for m_plus in range(0, m + 1):
            labels = [0] * m_plus + [1] * (m - m_plus)
            oracle = brute_force_bucket_shapley(labels, 0)
            if m_plus >= 1:
                expect = phi_closed_form(m, m_plus, True, ht).as_fraction()
                for j in range(m_plus):
                    assert oracle[j].as_fraction() == expect
            if m_plus < m:
                expect = phi_closed_form(m, m_plus, False, ht).as_fraction()
                for j in range(m_plus, m):
                    assert oracle[j].as_fraction() == expect


def test_efficiency_telescopes():
    ht = HarmonicTable(10)
    for m in range(1, 11):
        for m_plus in range(0, m + 1):
            total = Fraction(0)
            if m_plus:
                total += m_plus * phi_closed_form(m, m_plus, True, ht).as_fraction()
            if m - m_plus:
                total += (m - m_plus) * phi_closed_form(m, m_plus, False, ht).as_fraction()
            assert total == Fraction(m_plus, m)
            # fixed-point variant telescopes identically
            total_fx = Fraction(0)
            if m_plus:
                total_fx += m_plus * phi_fixed(m, m_plus, True, ht)
            if m - m_plus:
                total_fx += (m - m_plus) * phi_fixed(m, m_plus, False, ht)
            assert total_fx == Fraction(m_plus, m)


def test_spot_example_m3():
    ht = HarmonicTable(4)
    pos = phi_closed_form(3, 2, True, ht).as_fraction()
    neg = phi_closed_form(3, 2, False, ht).as_fraction()
    assert 2 * pos + neg == Fraction(2, 3)


def test_sign_and_monotonicity_to_64():
    ht = HarmonicTable(64)
    for variant in ("exact", "fixed"):
        get = (
            (lambda m, mp, s: phi_closed_form(m, mp, s, ht).as_fraction())
            if variant == "exact"
            else (lambda m, mp, s: phi_fixed(m, mp, s, ht))
        )
        for m in range(2, 65):
            prev_pos, prev_neg = None, None
            for m_plus in range(0, m + 1):
                if m_plus >= 1:
                    pos = get(m, m_plus, True)
                    assert pos >= Fraction(1, m)
                    if prev_pos is not None:
                        assert pos <= prev_pos
                    prev_pos = pos
                neg = get(m, m_plus, False) if m_plus <= m else None
                if neg is not None:
                    assert neg <= 0
                    if prev_neg is not None:
                        assert neg <= prev_neg
                    prev_neg = neg
                if m_plus >= 1:
                    assert get(m, m_plus, True) - get(m, m_plus, False) > 0


def test_domain_errors():
    ht = HarmonicTable(4)
    with pytest.raises(ValueError):
        phi_closed_form(0, 0, False, ht)
    with pytest.raises(ValueError):
        phi_closed_form(3, 4, True, ht)
    with pytest.raises(ValueError):
        phi_closed_form(3, 0, True, ht)
    with pytest.raises(ValueError):
        brute_force_bucket_shapley([0] * 21, 0)


def test_oracle_singleton():
    assert brute_force_bucket_shapley([0], 0)[0].as_fraction() == 1
    assert brute_force_bucket_shapley([0, 0], 0) == [
        RationalScore(1, 2),
        RationalScore(1, 2),
    ]


# -- hashing -------------------------------------------------------------------


def test_simhash_sign_rules():
    data = QuantizedDataset.from_raw(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]), [0, 0, 0], 1)
    h = HashParams(1, 1, seed=3, dim=2)
    h.projections = np.array([[[h.scale, 0]]], dtype=np.int64)
    ids = simhash_assign(data, h)
    assert ids[0].tolist() == [1, 0, 1]  # zero dot product takes the positive branch


def test_projections_deterministic():
    a = gaussian_projections(42, 2, 3, 4, 1 << 12)
    b = gaussian_projections(42, 2, 3, 4, 1 << 12)
    assert np.array_equal(a, b)
    c = gaussian_projections(43, 2, 3, 4, 1 << 12)
    assert not np.array_equal(a, c)


def test_quantize_rejects_unnormalized():
    with pytest.raises(ValueError):
        quantize_features(np.array([[1.5, 0.0]]))
    assert quantize_features(np.array([[1.0, -1.0, 0.5]]), 4096).tolist() == [[4096, -4096, 2048]]


def test_bucket_statistics_hand_trace():
    train, val, h = toy_instance()
    stats = bucket_statistics(train, val, h)
    assert stats.cnt[0].tolist() == [1, 2]
    assert stats.train_buckets[0].tolist() == [1, 0, 1]
    assert stats.val_buckets[0].tolist() == [1]
    assert stats.cnt[0].sum() == train.n
    assert np.array_equal(stats.cnt_tr.sum(axis=2), stats.cnt)


def test_bucket_statistics_empty_val():
    train, val, h = toy_instance()
    empty = QuantizedDataset(np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), 2)
    stats = bucket_statistics(train, empty, h)
    assert stats.cnt_te.sum() == 0
    assert stats.cnt[0].sum() == 3


def test_weight_tensors_hand_trace():
    train, val, h = toy_instance()
    ht = HarmonicTable(3)
    stats = bucket_statistics(train, val, h)
    wt = bucket_weight_tensors(stats, train.labels, ht)
    assert wt.mhat[0].tolist() == [2, 1, 2]
    assert wt.t_match[0].tolist() == [1, 0, 1]
    assert wt.edge[0].tolist() == [0, 1, 0]
    assert wt.denom[0].tolist() == [2, 0, 2]


# -- plaintext pipeline --------------------------------------------------------


def test_lsh_shapley_hand_trace():
    train, val, h = toy_instance()
    ht = HarmonicTable(3)
    res = lsh_shapley(train, val, h, ht)
    assert [s.as_fraction() for s in res.svavg] == [Fraction(1, 2), 0, Fraction(1, 2)]


def test_lsh_shapley_empty_val_rejected():
    train, val, h = toy_instance()
    empty = QuantizedDataset(np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), 2)
    ht = HarmonicTable(3)
    with pytest.raises(ValueError):
        lsh_shapley(train, empty, h, ht)


def random_instance(seed, n=16, t=8, d=4, c=2, lt=2, k=3):
    r = np.random.default_rng(seed)
    x = r.normal(size=(n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    xv = r.normal(size=(t, d))
    xv /= np.linalg.norm(xv, axis=1, keepdims=True)
    train = QuantizedDataset.from_raw(x, r.integers(0, c, n), num_classes=c)
    val = QuantizedDataset.from_raw(xv, r.integers(0, c, t), num_classes=c)
    h = HashParams(lt, k, seed=seed, dim=d)
    return train, val, h


def test_doubling_validation_leaves_scores_unchanged():
    train, val, h = random_instance(7)
    ht = HarmonicTable(train.n)
    base = lsh_shapley(train, val, h, ht)
    doubled = QuantizedDataset(
        np.concatenate([val.features, val.features]),
        np.concatenate([val.labels, val.labels]),
        val.num_classes,
        raw=np.concatenate([val.raw, val.raw]),
    )
    res = lsh_shapley(train, doubled, h, ht)
    assert [s.as_fraction() for s in res.svavg] == [s.as_fraction() for s in base.svavg]


def test_table_linearity():
    train, val, _ = random_instance(13)
    ht = HarmonicTable(train.n)
    l_total = 4
    h_all = HashParams(l_total, 3, seed=5, dim=train.dim)
    combined = lsh_shapley(train, val, h_all, ht)
    acc = [Fraction(0)] * train.n
    for l in range(l_total):
        h_one = HashParams(1, 3, seed=5, dim=train.dim)
        h_one.projections = h_all.projections[l : l + 1]
        single = lsh_shapley(train, val, h_one, ht)
        for i, s in enumerate(single.svavg):
            acc[i] += s.as_fraction()
    for i in range(train.n):
        assert combined.svavg[i].as_fraction() == acc[i] / l_total


def test_dummy_property_random_instances():
    # a training point sharing no bucket with any validation point scores 0
    checked = 0
    for seed in range(40):
        train, val, h = random_instance(seed)
        ht = HarmonicTable(train.n)
        stats = bucket_statistics(train, val, h)
        res = lsh_shapley(train, val, h, ht)
        occupied = [set(stats.val_buckets[l].tolist()) for l in range(h.num_tables)]
        for i in range(train.n):
            if all(stats.train_buckets[l, i] not in occupied[l] for l in range(h.num_tables)):
                assert res.svavg[i].as_fraction() == 0
                checked += 1
    assert checked > 5


def test_symmetry_equal_stats_equal_scores():
    # two same-label points in the same buckets of every table score identically
    train, val, h = toy_instance()
    ht = HarmonicTable(3)
    res = lsh_shapley(train, val, h, ht)
    assert res.svavg[0] == res.svavg[2]


def test_exact_and_fixed_variants_agree_on_exact_cases():
    # M+ == M buckets give lambda-exact weights, so variants coincide
    train, val, h = toy_instance()
    ht = HarmonicTable(3)
    fixed = lsh_shapley(train, val, h, ht, harmonic="fixed")
    exact = lsh_shapley(train, val, h, ht, harmonic="exact")
    assert [s.as_fraction() for s in fixed.svavg] == [s.as_fraction() for s in exact.svavg]


def test_svsum_is_scaled_svavg():
    train, val, h = random_instance(3)
    ht = HarmonicTable(train.n)
    res = lsh_shapley(train, val, h, ht)
    norm = h.num_tables * val.n
    for s, tot in zip(res.svavg, res.svsum):
        assert s.as_fraction() * norm == tot


def test_field_encoding_consistency():
    s = RationalScore(-3, 4)
    enc = s.field_encoding()
    assert enc == (P - 3) * pow(4, P - 2, P) % P


# -- KNN baseline ---------------------------------------------------------------


def test_knn_single_point():
    train = QuantizedDataset.from_raw(np.array([[1.0, 0.0]]), [0], 2)
    val = QuantizedDataset.from_raw(np.array([[0.0, 1.0]]), [0], 2)
    assert knn_shapley_baseline(train, val, 1)[0] == 1.0
    assert brute_force_knn_shapley(train, val, 1)[0] == 1.0


def test_knn_two_points_matches_enumeration():
    train = QuantizedDataset.from_raw(np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 1], 2)
    val = QuantizedDataset.from_raw(np.array([[0.8, 0.6]]), [0], 2)
    rec = knn_shapley_baseline(train, val, 1)
    enum = brute_force_knn_shapley(train, val, 1)
    assert np.allclose(rec, enum, atol=1e-9)


def test_knn_recurrence_matches_enumeration_random():
    for seed in range(6):
        r = np.random.default_rng(seed)
        n = 8
        x = r.normal(size=(n, 3))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        xv = r.normal(size=(2, 3))
        xv /= np.linalg.norm(xv, axis=1, keepdims=True)
        train = QuantizedDataset.from_raw(x, r.integers(0, 2, n), 2)
        val = QuantizedDataset.from_raw(xv, r.integers(0, 2, 2), 2)
        for k in (1, 3):
            rec = knn_shapley_baseline(train, val, k)
            enum = brute_force_knn_shapley(train, val, k)
            assert np.allclose(rec, enum, atol=1e-9), f"seed={seed} k={k}"


def test_knn_order_invariance():
    train, val, _ = random_instance(21, n=10)
    perm = np.random.default_rng(0).permutation(10)
    shuffled = QuantizedDataset(
        train.features[perm], train.labels[perm], train.num_classes, raw=train.raw[perm]
    )
    a = knn_shapley_baseline(train, val, 3)
    b = knn_shapley_baseline(shuffled, val, 3)
    assert np.allclose(a[perm], b, atol=1e-12)


def test_knn_k_bounds():
    train, val, _ = random_instance(2, n=8)
    with pytest.raises(ValueError):
        knn_shapley_baseline(train, val, 9)
    with pytest.raises(ValueError):
        knn_shapley_baseline(train, val, 0)
