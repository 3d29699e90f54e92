import random

import numpy as np
import pytest

from shapcert.field import EF, P, ef_scalar
from shapcert.mle import MLEOracle, eq_eval, eq_table, mle_eval_ef, point_concat, point_int

rng = random.Random(11)


def rand_point(n):
    return EF(
        np.array([rng.randrange(P) for _ in range(n)], dtype=np.uint64),
        np.array([rng.randrange(P) for _ in range(n)], dtype=np.uint64),
    )


def test_boolean_point_recovers_table_cell():
    vals = np.array([rng.randrange(P) for _ in range(16)], dtype=np.uint64)
    o = MLEOracle(4, vals)
    for idx in range(16):
        assert o.eval(point_int(idx, 4)) == ef_scalar(int(vals[idx]))


def test_constant_table_any_point():
    o = MLEOracle(3, np.full(8, 42, dtype=np.uint64))
    assert o.eval(rand_point(3)) == ef_scalar(42)


def test_one_var_linear_interpolation():
    a, b = 17, 99
    o = MLEOracle(1, np.array([a, b], dtype=np.uint64))
    r = rand_point(1)
    expect = ef_scalar(a) + r[0] * ef_scalar(b - a)
    assert o.eval(r) == expect


def test_dimension_mismatch_rejected():
    o = MLEOracle(2, np.zeros(4, dtype=np.uint64))
    with pytest.raises(ValueError):
        o.eval(rand_point(3))


def test_eq_indicator_on_cube():
    n = 4
    for _ in range(10):
        i = rng.randrange(16)
        j = rng.randrange(16)
        v = eq_eval(point_int(i, n), point_int(j, n))
        assert v == (EF.one() if i == j else EF.zero())


def test_eq_table_matches_eq_eval():
    r = rand_point(3)
    tab = eq_table(r)
    for b in range(8):
        assert tab[b] == eq_eval(r, point_int(b, 3))


def test_eq_table_normalization():
    for _ in range(100):
        n = rng.randrange(1, 7)
        tab = eq_table(rand_point(n))
        assert tab.sum() == EF.one()


def test_mle_eval_agrees_with_eq_weighted_sum():
    n = 5
    vals = np.array([rng.randrange(P) for _ in range(1 << n)], dtype=np.uint64)
    pt = rand_point(n)
    direct = mle_eval_ef(EF.from_base(vals), pt)
    weighted = (eq_table(pt) * EF.from_base(vals)).sum()
    assert direct == weighted


def test_support_mask_superset_enforced():
    vals = np.array([0, 5, 0, 7], dtype=np.uint64)
    MLEOracle(2, vals, support=np.array([1, 3]))
    MLEOracle(2, vals, support=np.array([0, 1, 3]))  # superset ok
    with pytest.raises(ValueError):
        MLEOracle(2, vals, support=np.array([1]))


def test_point_concat_orders_low_to_high():
    p = point_concat(point_int(1, 1), point_int(0, 1))
    assert p.shape == (2,)
    vals = np.array([0, 9, 0, 0], dtype=np.uint64)
    # index 1 has bit0=1, bit1=0
    assert MLEOracle(2, vals).eval(p) == ef_scalar(9)
