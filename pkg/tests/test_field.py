import random

import numpy as np
import pytest

from shapcert.field import (
    EF,
    P,
    EXT_NONRESIDUE,
    OpCounter,
    as_fvec,
    batch_inverse,
    ef_scalar,
    f_inv,
    gl_add,
    gl_inv,
    gl_mul,
    gl_neg,
    gl_sub,
    set_counter,
)

rng = random.Random(0x5eed)


def rand_elems(n):
    return np.array([rng.randrange(P) for _ in range(n)], dtype=np.uint64)


def test_add_sub_mul_against_python_ints():
    a = rand_elems(4096)
    b = rand_elems(4096)
    ai = a.tolist()
    bi = b.tolist()
    assert gl_add(a, b).tolist() == [(x + y) % P for x, y in zip(ai, bi)]
    assert gl_sub(a, b).tolist() == [(x - y) % P for x, y in zip(ai, bi)]
    assert gl_mul(a, b).tolist() == [x * y % P for x, y in zip(ai, bi)]
    assert gl_neg(a).tolist() == [(-x) % P for x in ai]


def test_mul_edge_values():
    edge = [0, 1, 2, P - 1, P - 2, 2**32, 2**32 - 1, 2**63, 2**64 % P, 0xFFFFFFFF00000000]
    a = np.array(edge, dtype=np.uint64)
    for y in edge:
        b = np.full(len(edge), y, dtype=np.uint64)
        assert gl_mul(a, b).tolist() == [x * y % P for x in edge]


def test_wraparound_at_modulus():
    assert int(gl_add(np.uint64(P - 1), np.uint64(1))) == 0


def test_inverse_identity():
    assert f_inv(2) * 2 % P == 1
    a = rand_elems(64)
    inv = gl_inv(a)
    assert gl_mul(a, inv).tolist() == [1] * 64


def test_inverse_of_zero_raises():
    with pytest.raises(ZeroDivisionError):
        f_inv(0)
    with pytest.raises(ZeroDivisionError):
        gl_inv(np.array([3, 0], dtype=np.uint64))
    with pytest.raises(ZeroDivisionError):
        batch_inverse([5, 0])


def test_batch_inverse_matches_scalar():
    vals = [rng.randrange(1, P) for _ in range(37)]
    assert batch_inverse(vals) == [f_inv(v) for v in vals]


def test_field_axioms_randomized():
    n = 10_000
    a, b, c = rand_elems(n), rand_elems(n), rand_elems(n)
    assert np.array_equal(gl_mul(gl_mul(a, b), c), gl_mul(a, gl_mul(b, c)))
    assert np.array_equal(gl_add(gl_add(a, b), c), gl_add(a, gl_add(b, c)))
    assert np.array_equal(gl_mul(a, gl_add(b, c)), gl_add(gl_mul(a, b), gl_mul(a, c)))


def test_ext_definition():
    x = ef_scalar(0, 1)
    sq = x * x
    assert sq == ef_scalar(EXT_NONRESIDUE, 0)


def test_ext_inverse_identity():
    for _ in range(50):
        a = ef_scalar(rng.randrange(P), rng.randrange(P))
        if a.is_zero():
            continue
        assert a * a.inv() == EF.one()


def test_ext_base_embedding_homomorphism():
    for _ in range(20):
        c0, d0 = rng.randrange(P), rng.randrange(P)
        assert ef_scalar(c0) * ef_scalar(d0) == ef_scalar(c0 * d0 % P)
        assert ef_scalar(c0) + ef_scalar(d0) == ef_scalar((c0 + d0) % P)


def test_ext_axioms_randomized():
    n = 10_000
    mk = lambda: EF(rand_elems(n), rand_elems(n))
    a, b, c = mk(), mk(), mk()
    assert ((a * b) * c) == (a * (b * c))
    assert (a * (b + c)) == (a * b + a * c)
    assert (a * b) == (b * a)


def test_nonresidue_property():
    assert pow(EXT_NONRESIDUE, (P - 1) // 2, P) == P - 1


def test_ext_serialization_roundtrip():
    v = EF(rand_elems(9), rand_elems(9))
    assert EF.from_bytes(v.to_bytes(), shape=(9,)) == v
    with pytest.raises(ValueError):
        EF.from_bytes(np.array([P, 0], dtype="<u8").tobytes())


def test_op_counter_counts_elements():
    ctr = OpCounter()
    set_counter(ctr)
    try:
        gl_mul(rand_elems(100), rand_elems(100))
    finally:
        set_counter(None)
    assert ctr.muls == 100


def test_as_fvec_negative_embedding():
    assert as_fvec([-1]).tolist() == [P - 1]
