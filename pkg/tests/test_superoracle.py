import random

import numpy as np

from shapcert.field import EF, P, ef_scalar
from shapcert.mle import MLEOracle, point_concat, point_int
from shapcert.superoracle import pack_family, recovery_value, verify_recovery
from shapcert.transcript import Transcript

rng = random.Random(5)


def rand_oracle(n):
    return MLEOracle(n, np.array([rng.randrange(P) for _ in range(1 << n)], dtype=np.uint64))


def rand_point(n):
    return EF(
        np.array([rng.randrange(P) for _ in range(n)], dtype=np.uint64),
        np.array([rng.randrange(P) for _ in range(n)], dtype=np.uint64),
    )


def test_single_member_family_is_itself():
    f = rand_oracle(3)
    packed = pack_family([f])
    assert packed.num_vars == 3
    assert np.array_equal(packed.values, f.values)


def test_two_member_interpolation():
    f0, f1 = rand_oracle(2), rand_oracle(2)
    packed = pack_family([f0, f1])
    x = rand_point(2)
    r = rand_point(1)
    one = EF.one()
    expect = (one - r[0]) * f0.eval(x) + r[0] * f1.eval(x)
    assert packed.eval(point_concat(x, r)) == expect


def test_padding_slice_is_zero():
    fam = [rand_oracle(2) for _ in range(3)]
    packed = pack_family(fam)
    assert packed.num_vars == 4
    x = rand_point(2)
    assert packed.eval(point_concat(x, point_int(3, 2))) == EF.zero()


def test_boolean_index_recovers_member():
    fam = [rand_oracle(3) for _ in range(4)]
    packed = pack_family(fam)
    x = rand_point(3)
    for j, f in enumerate(fam):
        assert packed.eval(point_concat(x, point_int(j, 2))) == f.eval(x)


def test_honest_recovery_accepts_any_r():
    for q_real in (1, 2, 3, 4):
        fam = [rand_oracle(2) for _ in range(q_real)]
        packed = pack_family(fam)
        q = 1 << (packed.num_vars - 2)
        x = rand_point(2)
        values = [fam[j].eval(x) if j < q_real else EF.zero() for j in range(q)]
        r = rand_point(packed.num_vars - 2)
        opened = packed.eval(point_concat(x, r))
        assert verify_recovery(opened, r, values)


def test_q1_degenerates_to_direct_equality():
    f = rand_oracle(2)
    packed = pack_family([f])
    x = rand_point(2)
    v = f.eval(x)
    assert recovery_value(EF.zero((0,)), [v]) == v


def test_honest_recovery_matches_unbatched_openings():
    fam = [rand_oracle(3) for _ in range(8)]
    packed = pack_family(fam)
    x = rand_point(3)
    unbatched = [f.eval(x) for f in fam]
    packed_vals = [packed.eval(point_concat(x, point_int(j, 3))) for j in range(8)]
    assert packed_vals == unbatched


def test_tampered_value_rejected_999_of_1000():
    for q in (4, 16, 32):
        log_q = q.bit_length() - 1
        fam = [rand_oracle(2) for _ in range(q)]
        packed = pack_family(fam)
        x = rand_point(2)
        honest = [f.eval(x) for f in fam]
        rejections = 0
        trials = 1000
        for trial in range(trials):
            t = Transcript()
            t.absorb(b"trial", trial.to_bytes(4, "little") + q.to_bytes(4, "little"))
            r = t.challenge_ext(b"r", log_q)
            values = list(honest)
            j = rng.randrange(q)
            values[j] = values[j] + ef_scalar(rng.randrange(1, P))
            opened = packed.eval(point_concat(x, r))
            if not verify_recovery(opened, r, values):
                rejections += 1
        assert rejections >= 999, f"Q={q}: only {rejections}/1000 rejections"
