import random

import numpy as np
import pytest

from shapcert.field import EF, P, ef_scalar
from shapcert.mle import MLEOracle, eq_table, point_int
from shapcert.sumcheck import (
    BatchProver,
    Factor,
    Member,
    Ref,
    RoundError,
    Term,
    eval_member,
    lagrange_interp,
    member_sum,
    rlc_claims,
    sumcheck_prove,
    sumcheck_verify,
    verify_batch,
)
from shapcert.transcript import Transcript

rng = random.Random(99)


def rand_table(n):
    return np.array([rng.randrange(P) for _ in range(1 << n)], dtype=np.uint64)


def rand_ext(count=1):
    return EF(
        np.array([rng.randrange(P) for _ in range(count)], dtype=np.uint64),
        np.array([rng.randrange(P) for _ in range(count)], dtype=np.uint64),
    )


def single_factor_member(name="f"):
    return Member("m", [Term(EF.one(), [Ref(name)])], degree=1)


def run_roundtrip(n, members, tables, claims, degree):
    factors = {k: Factor(k, EF.from_base(v) if v.dtype == np.uint64 else v) for k, v in tables.items()}
    tp = Transcript()
    msgs, x_star, finals = sumcheck_prove(n, members, factors, tp)
    tv = Transcript()
    x_v, reduced = sumcheck_verify(n, degree, claims, msgs, tv)
    assert x_v == x_star
    total = EF.zero()
    for m in members:
        total = total + eval_member(m, finals)
    assert total == reduced
    return msgs, x_star, finals


def test_all_ones_table_n2():
    vals = np.ones(4, dtype=np.uint64)
    members = [single_factor_member()]
    run_roundtrip(2, members, {"f": vals}, [ef_scalar(4)], 1)


def test_product_of_two_factors_against_cube_sum():
    n = 3
    f = rand_table(n)
    g = rand_table(n)
    claim = ef_scalar(sum(int(a) * int(b) % P for a, b in zip(f, g)) % P)
    m = Member("fg", [Term(EF.one(), [Ref("f"), Ref("g")])], degree=2)
    run_roundtrip(n, [m], {"f": f, "g": g}, [claim], 2)


def test_zero_table_zero_messages():
    n = 3
    factors = {"f": Factor("f", EF.from_base(np.zeros(8, dtype=np.uint64)))}
    msgs, _, _ = sumcheck_prove(n, [single_factor_member()], factors, Transcript())
    for evals in msgs:
        assert all(e == EF.zero() for e in evals)


def test_claim_off_by_one_rejected_at_round_one():
    n = 2
    f = rand_table(n)
    claim = ef_scalar((sum(int(x) for x in f) + 1) % P)
    factors = {"f": Factor("f", EF.from_base(f))}
    msgs, _, _ = sumcheck_prove(n, [single_factor_member()], factors, Transcript())
    with pytest.raises(RoundError) as exc:
        sumcheck_verify(n, 1, [claim], msgs, Transcript())
    assert exc.value.round_index == 0


def test_mutated_round_message_rejected():
    n = 4
    f = rand_table(n)
    claim = ef_scalar(sum(int(x) for x in f) % P)
    for trial in range(25):
        factors = {"f": Factor("f", EF.from_base(f))}
        msgs, _, _ = sumcheck_prove(n, [single_factor_member()], factors, Transcript())
        r, k = rng.randrange(n), rng.randrange(2)
        bad = ef_scalar(rng.randrange(1, P))
        msgs[r][k] = msgs[r][k] + bad
        rejected = False
        try:
            _, reduced = sumcheck_verify(n, 1, [claim], msgs, Transcript())
            # final check: reduced claim vs true evaluation would also catch it
            rejected = reduced != MLEOracle(n, f).eval(_)
        except RoundError:
            rejected = True
        assert rejected


def test_rlc_batch_linearity():
    c1, c2 = rand_ext()[0], rand_ext()[0]
    b = [rand_ext()[0], rand_ext()[0]]
    assert rlc_claims([c1, c2], b) == b[0] * c1 + b[1] * c2
    assert rlc_claims([c1], [EF.one()]) == c1


def test_rlc_batch_two_members_roundtrip():
    n = 3
    f, g = rand_table(n), rand_table(n)
    s1 = ef_scalar(sum(int(x) for x in f) % P)
    s2 = ef_scalar(sum(int(x) * int(x) % P for x in g) % P)
    m1 = Member("sum_f", [Term(EF.one(), [Ref("f")])], degree=1)
    m2 = Member("sum_g2", [Term(EF.one(), [Ref("g"), Ref("g")])], degree=2)
    coeffs = [rand_ext()[0], rand_ext()[0]]
    factors = {"f": Factor("f", EF.from_base(f)), "g": Factor("g", EF.from_base(g))}
    prover = BatchProver(n, [m1, m2], coeffs, factors)
    msgs, x_star, finals = prover.prove(Transcript(), b"sc")
    x_v, reduced = verify_batch(n, 2, [s1, s2], coeffs, msgs, Transcript(), b"sc")
    assert x_v == x_star
    got = coeffs[0] * eval_member(m1, finals) + coeffs[1] * eval_member(m2, finals)
    assert got == reduced


def test_rlc_corrupt_member_rejected_randomized():
    n = 3
    rejections = 0
    trials = 60
    for _ in range(trials):
        f, g = rand_table(n), rand_table(n)
        s1 = ef_scalar(sum(int(x) for x in f) % P)
        s2 = ef_scalar(sum(int(x) for x in g) % P)
        g_bad = g.copy()
        g_bad[rng.randrange(1 << n)] = (int(g_bad[0]) + 1 + rng.randrange(100)) % P
        m1 = Member("a", [Term(EF.one(), [Ref("f")])], degree=1)
        m2 = Member("b", [Term(EF.one(), [Ref("g")])], degree=1)
        seed_t = Transcript()
        seed_t.absorb(b"seed", rng.randrange(2**63).to_bytes(8, "little"))
        coeffs = list(seed_t.challenge_ext(b"beta", 2))
        factors = {"f": Factor("f", EF.from_base(f)), "g": Factor("g", EF.from_base(g_bad))}
        msgs, _, _ = BatchProver(n, [m1, m2], coeffs, factors).prove(seed_t.clone(), b"sc")
        try:
            verify_batch(n, 1, [s1, s2], coeffs, msgs, seed_t.clone(), b"sc")
        except RoundError:
            rejections += 1
    assert rejections == trials


def zero_check_members(constraint_refs, degree, kernel_name="eqz"):
    terms = [Term(EF.one(), [Ref(kernel_name)] + refs) for refs in constraint_refs]
    return Member("zc", terms, degree=degree)


def test_zero_check_identically_zero_accepts():
    # constraint e*(1-e) on a boolean table
    n = 3
    e = np.array([rng.randrange(2) for _ in range(8)], dtype=np.uint64)
    t_ch = Transcript()
    rho = t_ch.challenge_ext(b"rho", n)
    kernel = eq_table(rho)
    member = Member(
        "bool",
        [Term(EF.one(), [Ref("eqz"), Ref("e"), Ref("e", alpha=ef_scalar(P - 1), beta=EF.one())])],
        degree=3,
    )
    factors = {"eqz": Factor("eqz", kernel), "e": Factor("e", EF.from_base(e))}
    msgs, x_star, finals = sumcheck_prove(n, [member], factors, t_ch.clone(), b"zc")
    t_v = Transcript()
    rho_v = t_v.challenge_ext(b"rho", n)
    x_v, reduced = sumcheck_verify(n, 3, [EF.zero()], msgs, t_v, b"zc")
    assert reduced == eval_member(member, finals)


def test_zero_check_single_nonzero_point_rejected():
    # nonzero at exactly one cube point; randomized over 1000 seeded runs
    n = 4
    rejections = 0
    for trial in range(1000):
        vals = np.zeros(1 << n, dtype=np.uint64)
        vals[rng.randrange(1 << n)] = rng.randrange(1, P)
        t_ch = Transcript()
        t_ch.absorb(b"trial", trial.to_bytes(4, "little"))
        rho = t_ch.challenge_ext(b"rho", n)
        kernel = eq_table(rho)
        member = Member("zc", [Term(EF.one(), [Ref("eqz"), Ref("f")])], degree=2)
        factors = {"eqz": Factor("eqz", kernel), "f": Factor("f", EF.from_base(vals))}
        msgs, _, _ = sumcheck_prove(n, [member], factors, t_ch.clone(), b"zc")
        t_v = Transcript()
        t_v.absorb(b"trial", trial.to_bytes(4, "little"))
        t_v.challenge_ext(b"rho", n)
        try:
            verify_batch(n, 2, [EF.zero()], [EF.one()], msgs, t_v, b"zc")
        except RoundError:
            rejections += 1
    assert rejections == 1000


def test_affine_refs_match_manual_expansion():
    n = 2
    f = rand_table(n)
    alpha, beta = rand_ext()[0], rand_ext()[0]
    expected = EF.zero()
    for x in f:
        expected = expected + (alpha * ef_scalar(int(x)) + beta)
    m = Member("aff", [Term(EF.one(), [Ref("f", alpha=alpha, beta=beta)])], degree=1)
    factors = {"f": Factor("f", EF.from_base(f))}
    assert member_sum(m, factors) == expected


def test_lagrange_interp_reproduces_polynomial():
    # degree-3 polynomial evaluated at 0..3, interpolated at random x
    coeffs = [rand_ext()[0] for _ in range(4)]

    def poly(x):
        acc = EF.zero()
        xp = EF.one()
        for c in coeffs:
            acc = acc + c * xp
            xp = xp * x
        return acc

    evals = [poly(ef_scalar(k)) for k in range(4)]
    for _ in range(5):
        x = rand_ext()[0]
        assert lagrange_interp(evals, x) == poly(x)


def test_degree_bound_asserted():
    m = Member("bad", [Term(EF.one(), [Ref("f"), Ref("f")])], degree=1)
    with pytest.raises(ValueError):
        m.check_degree()


# -- sparsity path ----------------------------------------------------------


def sparse_instance(n, density, trial):
    size = 1 << n
    vals = np.zeros(size, dtype=np.uint64)
    k = max(1, int(size * density))
    idx = rng.sample(range(size), k)
    for i in idx:
        vals[i] = rng.randrange(1, P)
    return vals, np.array(sorted(idx), dtype=np.int64)


def test_sparse_dense_transcripts_identical_100_seeds():
    n = 6
    for trial in range(100):
        vals, mask = sparse_instance(n, 1 / 16, trial)
        g = rand_table(n)
        member = Member("hist", [Term(EF.one(), [Ref("h"), Ref("g")])], degree=2)
        t0 = Transcript()
        t0.absorb(b"trial", trial.to_bytes(4, "little"))
        dense_factors = {"h": Factor("h", EF.from_base(vals)), "g": Factor("g", EF.from_base(g))}
        msgs_d, xd, fd = BatchProver(n, [member], [EF.one()], dense_factors).prove(t0.clone(), b"s")
        sparse_factors = {
            "h": Factor("h", EF.from_base(vals), mask=mask),
            "g": Factor("g", EF.from_base(g)),
        }
        msgs_s, xs, fs = BatchProver(n, [member], [EF.one()], sparse_factors).prove(t0.clone(), b"s")
        assert [[e.to_bytes() for e in r] for r in msgs_d] == [[e.to_bytes() for e in r] for r in msgs_s]
        assert xd == xs
        assert fd["h"] == fs["h"] and fd["g"] == fs["g"]


def test_empty_support_mask_zero_messages():
    n = 4
    vals = np.zeros(1 << n, dtype=np.uint64)
    member = single_factor_member("h")
    factors = {"h": Factor("h", EF.from_base(vals), mask=np.array([], dtype=np.int64))}
    msgs, _, _ = BatchProver(n, [member], [EF.one()], factors).prove(Transcript(), b"s")
    assert all(e == EF.zero() for r in msgs for e in r)


def test_sparse_uses_fewer_multiplications():
    from shapcert.field import OpCounter, set_counter

    n = 10
    vals, mask = sparse_instance(n, 1 / 16, 0)
    g = rand_table(n)
    member = Member("hist", [Term(EF.one(), [Ref("h"), Ref("g")])], degree=2)

    def count(factors):
        ctr = OpCounter()
        set_counter(ctr)
        try:
            BatchProver(n, [member], [EF.one()], factors).prove(Transcript(), b"s")
        finally:
            set_counter(None)
        return ctr.muls

    dense = count({"h": Factor("h", EF.from_base(vals)), "g": Factor("g", EF.from_base(g))})
    sparse = count(
        {"h": Factor("h", EF.from_base(vals), mask=mask), "g": Factor("g", EF.from_base(g))}
    )
    assert sparse < dense
