"""Sumcheck batch definitions shared by the prover and the verifier.

Each builder returns the member list (claim structure) for one batch, plus
the list of factor evaluations the prover must supply at the final point.
The prover additionally materializes factor tables; the verifier recomputes
kernel and public-table evaluations itself and sources everything else from
the supplied finals, so both sides evaluate the same member expressions.

Batches and domains:
  dp-bind (per side)   log d        <r, x> binding against the feature MLE
  HB (per side)        (pt, l, k)   sign/abs/limb identities
  RNG (per side)       (pt, l, k, j) limb range-lookup witness side
  RT (shared)          16 vars      range-lookup table side
  LN                   (h, l)       histograms, lookups, weights, harmonic
  LB                   (b, l)       squared-count auxiliaries
  V3                   (t, l)       validation histogram
  S-agg                l            table aggregation
  S1                   h            score normalization
  HARM-T               h            harmonic-lookup table side

Round-degree bounds are the product arity of each member's widest term; for
eq-kernel zero-checks this is one more than the bare constraint degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import EF, P, ef_scalar
from .mle import eq_eval, eq_table
from .params import PublicParams
from .sumcheck import Factor, Member, Ref, Term

ONE = EF.one()
ZERO = EF.zero()


def ef_tile(v: EF, reps: int) -> EF:
    return EF(np.tile(v.c0, reps), np.tile(v.c1, reps))


def ef_repeat(v: EF, reps: int) -> EF:
    return EF(np.repeat(v.c0, reps), np.repeat(v.c1, reps))


def bit_ref(name: str, chal: EF) -> Ref:
    """rho*s + (1-rho)*(1-s) as an affine image (2 rho - 1) s + (1 - rho)."""
    return Ref(name, alpha=chal + chal - ONE, beta=ONE - chal)


def lifted_mask(idx: np.ndarray, inner: int, outer: int) -> np.ndarray:
    """Support of a length-`inner` slice tiled across `outer` blocks."""
    return (np.arange(outer)[:, None] * inner + idx[None, :]).reshape(-1)


@dataclass
class BatchSpec:
    label: bytes
    num_vars: int
    members: list[Member]
    claim_names: list[str]
    supplied: list[str]
    factors: dict[str, Factor] | None = None  # prover side only

    @property
    def degree(self):
        return max(m.degree for m in self.members)


# -- hash binding -------------------------------------------------------------


def dp_bind_members(pp: PublicParams, side: str) -> list[Member]:
    return [Member(f"dpbind_{side}", [Term(ONE, [Ref("rfold"), Ref("xfold")])], degree=2)]


def hb_members(pp: PublicParams, side: str) -> list[Member]:
    lam2_16 = ef_scalar(1 << 16)
    lam2_32 = ef_scalar(1 << 32)
    sign_c = Member(
        f"hb_sign_{side}",
        [
            Term(ef_scalar(2), [Ref("eqz"), Ref("dp")]),
            Term(ONE, [Ref("eqz")]),
            Term(-ONE, [Ref("eqz"), Ref("s_half", alpha=ef_scalar(2), beta=-ONE), Ref("a1_half")]),
        ],
        degree=3,
    )
    boolean = Member(
        f"hb_bool_{side}",
        [Term(ONE, [Ref("eqz"), Ref("s_half"), Ref("s_half", alpha=-ONE, beta=ONE)])],
        degree=3,
    )
    limbs = Member(
        f"hb_limb_{side}",
        [
            Term(ONE, [Ref("eqz"), Ref("a1_half")]),
            Term(-ONE, [Ref("eqz")]),
            Term(-ONE, [Ref("eqz"), Ref("limb0")]),
            Term(-lam2_16, [Ref("eqz"), Ref("limb1")]),
            Term(-lam2_32, [Ref("eqz"), Ref("limb2")]),
        ],
        degree=3,
    )
    return [sign_c, boolean, limbs]


def rng_members(pp: PublicParams, beta_r: EF) -> list[Member]:
    range_zero = Member(
        "rng_inv",
        [
            Term(beta_r, [Ref("eqz"), Ref("rinv")]),
            Term(-ONE, [Ref("eqz"), Ref("rinv"), Ref("limb_full")]),
            Term(-ONE, [Ref("eqz")]),
        ],
        degree=3,
    )
    range_sum = Member("rng_sum", [Term(ONE, [Ref("rinv")])], degree=1)
    return [range_zero, range_sum]


def rt_members(pp: PublicParams, beta_r: EF) -> list[Member]:
    table_zero = Member(
        "rt_inv",
        [
            Term(beta_r, [Ref("eqz"), Ref("rinvt")]),
            Term(-ONE, [Ref("eqz"), Ref("rinvt"), Ref("tpub")]),
            Term(-ONE, [Ref("eqz"), Ref("rmult")]),
        ],
        degree=3,
    )
    table_sum = Member("rt_sum", [Term(ONE, [Ref("rinvt")])], degree=1)
    return [table_zero, table_sum]


# -- main (l, h) batch ---------------------------------------------------------


@dataclass
class MainChallenges:
    r_c: EF
    rho1: EF  # (b, l) point for the cnt target
    rho2: EF
    rho3: EF
    sigma: EF  # bucket challenge, depth coords
    rho4_l: EF
    rho5_l: EF
    rho6_l: EF
    rho_h: EF  # aggregation point
    beta_h: EF  # harmonic lookup point
    gamma_h: EF  # harmonic pair-compression
    rho_z: EF  # zero-check kernel over (h, l)
    rho_s1: EF
    rho_ht: EF


def ln_members(pp: PublicParams, ch: MainChallenges) -> list[Member]:
    k, c = pp.depth, pp.num_classes
    lam = ef_scalar(pp.lambda_scale)
    members = []

    def signs(chals: EF) -> list[Ref]:
        return [bit_ref(f"s{i}", chals[i]) for i in range(k)]

    members.append(
        Member("v1", [Term(ONE, [Ref("eql1")] + signs(ch.rho1[:k]))], degree=k + 1)
    )
    members.append(
        Member("v2", [Term(ONE, [Ref("eql2"), Ref("yfold")] + signs(ch.rho2[:k]))], degree=k + 2)
    )
    members.append(
        Member("v4m", [Term(ONE, [Ref("eql4"), Ref("mhat")] + signs(ch.sigma))], degree=k + 2)
    )
    members.append(
        Member("v5m", [Term(ONE, [Ref("eql5"), Ref("mchat_fold")] + signs(ch.sigma))], degree=k + 2)
    )
    members.append(
        Member("v6m", [Term(ONE, [Ref("eql6"), Ref("tchat_fold")] + signs(ch.sigma))], degree=k + 2)
    )
    members.append(
        Member(
            "z_edge",
            [
                Term(ONE, [Ref("eqz"), Ref("e"), Ref("w")]),
                Term(-lam, [Ref("eqz"), Ref("e"), Ref("mhat"), Ref("t_match")]),
            ],
            degree=4,
        )
    )
    not_e = Ref("e", alpha=-ONE, beta=ONE)
    members.append(
        Member(
            "z_interior",
            [
                Term(ONE, [Ref("eqz"), not_e, Ref("w"), Ref("dsq")]),
                Term(-ONE, [Ref("eqz"), not_e, Ref("wt_num")]),
            ],
            degree=4,
        )
    )
    members.append(
        Member("z_ebool", [Term(ONE, [Ref("eqz"), Ref("e"), not_e])], degree=3)
    )
    members.append(
        Member(
            "z_dinv",
            [
                Term(ONE, [Ref("eqz"), not_e, Ref("dsq"), Ref("d_inv")]),
                Term(-ONE, [Ref("eqz"), not_e]),
            ],
            degree=4,
        )
    )
    members.append(
        Member("z_ed", [Term(ONE, [Ref("eqz"), Ref("e"), Ref("dsq")])], degree=3)
    )
    members.append(
        Member(
            "z_dbind",
            [
                Term(ONE, [Ref("eqz"), Ref("dsq")]),
                Term(-ONE, [Ref("eqz"), Ref("mhat"), Ref("mhat", beta=-ONE)]),
            ],
            degree=3,
        )
    )
    tmatch_terms = [Term(ONE, [Ref("eqz"), Ref("t_match")])]
    for cc in range(c):
        tmatch_terms.append(Term(-ONE, [Ref("eqz"), Ref(f"y{cc}"), Ref(f"tchat{cc}")]))
    members.append(Member("z_tmatch", tmatch_terms, degree=3))

    wt_terms = [Term(ONE, [Ref("eqz"), Ref("wt_num")])]
    harm_l = Ref("harm", beta=-lam)
    for cc in range(c):
        y, tc, mc = Ref(f"y{cc}"), Ref(f"tchat{cc}"), Ref(f"mchat{cc}")
        wt_terms.append(Term(-ONE, [Ref("eqz"), y, tc, Ref("mhat", beta=-ONE), Ref("harm")]))
        wt_terms.append(Term(ONE, [Ref("eqz"), y, tc, Ref(f"mchat{cc}", beta=-ONE), harm_l]))
        wt_terms.append(Term(ONE, [Ref("eqz"), tc, mc, harm_l]))
        wt_terms.append(Term(-ONE, [Ref("eqz"), y, tc, mc, harm_l]))
    members.append(Member("z_wtnum", wt_terms, degree=5))

    members.append(
        Member(
            "z_harm",
            [
                Term(ch.beta_h, [Ref("eqz"), Ref("h_inv_w")]),
                Term(-ONE, [Ref("eqz"), Ref("h_inv_w"), Ref("mhat")]),
                Term(-ch.gamma_h, [Ref("eqz"), Ref("h_inv_w"), Ref("harm")]),
                Term(-ONE, [Ref("eqz")]),
            ],
            degree=3,
        )
    )
    members.append(Member("harm_wsum", [Term(ONE, [Ref("h_inv_w")])], degree=1))
    return members


LN_CLAIMS = [
    "c1", "c2", "t4", "t5", "t6",
    "zero", "zero", "zero", "zero", "zero", "zero", "zero", "zero", "zero",
    "s_wh",
]


def ln_supplied(pp: PublicParams) -> list[str]:
    names = ["mhat", "w", "dsq", "d_inv", "e", "wt_num", "t_match", "harm", "h_inv_w"]
    names += ["yfold", "mchat_fold", "tchat_fold"]
    names += [f"s{i}" for i in range(pp.depth)]
    for group in ("y", "mchat", "tchat"):
        names += [f"{group}{cc}" for cc in range(pp.num_classes)]
    return names


def lb_members(pp: PublicParams) -> list[Member]:
    return [
        Member("v4x", [Term(ONE, [Ref("eql4"), Ref("eqs"), Ref("cnt"), Ref("cnt")])], degree=4),
        Member(
            "v5x",
            [Term(ONE, [Ref("eql5"), Ref("eqs"), Ref("cnt"), Ref("cnt_tr_fold")])],
            degree=4,
        ),
        Member(
            "v6x",
            [Term(ONE, [Ref("eql6"), Ref("eqs"), Ref("cnt"), Ref("cnt_te_fold")])],
            degree=4,
        ),
    ]


def v3_members(pp: PublicParams, ch: MainChallenges) -> list[Member]:
    k = pp.depth
    signs = [bit_ref(f"ste{i}", ch.rho3[i]) for i in range(k)]
    return [Member("v3", [Term(ONE, [Ref("eql3"), Ref("yte_fold")] + signs)], degree=k + 2)]


def sagg_members(pp: PublicParams) -> list[Member]:
    return [Member("sagg", [Term(ONE, [Ref("w_rh")])], degree=1)]


def s1_members(pp: PublicParams) -> list[Member]:
    norm = ef_scalar(pp.lambda_scale % P * (pp.num_tables * pp.n_test) % P)
    return [
        Member(
            "s1",
            [
                Term(norm, [Ref("eqz"), Ref("svavg_pub")]),
                Term(-ONE, [Ref("eqz"), Ref("svsum_t")]),
            ],
            degree=2,
        )
    ]


def harm_table_members(pp: PublicParams, ch: MainChallenges) -> list[Member]:
    return [
        Member(
            "harm_t",
            [
                Term(ch.beta_h, [Ref("eqz"), Ref("h_inv_t")]),
                Term(-ONE, [Ref("eqz"), Ref("h_inv_t"), Ref("mpub")]),
                Term(-ch.gamma_h, [Ref("eqz"), Ref("h_inv_t"), Ref("hpub")]),
                Term(-ONE, [Ref("eqz"), Ref("h_mult")]),
            ],
            degree=3,
        ),
        Member("harm_tsum", [Term(ONE, [Ref("h_inv_t")])], degree=1),
    ]


# -- public evaluations ---------------------------------------------------------


def range_table_eval(point: EF) -> EF:
    """MLE of the identity table t[j] = j over 16 variables."""
    acc = ZERO
    for i in range(point.shape[0]):
        acc = acc + ef_scalar(1 << i) * point[i]
    return acc


def index_plus_one_eval(point: EF) -> EF:
    return range_table_eval(point) + ONE


class PublicTables:
    """Verifier-side evaluations of public data: projections and harmonic table."""

    def __init__(self, pp: PublicParams, projections: np.ndarray, harm_fixed: list[int]):
        self.pp = pp
        k_pad, ell, d = pp.k_pad, pp.num_tables, pp.dim
        table = np.zeros((k_pad, ell, d), dtype=np.int64)
        table[: pp.depth] = projections.transpose(1, 0, 2)
        from .field import encode_signed_vec

        self.r_table = EF.from_base(encode_signed_vec(table.reshape(-1)))
        self.harm_table = EF.from_base(
            np.array(harm_fixed[1 : pp.n_train + 1], dtype=np.uint64)
        )

    def r_eval(self, point: EF) -> EF:
        """MLE of the projection tensor, vars (j, l, k)."""
        from .mle import mle_eval_ef

        return mle_eval_ef(self.r_table, point)

    def harm_eval(self, point: EF) -> EF:
        from .mle import mle_eval_ef

        return mle_eval_ef(self.harm_table, point)
