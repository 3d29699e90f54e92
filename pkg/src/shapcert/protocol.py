"""Non-interactive prover and verifier for the valuation certificate.

The proof is one byte stream laid out in the exact order the Fiat-Shamir
transcript consumes it:

  header    magic, version, hash id, public-parameter echo
  sect 1    provider / buyer / operator / score-slice commitments
  sect 2    the released per-point scores (field elements)
  sect 3    hash binding: dot-product binding, sign constraints, range lookups
  sect 4    histogram, lookup, weight and aggregation sumchecks
            (one (h,l)-domain RLC batch, one (b,l) batch, V3 / S-agg / S1 /
            harmonic-table checks standalone)
  sect 5    packed-family value blocks with their recovery openings
  sect 6    all remaining evaluation openings
  sect 7    input- and output-side reconstruction against per-provider
            commitments

verify() replays the transcript from public data only; the first failing
check aborts with its (section, check) tag.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .circuits import (
    LN_CLAIMS,
    MainChallenges,
    PublicTables,
    BatchSpec,
    bit_ref,
    dp_bind_members,
    ef_repeat,
    ef_tile,
    harm_table_members,
    hb_members,
    index_plus_one_eval,
    lb_members,
    lifted_mask,
    ln_members,
    ln_supplied,
    range_table_eval,
    rng_members,
    rt_members,
    s1_members,
    sagg_members,
    v3_members,
)
from .field import EF, OpCounter, P, ef_scalar, set_counter
from .mle import MLEOracle, eq_eval, eq_table, mle_eval_ef, point_concat, point_int
from .params import PublicParams
from .pcs import (
    CommitmentDigest,
    OpeningProof,
    pcs_commit,
    pcs_open,
    pcs_setup,
    pcs_verify_opening,
)
from .sumcheck import BatchProver, Factor, Member, RoundError, eval_member, verify_batch
from .superoracle import recovery_value
from .transcript import HASH_ID, Transcript
from .valuation import HarmonicTable, gaussian_projections
from .witness import OracleSet, ProviderPartition

MAGIC = b"ZKVL"
ONE = EF.one()
ZERO = EF.zero()

WAVE1_ORACLES = [
    "x_tr", "x_te", "dp_tr", "dp_te", "pre_tr", "pre_te", "limb_tr", "limb_te",
    "cnt", "cnt_tr", "cnt_te", "mhat", "mchat", "tchat", "harm", "e", "dsq",
    "d_inv", "w", "wt_num", "t_match", "y_ind", "y_te_ind", "h_mult", "rmult16",
    "svsum", "svavg",
]
WAVE2_ORACLES = ["rinv_tr", "rinv_te", "rinvt16", "h_inv_w", "h_inv_t"]


def oracle_num_vars(pp: PublicParams) -> dict[str, int]:
    nv_pre_tr = pp.log_n + pp.log_l + pp.log_k
    nv_pre_te = pp.log_t + pp.log_l + pp.log_k
    out = {
        "x_tr": pp.log_d + pp.log_n + 1,
        "x_te": pp.log_d + pp.log_t + 1,
        "dp_tr": nv_pre_tr,
        "dp_te": nv_pre_te,
        "pre_tr": nv_pre_tr + 1,
        "pre_te": nv_pre_te + 1,
        "limb_tr": nv_pre_tr + 2,
        "limb_te": nv_pre_te + 2,
        "cnt": pp.depth + pp.log_l,
        "cnt_tr": pp.depth + pp.log_l + pp.log_c,
        "cnt_te": pp.depth + pp.log_l + pp.log_c,
        "mhat": pp.log_n + pp.log_l,
        "mchat": pp.log_n + pp.log_l + pp.log_c,
        "tchat": pp.log_n + pp.log_l + pp.log_c,
        "harm": pp.log_n + pp.log_l,
        "e": pp.log_n + pp.log_l,
        "dsq": pp.log_n + pp.log_l,
        "d_inv": pp.log_n + pp.log_l,
        "w": pp.log_n + pp.log_l,
        "wt_num": pp.log_n + pp.log_l,
        "t_match": pp.log_n + pp.log_l,
        "y_ind": pp.log_n + pp.log_c,
        "y_te_ind": pp.log_t + pp.log_c,
        "h_mult": pp.log_n,
        "rmult16": 16,
        "svsum": pp.log_n,
        "svavg": pp.log_n,
        "rinv_tr": nv_pre_tr + 2,
        "rinv_te": nv_pre_te + 2,
        "rinvt16": 16,
        "h_inv_w": pp.log_n + pp.log_l,
        "h_inv_t": pp.log_n,
        "shard": pp.log_d + pp.log_slice + 1,
        "slice": pp.log_slice,
    }
    return out


class VerificationFailure(Exception):
    def __init__(self, section: str, check: str):
        super().__init__(f"{section}: {check}")
        self.section = section
        self.check = check


class ProofStream:
    """Write-or-read cursor over the flat proof byte layout."""

    def __init__(self, mode: str, data: bytes = b""):
        self.mode = mode
        self.buf = bytearray() if mode == "w" else data
        self.pos = 0
        self.opening_bytes = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise VerificationFailure("parse", "truncated proof")
        out = bytes(self.buf[self.pos : self.pos + n])
        self.pos += n
        return out

    def raw(self, data: bytes | None = None, n: int | None = None) -> bytes:
        if self.mode == "w":
            self.buf += data
            return data
        return self._take(n)

    def ext(self, value: EF | None = None) -> EF:
        if self.mode == "w":
            self.buf += value.to_bytes()
            return value
        return EF.from_bytes(self._take(16))

    def ext_rows(self, rows=None, count=None, width=None):
        """List of round messages, each a list of `width` scalars."""
        if self.mode == "w":
            for row in rows:
                for e in row:
                    self.buf += e.to_bytes()
            return rows
        out = []
        for _ in range(count):
            out.append([EF.from_bytes(self._take(16)) for _ in range(width)])
        return out

    def u64_vec(self, arr=None, count=None) -> np.ndarray:
        if self.mode == "w":
            self.buf += arr.astype("<u8").tobytes()
            return arr
        raw = np.frombuffer(self._take(8 * count), dtype="<u8").astype(np.uint64)
        if np.any(raw >= P):
            raise VerificationFailure("parse", "non-canonical field element")
        return raw

    def digest(self, d: CommitmentDigest | None = None) -> CommitmentDigest:
        if self.mode == "w":
            self.buf += d.to_bytes()
            return d
        try:
            return CommitmentDigest.from_bytes(self._take(35))
        except ValueError as exc:
            raise VerificationFailure("parse", str(exc))

    def blob(self, data: bytes | None = None) -> bytes:
        if self.mode == "w":
            self.buf += struct.pack("<I", len(data)) + data
            self.opening_bytes += len(data) + 4
            return data
        (n,) = struct.unpack("<I", self._take(4))
        out = self._take(n)
        self.opening_bytes += n + 4
        return out

    def done(self):
        if self.mode == "r" and self.pos != len(self.buf):
            raise VerificationFailure("parse", "trailing bytes")


@dataclass
class ProveReport:
    proof: bytes
    opening_bytes: int
    counters: dict[str, int]


@dataclass
class VerifyResult:
    ok: bool
    section: str = ""
    check: str = ""
    svavg: np.ndarray | None = None
    pp: PublicParams | None = None

    def __bool__(self):
        return self.ok


@dataclass
class _FamilyBlock:
    name: str
    oracle: str
    log_q: int
    q_real: int
    pad_value: int
    low_point: EF
    pinned: int  # number of top coordinates pinned to zero
    finals_map: list  # (j, batch_name, factor_name)
    fold_targets: list  # (fold_point, batch_name_or_None, key) -> claim or final


class _Ctx:
    def __init__(self, pp: PublicParams, role: str, stream: ProofStream):
        self.pp = pp
        self.role = role
        self.stream = stream
        self.t = Transcript()
        self.nv = oracle_num_vars(pp)
        self.digests: dict[str, CommitmentDigest] = {}
        self.claims: dict[str, EF] = {}
        self.finals: dict[str, dict[str, EF]] = {}
        self.xs: dict[str, EF] = {}
        self.open_jobs = []  # (oracle_name, point, claimed)
        self.counters: dict[str, int] = {}
        self._counter_stack = []
        # prover-only
        self.sparsity = True
        self.oset: OracleSet | None = None
        self.states = {}
        self.shard_oracles = []
        self.shard_states = []
        self.slice_states = []
        self.part: ProviderPartition | None = None
        self.helper_values: dict[str, EF] = {}
        # shared / verifier
        self.provider_digests: list[CommitmentDigest] = []
        self.slice_digests: list[CommitmentDigest] = []
        self.buyer_digest: CommitmentDigest | None = None
        self.published: np.ndarray | None = None
        self.publics: PublicTables | None = None

    @property
    def prover(self):
        return self.role == "prove"

    @contextmanager
    def count(self, name: str):
        ctr = OpCounter()
        prev = None
        from . import field as _field

        prev = _field._counter
        set_counter(ctr)
        try:
            yield
        finally:
            set_counter(prev)
            self.counters[name] = self.counters.get(name, 0) + ctr.muls
            if prev is not None:
                prev.muls += ctr.muls

    def params_for(self, name: str):
        return pcs_setup(self.nv[name], self.pp.col_checks)

    def put_ext(self, label: bytes, value: EF | None) -> EF:
        v = self.stream.ext(value if self.prover else None)
        self.t.absorb(label, v.to_bytes())
        return v

    def put_claim(self, name: str, value: EF | None) -> EF:
        v = self.put_ext(b"claim/" + name.encode(), value)
        self.claims[name] = v
        return v

    def oracle_values(self, name: str):
        if name in self.helper_values:
            return self.helper_values[name]
        return self.oset.oracle(name).values

    def commit_oracle(self, name: str, values):
        digest, state = pcs_commit(values, self.params_for(name))
        self.states[name] = state
        return digest

    def add_digest(self, name: str, digest: CommitmentDigest | None) -> CommitmentDigest:
        d = self.stream.digest(digest if self.prover else None)
        self.t.absorb(b"cm/" + name.encode(), d.to_bytes())
        self.digests[name] = d
        return d

    def defer_open(self, oracle: str, point: EF, claimed: EF):
        self.open_jobs.append((oracle, point, claimed))

    def run_batch(self, spec: BatchSpec, verifier_finals):
        """One RLC batch: coeffs, rounds, supplied finals, final-combiner check."""
        label = spec.label
        claims = [ZERO if n == "zero" else self.claims[n] for n in spec.claim_names]
        coeffs = list(self.t.challenge_ext(label + b"/beta", len(spec.members)))
        degree = spec.degree
        if self.prover:
            prover = BatchProver(
                spec.num_vars, spec.members, coeffs, spec.factors,
            )
            msgs, x, finals = prover.prove(self.t, label)
            self.stream.ext_rows(msgs)
        else:
            msgs = self.stream.ext_rows(count=spec.num_vars, width=degree + 1)
            try:
                x, reduced = verify_batch(
                    spec.num_vars, degree, claims, coeffs, msgs, self.t, label
                )
            except RoundError as exc:
                raise VerificationFailure(
                    "sumcheck:" + label.decode(), f"round {exc.round_index}: {exc.reason}"
                )
        supplied = {}
        for name in spec.supplied:
            v = self.put_ext(label + b"/fin/" + name.encode(),
                             finals[name] if self.prover else None)
            supplied[name] = v
        if not self.prover:
            finals = dict(supplied)
            finals.update(verifier_finals(x, supplied))
            total = ZERO
            for m, beta in zip(spec.members, coeffs):
                total = total + beta * eval_member(m, finals)
            if not total == reduced:
                raise VerificationFailure("sumcheck:" + label.decode(), "final combiner mismatch")
        batch_name = label.decode()
        self.finals[batch_name] = {k: finals[k] for k in spec.supplied}
        self.xs[batch_name] = x
        return x


def _build_helper_oracles(ctx: _Ctx, beta_r: EF, beta_h: EF, gamma_h: EF, harm_fixed):
    """Challenge-dependent lookup inverses (prover side)."""
    pp = ctx.pp

    def bcast(scalar: EF, size: int) -> EF:
        return EF(np.full(size, scalar.c0, dtype=np.uint64), np.full(size, scalar.c1, dtype=np.uint64))

    for side in ("tr", "te"):
        limb = ctx.oset.oracle(f"limb_{side}").values
        denom = bcast(beta_r, limb.size) - EF.from_base(limb)
        ctx.helper_values[f"rinv_{side}"] = denom.inv()
    rmult = ctx.oset.oracle("rmult16").values
    j_vals = np.arange(1 << 16, dtype=np.uint64)
    denom_t = bcast(beta_r, 1 << 16) - EF.from_base(j_vals)
    ctx.helper_values["rinvt16"] = denom_t.inv() * EF.from_base(rmult)
    mhat = ctx.oset.oracle("mhat").values
    harm = ctx.oset.oracle("harm").values
    denom_w = bcast(beta_h, mhat.size) - EF.from_base(mhat) - gamma_h * EF.from_base(harm)
    ctx.helper_values["h_inv_w"] = denom_w.inv()
    n = pp.n_train
    m_vals = np.arange(1, n + 1, dtype=np.uint64)
    h_vals = np.array(harm_fixed[1 : n + 1], dtype=np.uint64)
    denom_ht = bcast(beta_h, n) - EF.from_base(m_vals) - gamma_h * EF.from_base(h_vals)
    ctx.helper_values["h_inv_t"] = denom_ht.inv() * EF.from_base(ctx.oset.oracle("h_mult").values)


def _slice_ef(values, j: int, size: int) -> EF:
    if isinstance(values, EF):
        return values[j * size : (j + 1) * size]
    return EF.from_base(values[j * size : (j + 1) * size])


def _sub_mask(support, j, size):
    if support is None:
        return None
    lo, hi = j * size, (j + 1) * size
    sel = support[(support >= lo) & (support < hi)]
    return sel - lo


def _hash_binding_side(ctx: _Ctx, side: str):
    """Dot-product binding, sign/limb constraints, and the range-lookup witness side."""
    pp = ctx.pp
    n_pt = pp.log_n if side == "tr" else pp.log_t
    nv = n_pt + pp.log_l + pp.log_k
    lbl = side.encode()

    # dot-product binding: MLE(dp)(rho) = sum_j R(j, rho_l, rho_k) X(j, rho_pt, 0)
    rho_dp = ctx.t.challenge_ext(b"hb/dp/" + lbl, nv)
    if ctx.prover:
        dp_claim = ctx.put_claim(
            f"dp_{side}", mle_eval_ef(EF.from_base(ctx.oracle_values(f"dp_{side}")), rho_dp)
        )
    else:
        dp_claim = ctx.put_claim(f"dp_{side}", None)
    factors = None
    if ctx.prover:
        # fold the (l, k) coordinates of the public projection tensor, leaving
        # a table over j; same for the feature data half over its point rows
        r_fold = ctx.publics.r_table
        for i in range(pp.log_l + pp.log_k):
            r_fold = _fold_high(r_fold, rho_dp[n_pt + i], pp.log_d)
        x_vals = EF.from_base(ctx.oracle_values(f"x_{side}"))
        x_fold = x_vals[: x_vals.shape[0] // 2]
        for i in range(n_pt):
            x_fold = _fold_high(x_fold, rho_dp[i], pp.log_d)
        factors = {"rfold": Factor("rfold", r_fold), "xfold": Factor("xfold", x_fold)}
    spec = BatchSpec(b"dpb_" + lbl, pp.log_d, dp_bind_members(pp, side), [f"dp_{side}"],
                     ["xfold"], factors)

    def vf(x, supplied):
        pt = point_concat(x, rho_dp[n_pt:])
        return {"rfold": ctx.publics.r_eval(pt)}

    x_dp = ctx.run_batch(spec, vf)
    x_point = point_concat(x_dp, rho_dp[:n_pt], point_int(0, 1))
    ctx.defer_open(f"x_{side}", x_point, ctx.finals[f"dpb_{side}"]["xfold"])
    ctx.defer_open(f"dp_{side}", rho_dp, dp_claim)

    # sign / boolean / limb-binding zero-checks over the (pt, l, k) cube
    rho_hb = ctx.t.challenge_ext(b"hb/z/" + lbl, nv)
    factors = None
    if ctx.prover:
        pre = ctx.oracle_values(f"pre_{side}")
        limb = ctx.oracle_values(f"limb_{side}")
        half = pre.size // 2
        block = half
        factors = {
            "eqz": Factor("eqz", eq_table(rho_hb)),
            "dp": Factor("dp", EF.from_base(ctx.oracle_values(f"dp_{side}"))),
            "s_half": Factor("s_half", EF.from_base(pre[:half])),
            "a1_half": Factor("a1_half", EF.from_base(pre[half:])),
        }
        for j in range(4):
            factors[f"limb{j}"] = Factor(f"limb{j}", _slice_ef(limb, j, block))
    spec = BatchSpec(
        b"hb_" + lbl, nv, hb_members(pp, side), ["zero", "zero", "zero"],
        ["dp", "s_half", "a1_half", "limb0", "limb1", "limb2"], factors,
    )

    def vf_hb(x, supplied):
        return {"eqz": eq_eval(rho_hb, x), "limb3": ZERO}

    z_star = ctx.run_batch(spec, vf_hb)
    fin = ctx.finals[f"hb_{side}"]
    ctx.defer_open(f"dp_{side}", z_star, fin["dp"])
    ctx.defer_open(f"pre_{side}", point_concat(z_star, point_int(0, 1)), fin["s_half"])
    ctx.defer_open(f"pre_{side}", point_concat(z_star, point_int(1, 1)), fin["a1_half"])

    # range-lookup witness side over (pt, l, k, j)
    rho_rng = ctx.t.challenge_ext(b"rng/z/" + lbl, nv + 2)
    if ctx.prover:
        s_w = ctx.put_claim(f"s_w_{side}", ctx.helper_values[f"rinv_{side}"].sum())
    else:
        s_w = ctx.put_claim(f"s_w_{side}", None)
    factors = None
    if ctx.prover:
        factors = {
            "eqz": Factor("eqz", eq_table(rho_rng)),
            "rinv": Factor("rinv", ctx.helper_values[f"rinv_{side}"].copy()),
            "limb_full": Factor("limb_full", EF.from_base(ctx.oracle_values(f"limb_{side}"))),
        }
    spec = BatchSpec(
        b"rng_" + lbl, nv + 2, rng_members(pp, ctx.claims["beta_r"]),
        ["zero", f"s_w_{side}"], ["rinv", "limb_full"], factors,
    )

    def vf_rng(x, supplied):
        return {"eqz": eq_eval(rho_rng, x)}

    x_rng = ctx.run_batch(spec, vf_rng)
    fin = ctx.finals[f"rng_{side}"]
    ctx.defer_open(f"limb_{side}", x_rng, fin["limb_full"])
    ctx.defer_open(f"rinv_{side}", x_rng, fin["rinv"])
    return z_star


def _fold_high(table: EF, r: EF, low_vars: int) -> EF:
    """Fold the lowest of the HIGH variables (above `low_vars`) at challenge r."""
    size = table.shape[0]
    block = 1 << low_vars
    half = size // 2
    lo = EF(
        table.c0.reshape(-1, 2, block)[:, 0, :].reshape(-1),
        table.c1.reshape(-1, 2, block)[:, 0, :].reshape(-1),
    )
    hi = EF(
        table.c0.reshape(-1, 2, block)[:, 1, :].reshape(-1),
        table.c1.reshape(-1, 2, block)[:, 1, :].reshape(-1),
    )
    return lo + r * (hi - lo)


def _range_table_side(ctx: _Ctx):
    pp = ctx.pp
    rho_rt = ctx.t.challenge_ext(b"rt/z", 16)
    if ctx.prover:
        s_t = ctx.put_claim("s_t", ctx.helper_values["rinvt16"].sum())
    else:
        s_t = ctx.put_claim("s_t", None)
    factors = None
    if ctx.prover:
        factors = {
            "eqz": Factor("eqz", eq_table(rho_rt)),
            "rinvt": Factor("rinvt", ctx.helper_values["rinvt16"].copy()),
            "rmult": Factor("rmult", EF.from_base(ctx.oracle_values("rmult16"))),
            "tpub": Factor("tpub", EF.from_base(np.arange(1 << 16, dtype=np.uint64))),
        }
    spec = BatchSpec(
        b"rt", 16, rt_members(pp, ctx.claims["beta_r"]), ["zero", "s_t"],
        ["rinvt", "rmult"], factors,
    )

    def vf(x, supplied):
        return {"eqz": eq_eval(rho_rt, x), "tpub": range_table_eval(x)}

    x_rt = ctx.run_batch(spec, vf)
    fin = ctx.finals["rt"]
    ctx.defer_open("rinvt16", x_rt, fin["rinvt"])
    ctx.defer_open("rmult16", x_rt, fin["rmult"])
    if not ctx.prover:
        total = ctx.claims["s_w_tr"] + ctx.claims["s_w_te"]
        if not total == ctx.claims["s_t"]:
            raise VerificationFailure("lookup", "range grand sums differ")


def _draw_main_challenges(ctx: _Ctx) -> MainChallenges:
    pp = ctx.pp
    t = ctx.t
    return MainChallenges(
        r_c=t.challenge_ext(b"main/rc", pp.log_c),
        rho1=t.challenge_ext(b"main/rho1", pp.depth + pp.log_l),
        rho2=t.challenge_ext(b"main/rho2", pp.depth + pp.log_l),
        rho3=t.challenge_ext(b"main/rho3", pp.depth + pp.log_l),
        sigma=t.challenge_ext(b"main/sigma", pp.depth),
        rho4_l=t.challenge_ext(b"main/rho4", pp.log_l),
        rho5_l=t.challenge_ext(b"main/rho5", pp.log_l),
        rho6_l=t.challenge_ext(b"main/rho6", pp.log_l),
        rho_h=t.challenge_ext(b"main/rhoh", pp.log_n),
        beta_h=ctx.claims["beta_h"],
        gamma_h=ctx.claims["gamma_h"],
        rho_z=t.challenge_ext(b"main/rhoz", pp.log_n + pp.log_l),
        rho_s1=t.challenge_ext(b"main/rhos1", pp.log_n),
        rho_ht=t.challenge_ext(b"main/rhoht", pp.log_n),
    )


def _ln_factors(ctx: _Ctx, ch: MainChallenges) -> dict[str, Factor]:
    pp = ctx.pp
    n, ell, c = pp.n_train, pp.num_tables, pp.num_classes
    ln = ell * n
    sparse = ctx.sparsity
    f = {}
    f["eqz"] = Factor("eqz", eq_table(ch.rho_z))
    for name, pt in (
        ("eql1", ch.rho1[pp.depth :]),
        ("eql2", ch.rho2[pp.depth :]),
        ("eql4", ch.rho4_l),
        ("eql5", ch.rho5_l),
        ("eql6", ch.rho6_l),
    ):
        f[name] = Factor(name, ef_repeat(eq_table(pt), n))
    pre = ctx.oracle_values("pre_tr")
    for i in range(pp.depth):
        f[f"s{i}"] = Factor(f"s{i}", _slice_ef(pre, i, ln))
    for name in ("mhat", "w", "dsq", "d_inv", "e", "wt_num", "t_match", "harm"):
        f[name] = Factor(name, EF.from_base(ctx.oracle_values(name)))
    f["h_inv_w"] = Factor("h_inv_w", ctx.helper_values["h_inv_w"].copy())
    eqc = eq_table(ch.r_c)
    y_vals = ctx.oracle_values("y_ind")
    y_sup = ctx.oset.oracle("y_ind").support
    mc_vals, tc_vals = ctx.oracle_values("mchat"), ctx.oracle_values("tchat")
    mc_sup = ctx.oset.oracle("mchat").support
    tc_sup = ctx.oset.oracle("tchat").support
    yfold = EF.zero((n,))
    mfold = EF.zero((ln,))
    tfold = EF.zero((ln,))
    for cc in range(pp.c_pad):
        w_c = eqc[cc]
        y_slice = _slice_ef(y_vals, cc, n)
        yfold = yfold + w_c * y_slice
        mfold = mfold + w_c * _slice_ef(mc_vals, cc, ln)
        tfold = tfold + w_c * _slice_ef(tc_vals, cc, ln)
        if cc < c:
            y_mask = _sub_mask(y_sup, cc, n) if sparse else None
            lift_mask = lifted_mask(y_mask, n, ell) if y_mask is not None else None
            f[f"y{cc}"] = Factor(
                f"y{cc}", ef_tile(y_slice, ell), mask=lift_mask
            )
            f[f"mchat{cc}"] = Factor(
                f"mchat{cc}", _slice_ef(mc_vals, cc, ln),
                mask=_sub_mask(mc_sup, cc, ln) if sparse else None,
            )
            f[f"tchat{cc}"] = Factor(
                f"tchat{cc}", _slice_ef(tc_vals, cc, ln),
                mask=_sub_mask(tc_sup, cc, ln) if sparse else None,
            )
    f["yfold"] = Factor("yfold", ef_tile(yfold, ell))
    f["mchat_fold"] = Factor("mchat_fold", mfold)
    f["tchat_fold"] = Factor("tchat_fold", tfold)
    return f


def _lb_factors(ctx: _Ctx, ch: MainChallenges) -> dict[str, Factor]:
    pp = ctx.pp
    b, ell = pp.num_buckets, pp.num_tables
    lb = ell * b
    sparse = ctx.sparsity
    f = {
        "eqs": Factor("eqs", ef_tile(eq_table(ch.sigma), ell)),
        "eql4": Factor("eql4", ef_repeat(eq_table(ch.rho4_l), b)),
        "eql5": Factor("eql5", ef_repeat(eq_table(ch.rho5_l), b)),
        "eql6": Factor("eql6", ef_repeat(eq_table(ch.rho6_l), b)),
        "cnt": Factor("cnt", EF.from_base(ctx.oracle_values("cnt"))),
    }
    eqc = eq_table(ch.r_c)
    for name, oracle in (("cnt_tr_fold", "cnt_tr"), ("cnt_te_fold", "cnt_te")):
        vals = ctx.oracle_values(oracle)
        sup = ctx.oset.oracle(oracle).support
        fold = EF.zero((lb,))
        masks = []
        for cc in range(pp.c_pad):
            fold = fold + eqc[cc] * _slice_ef(vals, cc, lb)
            if sparse:
                sm = _sub_mask(sup, cc, lb)
                if sm is not None:
                    masks.append(sm)
        mask = np.unique(np.concatenate(masks)) if sparse and masks else None
        f[name] = Factor(name, fold, mask=mask)
    return f


def _v3_factors(ctx: _Ctx, ch: MainChallenges) -> dict[str, Factor]:
    pp = ctx.pp
    t, ell = pp.n_test, pp.num_tables
    lt = ell * t
    f = {"eql3": Factor("eql3", ef_repeat(eq_table(ch.rho3[pp.depth :]), t))}
    pre = ctx.oracle_values("pre_te")
    for i in range(pp.depth):
        f[f"ste{i}"] = Factor(f"ste{i}", _slice_ef(pre, i, lt))
    eqc = eq_table(ch.r_c)
    y_vals = ctx.oracle_values("y_te_ind")
    fold = EF.zero((t,))
    for cc in range(pp.c_pad):
        fold = fold + eqc[cc] * _slice_ef(y_vals, cc, t)
    f["yte_fold"] = Factor("yte_fold", ef_tile(fold, ell))
    return f


def _main_sections(ctx: _Ctx, ch: MainChallenges, harm_fixed):
    """LN + LB batches, V3, S-agg, S1 and the harmonic table side."""
    pp = ctx.pp

    # claims, mechanically computed from the (possibly corrupt) witness
    def claim(name, compute):
        ctx.put_claim(name, compute() if ctx.prover else None)

    ln_factors = _ln_factors(ctx, ch) if ctx.prover else None
    members_ln = ln_members(pp, ch)
    claim("c1", lambda: mle_eval_ef(EF.from_base(ctx.oracle_values("cnt")), ch.rho1))
    claim("c2", lambda: mle_eval_ef(
        EF.from_base(ctx.oracle_values("cnt_tr")), point_concat(ch.rho2, ch.r_c)))
    claim("c3", lambda: mle_eval_ef(
        EF.from_base(ctx.oracle_values("cnt_te")), point_concat(ch.rho3, ch.r_c)))
    if ctx.prover:
        from .sumcheck import member_sum

        by_name = {m.name: m for m in members_ln}
        claim("t4", lambda: member_sum(by_name["v4m"], ln_factors))
        claim("t5", lambda: member_sum(by_name["v5m"], ln_factors))
        claim("t6", lambda: member_sum(by_name["v6m"], ln_factors))
        claim("sv_rh", lambda: mle_eval_ef(EF.from_base(ctx.oracle_values("svsum")), ch.rho_h))
        claim("s_wh", lambda: ctx.helper_values["h_inv_w"].sum())
        claim("s_th", lambda: ctx.helper_values["h_inv_t"].sum())
    else:
        for name in ("t4", "t5", "t6", "sv_rh", "s_wh", "s_th"):
            claim(name, None)
        if not ctx.claims["s_wh"] == ctx.claims["s_th"]:
            raise VerificationFailure("lookup", "harmonic grand sums differ")

    # LN batch over (h, l)
    spec = BatchSpec(b"ln", pp.log_n + pp.log_l, members_ln,
                     ["c1", "c2", "t4", "t5", "t6"] + ["zero"] * 9 + ["s_wh"],
                     ln_supplied(pp), ln_factors)

    def vf_ln(x, supplied):
        out = {"eqz": eq_eval(ch.rho_z, x)}
        x_l = x[pp.log_n :]
        out["eql1"] = eq_eval(ch.rho1[pp.depth :], x_l)
        out["eql2"] = eq_eval(ch.rho2[pp.depth :], x_l)
        out["eql4"] = eq_eval(ch.rho4_l, x_l)
        out["eql5"] = eq_eval(ch.rho5_l, x_l)
        out["eql6"] = eq_eval(ch.rho6_l, x_l)
        return out

    with ctx.count("layer123"):
        x_ln = ctx.run_batch(spec, vf_ln)
    fin_ln = ctx.finals["ln"]
    for name in ("mhat", "w", "dsq", "d_inv", "e", "wt_num", "t_match", "harm", "h_inv_w"):
        ctx.defer_open(name, x_ln, fin_ln[name])
    ctx.defer_open("cnt", ch.rho1, ctx.claims["c1"])

    # LB batch over (b, l)
    spec_lb = BatchSpec(b"lb", pp.depth + pp.log_l, lb_members(pp), ["t4", "t5", "t6"],
                        ["cnt", "cnt_tr_fold", "cnt_te_fold"],
                        _lb_factors(ctx, ch) if ctx.prover else None)

    def vf_lb(x, supplied):
        x_b, x_l = x[: pp.depth], x[pp.depth :]
        return {
            "eqs": eq_eval(ch.sigma, x_b),
            "eql4": eq_eval(ch.rho4_l, x_l),
            "eql5": eq_eval(ch.rho5_l, x_l),
            "eql6": eq_eval(ch.rho6_l, x_l),
        }

    with ctx.count("layer123"):
        x_lb = ctx.run_batch(spec_lb, vf_lb)
    ctx.defer_open("cnt", x_lb, ctx.finals["lb"]["cnt"])

    # V3 over (t, l)
    spec_v3 = BatchSpec(b"v3", pp.log_t + pp.log_l, v3_members(pp, ch), ["c3"],
                        ["yte_fold"] + [f"ste{i}" for i in range(pp.depth)],
                        _v3_factors(ctx, ch) if ctx.prover else None)

    def vf_v3(x, supplied):
        return {"eql3": eq_eval(ch.rho3[pp.depth :], x[pp.log_t :])}

    with ctx.count("v3"):
        x_v3 = ctx.run_batch(spec_v3, vf_v3)

    # S-agg over l: svsum(rho_h) = sum_l W(l, rho_h)
    factors = None
    if ctx.prover:
        eqh = eq_table(ch.rho_h)
        w_ef = EF.from_base(ctx.oracle_values("w"))
        ell, n = pp.num_tables, pp.n_train
        rows_c0 = np.empty(ell, dtype=np.uint64)
        rows_c1 = np.empty(ell, dtype=np.uint64)
        for l in range(ell):
            v = (eqh * w_ef[l * n : (l + 1) * n]).sum()
            rows_c0[l], rows_c1[l] = v.c0, v.c1
        factors = {"w_rh": Factor("w_rh", EF(rows_c0, rows_c1))}
    spec_sagg = BatchSpec(b"sagg", pp.log_l, sagg_members(pp), ["sv_rh"], ["w_rh"], factors)
    with ctx.count("layer123"):
        x_agg = ctx.run_batch(spec_sagg, lambda x, s: {})
    ctx.defer_open("w", point_concat(ch.rho_h, x_agg), ctx.finals["sagg"]["w_rh"])
    ctx.defer_open("svsum", ch.rho_h, ctx.claims["sv_rh"])

    # S1 over h: svavg * (lambda L T) = svsum against the published scores
    factors = None
    if ctx.prover:
        factors = {
            "eqz": Factor("eqz", eq_table(ch.rho_s1)),
            "svsum_t": Factor("svsum_t", EF.from_base(ctx.oracle_values("svsum"))),
            "svavg_pub": Factor("svavg_pub", EF.from_base(ctx.published)),
        }
    spec_s1 = BatchSpec(b"s1", pp.log_n, s1_members(pp), ["zero"], ["svsum_t"], factors)

    def vf_s1(x, supplied):
        return {
            "eqz": eq_eval(ch.rho_s1, x),
            "svavg_pub": mle_eval_ef(EF.from_base(ctx.published), x),
        }

    with ctx.count("layer123"):
        x_s1 = ctx.run_batch(spec_s1, vf_s1)
    ctx.defer_open("svsum", x_s1, ctx.finals["s1"]["svsum_t"])

    # harmonic lookup, table side over h
    factors = None
    if ctx.prover:
        n = pp.n_train
        factors = {
            "eqz": Factor("eqz", eq_table(ch.rho_ht)),
            "h_inv_t": Factor("h_inv_t", ctx.helper_values["h_inv_t"].copy()),
            "h_mult": Factor("h_mult", EF.from_base(ctx.oracle_values("h_mult"))),
            "mpub": Factor("mpub", EF.from_base(np.arange(1, n + 1, dtype=np.uint64))),
            "hpub": Factor("hpub", EF.from_base(np.array(harm_fixed[1 : n + 1], dtype=np.uint64))),
        }
    spec_ht = BatchSpec(b"ht", pp.log_n, harm_table_members(pp, ch), ["zero", "s_th"],
                        ["h_inv_t", "h_mult"], factors)

    def vf_ht(x, supplied):
        return {
            "eqz": eq_eval(ch.rho_ht, x),
            "mpub": index_plus_one_eval(x),
            "hpub": ctx.publics.harm_eval(x),
        }

    with ctx.count("layer123"):
        x_ht = ctx.run_batch(spec_ht, vf_ht)
    ctx.defer_open("h_inv_t", x_ht, ctx.finals["ht"]["h_inv_t"])
    ctx.defer_open("h_mult", x_ht, ctx.finals["ht"]["h_mult"])


def _family_blocks(ctx: _Ctx, ch: MainChallenges) -> list[_FamilyBlock]:
    pp = ctx.pp
    x_ln, x_v3, x_lb = ctx.xs["ln"], ctx.xs["v3"], ctx.xs["lb"]
    z_tr, z_te = ctx.xs["hb_tr"], ctx.xs["hb_te"]
    c = pp.num_classes
    blocks = [
        _FamilyBlock("sig_tr", "pre_tr", pp.log_k, pp.depth, 1, x_ln, 1,
                     [(i, "ln", f"s{i}") for i in range(pp.depth)], []),
        _FamilyBlock("sig_te", "pre_te", pp.log_k, pp.depth, 1, x_v3, 1,
                     [(i, "v3", f"ste{i}") for i in range(pp.depth)], []),
        _FamilyBlock("y_tr", "y_ind", pp.log_c, c, 0, x_ln[: pp.log_n], 0,
                     [(cc, "ln", f"y{cc}") for cc in range(c)],
                     [("ln", "yfold")]),
        _FamilyBlock("y_te", "y_te_ind", pp.log_c, c, 0, x_v3[: pp.log_t], 0,
                     [], [("v3", "yte_fold")]),
        _FamilyBlock("mchat", "mchat", pp.log_c, c, 0, x_ln, 0,
                     [(cc, "ln", f"mchat{cc}") for cc in range(c)],
                     [("ln", "mchat_fold")]),
        _FamilyBlock("tchat", "tchat", pp.log_c, c, 0, x_ln, 0,
                     [(cc, "ln", f"tchat{cc}") for cc in range(c)],
                     [("ln", "tchat_fold")]),
        _FamilyBlock("cnt_tr_v2", "cnt_tr", pp.log_c, c, 0, ch.rho2, 0, [],
                     [(None, "c2")]),
        _FamilyBlock("cnt_te_v3", "cnt_te", pp.log_c, c, 0, ch.rho3, 0, [],
                     [(None, "c3")]),
        _FamilyBlock("cnt_tr_lb", "cnt_tr", pp.log_c, c, 0, x_lb, 0, [],
                     [("lb", "cnt_tr_fold")]),
        _FamilyBlock("cnt_te_lb", "cnt_te", pp.log_c, c, 0, x_lb, 0, [],
                     [("lb", "cnt_te_fold")]),
        _FamilyBlock("limb_tr", "limb_tr", 2, 3, 0, z_tr, 0,
                     [(j, "hb_tr", f"limb{j}") for j in range(3)], []),
        _FamilyBlock("limb_te", "limb_te", 2, 3, 0, z_te, 0,
                     [(j, "hb_te", f"limb{j}") for j in range(3)], []),
    ]
    return blocks


def _process_family_block(ctx: _Ctx, ch: MainChallenges, blk: _FamilyBlock):
    pp = ctx.pp
    q = 1 << blk.log_q
    size = 1 << blk.low_point.shape[0]
    lbl = b"fam/" + blk.name.encode()
    values = []
    for j in range(q):
        if ctx.prover:
            vals = ctx.oracle_values(blk.oracle)
            v = mle_eval_ef(_slice_ef(vals, j, size), blk.low_point)
        else:
            v = None
        values.append(ctx.put_ext(lbl + b"/v%d" % j, v))
    if not ctx.prover:
        for j, batch, fname in blk.finals_map:
            if not values[j] == ctx.finals[batch][fname]:
                raise VerificationFailure("family:" + blk.name, f"slice {j} final mismatch")
        for target in blk.fold_targets:
            batch, key = target
            want = ctx.claims[key] if batch is None else ctx.finals[batch][key]
            got = recovery_value(ch.r_c, values) if blk.log_q == pp.log_c else None
            if got is None:
                raise VerificationFailure("family:" + blk.name, "no fold rule")
            if not got == want:
                raise VerificationFailure("family:" + blk.name, "class fold mismatch")
    pinned = point_int(0, blk.pinned) if blk.pinned else None
    if pp.batching:
        r = ctx.t.challenge_ext(lbl + b"/r", blk.log_q)
        claimed = recovery_value(r, values)
        point = point_concat(blk.low_point, r, pinned) if pinned else point_concat(blk.low_point, r)
        _do_opening(ctx, blk.oracle, point, claimed, lbl + b"/open")
    else:
        for j in range(q):
            if j < blk.q_real:
                point = (
                    point_concat(blk.low_point, point_int(j, blk.log_q), pinned)
                    if pinned
                    else point_concat(blk.low_point, point_int(j, blk.log_q))
                )
                _do_opening(ctx, blk.oracle, point, values[j], lbl + b"/open%d" % j)
            elif not ctx.prover:
                if not values[j] == ef_scalar(blk.pad_value):
                    raise VerificationFailure("family:" + blk.name, f"padding slice {j} not constant")


def _do_opening(ctx: _Ctx, oracle: str, point: EF, claimed: EF, label: bytes):
    params = ctx.params_for(oracle)
    if ctx.prover:
        proof = pcs_open(ctx.states[oracle], point, ctx.t, label)
        ctx.stream.blob(proof.to_bytes(ctx.digests[oracle].kind))
    else:
        data = ctx.stream.blob()
        digest = ctx.digests.get(oracle)
        if digest is None:
            raise VerificationFailure("opening", f"unknown oracle {oracle}")
        proof, _ = _parse_opening(ctx, data, params, digest.kind, label)
        ok, reason = pcs_verify_opening(digest, params, point, claimed, proof, ctx.t, label)
        if not ok:
            raise VerificationFailure("opening", f"{oracle}: {reason}")


def _parse_opening(ctx: _Ctx, data: bytes, params, kind, label):
    """Parse an opening; the unique-column count is replayed from the transcript."""
    t_probe = ctx.t.clone()
    t_probe.challenge_ext(label + b"/test", params.rows)
    w = params.cols
    if len(data) < 32 * w:
        raise VerificationFailure("parse", "short opening")
    try:
        test_row = EF.from_bytes(data[: 16 * w], shape=(w,))
        eval_row = EF.from_bytes(data[16 * w : 32 * w], shape=(w,))
    except ValueError as exc:
        raise VerificationFailure("parse", f"opening: {exc}")
    t_probe.absorb(label + b"/trow", test_row.to_bytes())
    t_probe.absorb(label + b"/erow", eval_row.to_bytes())
    idx = t_probe.challenge_indices(label + b"/cols", params.num_col_checks, params.codeword_cols)
    n_cols = len(set(idx))
    try:
        proof = OpeningProof.from_bytes(data, params, kind, n_cols)
    except ValueError as exc:
        raise VerificationFailure("parse", f"opening: {exc}")
    return proof, n_cols


def _commit_phase(ctx: _Ctx, provider_digests, buyer_digest):
    """Header, public commitments, wave-1 witness commitments, published scores."""
    pp = ctx.pp
    ctx.t.absorb(b"pp", pp.to_kv().encode())
    for p in range(pp.providers):
        d = ctx.stream.digest(provider_digests[p] if ctx.prover else None)
        ctx.t.absorb(b"cm/provider%d" % p, d.to_bytes())
        ctx.provider_digests.append(d)
    bd = ctx.stream.digest(buyer_digest if ctx.prover else None)
    ctx.t.absorb(b"cm/buyer", bd.to_bytes())
    ctx.buyer_digest = bd
    with ctx.count("pcs_commit"):
        for name in WAVE1_ORACLES:
            d = None
            if ctx.prover:
                d = ctx.commit_oracle(name, ctx.oracle_values(name))
            ctx.add_digest(name, d)
        for p in range(pp.providers):
            d = None
            if ctx.prover:
                digest, state = pcs_commit(
                    ctx.oset.svavg_field[p * (pp.n_train // pp.providers):(p + 1) * (pp.n_train // pp.providers)].copy(),
                    pcs_setup(pp.log_slice, pp.col_checks),
                )
                ctx.slice_states.append(state)
                d = digest
            d = ctx.stream.digest(d if ctx.prover else None)
            ctx.t.absorb(b"cm/slice%d" % p, d.to_bytes())
            ctx.slice_digests.append(d)
    if not ctx.prover:
        if ctx.digests["x_te"] != ctx.buyer_digest:
            raise VerificationFailure("commit", "buyer commitment mismatch")
    # section 2: the released scores
    sv = ctx.stream.u64_vec(ctx.published if ctx.prover else None, count=pp.n_train)
    ctx.t.absorb(b"scores", sv.astype("<u8").tobytes())
    ctx.published = sv


def _wave2_phase(ctx: _Ctx, harm_fixed):
    """Lookup challenges and the challenge-dependent helper commitments."""
    beta_r = ctx.t.challenge_ext(b"rng/beta", 1)[0]
    bh = ctx.t.challenge_ext(b"harm/beta", 2)
    ctx.claims["beta_r"] = beta_r
    ctx.claims["beta_h"] = bh[0]
    ctx.claims["gamma_h"] = bh[1]
    if ctx.prover:
        _build_helper_oracles(ctx, beta_r, bh[0], bh[1], harm_fixed)
    with ctx.count("pcs_commit"):
        for name in WAVE2_ORACLES:
            d = None
            if ctx.prover:
                d = ctx.commit_oracle(name, ctx.helper_values[name])
            ctx.add_digest(name, d)


def _flush_openings(ctx: _Ctx):
    with ctx.count("pcs_open"):
        for i, (oracle, point, claimed) in enumerate(ctx.open_jobs):
            _do_opening(ctx, oracle, point, claimed, b"open/%d/%s" % (i, oracle.encode()))


def _reconstruction_phase(ctx: _Ctx):
    """Op1 (input side) and Op7 (output side) against per-provider commitments."""
    pp = ctx.pp
    m = pp.providers
    shard_params = pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks)
    slice_params = pcs_setup(pp.log_slice, pp.col_checks)

    # input side: x_tr data half decomposes into provider shards
    tau1 = ctx.t.challenge_ext(b"op1/tau", pp.log_d + pp.log_n)
    x_point = point_concat(tau1, point_int(0, 1))
    if ctx.prover:
        v_x = mle_eval_ef(EF.from_base(ctx.oracle_values("x_tr")), x_point)
    else:
        v_x = None
    v_x = ctx.put_ext(b"op1/vx", v_x)
    shard_vals = []
    low = point_concat(tau1[: pp.log_d + pp.log_slice], point_int(0, 1))
    for p in range(m):
        if ctx.prover:
            v = mle_eval_ef(EF.from_base(ctx.shard_oracles[p].values), low)
        else:
            v = None
        shard_vals.append(ctx.put_ext(b"op1/v%d" % p, v))
    _do_opening(ctx, "x_tr", x_point, v_x, b"op1/open/x")
    for p in range(m):
        if ctx.prover:
            proof = pcs_open(ctx.shard_states[p], low, ctx.t, b"op1/open/%d" % p)
            ctx.stream.blob(proof.to_bytes(ctx.provider_digests[p].kind))
        else:
            data = ctx.stream.blob()
            proof, _ = _parse_opening(ctx, data, shard_params,
                                      ctx.provider_digests[p].kind, b"op1/open/%d" % p)
            ok, reason = pcs_verify_opening(
                ctx.provider_digests[p], shard_params, low, shard_vals[p], proof,
                ctx.t, b"op1/open/%d" % p,
            )
            if not ok:
                raise VerificationFailure("op1", f"provider {p}: {reason}")
    if not ctx.prover:
        tau_hh = tau1[pp.log_d + pp.log_slice :]
        total = ZERO
        for p in range(m):
            total = total + eq_eval(tau_hh, point_int(p, pp.log_m)) * shard_vals[p]
        if not total == v_x:
            raise VerificationFailure("op1", "provider decomposition mismatch")

    # output side: committed svavg decomposes into score slices and matches the
    # published values
    tau7 = ctx.t.challenge_ext(b"op7/tau", pp.log_n)
    if ctx.prover:
        v_s = mle_eval_ef(EF.from_base(ctx.published), tau7)
    else:
        v_s = None
    v_s = ctx.put_ext(b"op7/vs", v_s)
    slice_vals = []
    low7 = tau7[: pp.log_slice]
    for p in range(m):
        if ctx.prover:
            sl = ctx.published[p * (pp.n_train // m) : (p + 1) * (pp.n_train // m)]
            v = mle_eval_ef(EF.from_base(sl), low7)
        else:
            v = None
        slice_vals.append(ctx.put_ext(b"op7/v%d" % p, v))
    if not ctx.prover:
        if not v_s == mle_eval_ef(EF.from_base(ctx.published), tau7):
            raise VerificationFailure("publish", "committed scores differ from released scores")
    _do_opening(ctx, "svavg", tau7, v_s, b"op7/open/s")
    for p in range(m):
        if ctx.prover:
            proof = pcs_open(ctx.slice_states[p], low7, ctx.t, b"op7/open/%d" % p)
            ctx.stream.blob(proof.to_bytes(ctx.slice_digests[p].kind))
        else:
            data = ctx.stream.blob()
            proof, _ = _parse_opening(ctx, data, slice_params,
                                      ctx.slice_digests[p].kind, b"op7/open/%d" % p)
            ok, reason = pcs_verify_opening(
                ctx.slice_digests[p], slice_params, low7, slice_vals[p], proof,
                ctx.t, b"op7/open/%d" % p,
            )
            if not ok:
                raise VerificationFailure("op7", f"slice {p}: {reason}")
    if not ctx.prover:
        tau_hh = tau7[pp.log_slice :]
        total = ZERO
        for p in range(m):
            total = total + eq_eval(tau_hh, point_int(p, pp.log_m)) * slice_vals[p]
        if not total == v_s:
            raise VerificationFailure("op7", "slice decomposition mismatch")


def _run_protocol(ctx: _Ctx, provider_digests, buyer_digest, harm_fixed):
    _commit_phase(ctx, provider_digests, buyer_digest)
    _wave2_phase(ctx, harm_fixed)
    with ctx.count("hash_binding"):
        _hash_binding_side(ctx, "tr")
        _hash_binding_side(ctx, "te")
        _range_table_side(ctx)
    ch = _draw_main_challenges(ctx)
    _main_sections(ctx, ch, harm_fixed)
    for blk in _family_blocks(ctx, ch):
        with ctx.count("pcs_open"):
            _process_family_block(ctx, ch, blk)
    _flush_openings(ctx)
    _reconstruction_phase(ctx)


def _proof_header(pp: PublicParams) -> bytes:
    kv = pp.to_kv().encode()
    return (
        MAGIC
        + struct.pack("<I", pp.version)
        + struct.pack("<B", len(HASH_ID))
        + HASH_ID.encode()
        + struct.pack("<I", len(kv))
        + kv
    )


def _parse_header(data: bytes):
    if data[:4] != MAGIC:
        raise VerificationFailure("parse", "bad magic")
    off = 4
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    hlen = data[off]
    off += 1
    hash_id = data[off : off + hlen].decode()
    off += hlen
    if hash_id != HASH_ID:
        raise VerificationFailure("params", "unsupported hash identifier")
    (klen,) = struct.unpack_from("<I", data, off)
    off += 4
    try:
        pp = PublicParams.from_kv(data[off : off + klen].decode())
    except (ValueError, TypeError) as exc:
        raise VerificationFailure("params", str(exc))
    if pp.version != version:
        raise VerificationFailure("params", "version mismatch")
    return pp, off + klen


def prove(
    oset: OracleSet,
    part: ProviderPartition,
    shard_oracles: list,
    shard_states: list,
    provider_digests: list[CommitmentDigest],
    buyer_digest: CommitmentDigest,
    ht: HarmonicTable,
    sparsity: bool = True,
) -> ProveReport:
    """Produce the full valuation certificate for a built witness."""
    pp = oset.pp
    stream = ProofStream("w")
    stream.buf += _proof_header(pp)
    ctx = _Ctx(pp, "prove", stream)
    ctx.sparsity = sparsity
    ctx.oset = oset
    ctx.part = part
    ctx.shard_oracles = shard_oracles
    ctx.shard_states = shard_states
    ctx.published = oset.svavg_field
    proj = gaussian_projections(pp.hash_seed, pp.num_tables, pp.depth, pp.dim, pp.s_r)
    ctx.publics = PublicTables(pp, proj, ht.fixed)
    _run_protocol(ctx, provider_digests, buyer_digest, ht.fixed)
    return ProveReport(bytes(stream.buf), stream.opening_bytes, dict(ctx.counters))


def verify(
    proof: bytes,
    provider_digests: list[CommitmentDigest] | None = None,
    buyer_digest: CommitmentDigest | None = None,
    expect_pp: PublicParams | None = None,
) -> VerifyResult:
    """Check a valuation certificate using public data only."""
    try:
        pp, off = _parse_header(proof)
        if expect_pp is not None and pp != expect_pp:
            raise VerificationFailure("params", "public parameters differ from expectation")
        stream = ProofStream("r", proof)
        stream.pos = off
        ctx = _Ctx(pp, "verify", stream)
        ht = HarmonicTable(pp.n_train, pp.lambda_scale)
        proj = gaussian_projections(pp.hash_seed, pp.num_tables, pp.depth, pp.dim, pp.s_r)
        ctx.publics = PublicTables(pp, proj, ht.fixed)
        _run_protocol(ctx, None, None, ht.fixed)
        stream.done()
        if provider_digests is not None:
            if len(provider_digests) != pp.providers or any(
                a != b for a, b in zip(provider_digests, ctx.provider_digests)
            ):
                raise VerificationFailure("commit", "provider commitments differ from public record")
        if buyer_digest is not None and buyer_digest != ctx.buyer_digest:
            raise VerificationFailure("commit", "buyer commitment differs from public record")
    except VerificationFailure as exc:
        return VerifyResult(False, exc.section, exc.check)
    except (struct.error, IndexError, ValueError) as exc:
        return VerifyResult(False, "parse", str(exc))
    return VerifyResult(True, svavg=ctx.published, pp=pp)


@dataclass
class ProviderReport:
    input_binding: bool  # Check A
    output_binding: bool  # Check B
    transcript_ok: bool  # Check C
    detail: str = ""

    @property
    def ok(self):
        return self.input_binding and self.output_binding and self.transcript_ok


def provider_verify(
    proof: bytes,
    provider_index: int,
    shard_features: np.ndarray,
    salt: bytes,
    received_scores: np.ndarray,
    provider_digests: list[CommitmentDigest],
    buyer_digest: CommitmentDigest | None = None,
) -> ProviderReport:
    """The three local checks a provider runs on its own slice.

    Check A recommits the raw shard (with the provider's salt) and compares
    against the published commitment; Check B recommits the received score
    slice against the proof's slice commitment; Check C replays the full
    transcript.
    """
    from .witness import _salted_feature_table

    try:
        pp, off = _parse_header(proof)
    except VerificationFailure as exc:
        return ProviderReport(False, False, False, f"{exc.section}: {exc.check}")
    detail = []
    shard_params = pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks)
    table = _salted_feature_table(shard_features, pp.s_x, salt, pp.log_slice, pp.log_d)
    digest, _ = pcs_commit(table, shard_params)
    check_a = digest == provider_digests[provider_index]
    if not check_a:
        detail.append("A: shard commitment mismatch")

    res = verify(proof, provider_digests, buyer_digest)
    check_c = res.ok
    if not check_c:
        detail.append(f"C: {res.section}: {res.check}")

    # Check B: the slice digests sit in section 1 right after the wave-1 oracles
    check_b = False
    received = np.asarray(received_scores, dtype=np.uint64)
    if received.shape == (pp.n_train // pp.providers,):
        d2, _ = pcs_commit(received.copy(), pcs_setup(pp.log_slice, pp.col_checks))
        stream = ProofStream("r", proof)
        stream.pos = off
        try:
            for _ in range(pp.providers + 1 + len(WAVE1_ORACLES)):
                stream.digest()
            slice_digests = [stream.digest() for _ in range(pp.providers)]
            check_b = d2 == slice_digests[provider_index]
        except VerificationFailure:
            check_b = False
    if not check_b:
        detail.append("B: score-slice commitment mismatch")
    return ProviderReport(check_a, check_b, check_c, "; ".join(detail))
