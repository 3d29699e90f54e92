"""Builds every committed oracle from the quantized datasets.

Table layouts are fixed here once and shared by prover and verifier; index
bits are listed low to high.  Axes that back a packed family (hash-bit index
k, class index c, the sign/abs selector) sit in the top bits so one
commitment doubles as the family's super-oracle.

  x_tr        (j, h, z)        features, salt half at z=1
  x_te        (j, t, z)
  shard_p     (j, h_low, z)    provider rows + salt half
  dp_tr/te    (h|t, l, k)      signed projections <r, x>
  pre_tr/te   (h|t, l, k, w)   w=0: sign bits, w=1: |2 dp + 1|
  limb_tr/te  (h|t, l, k, j2)  16-bit limbs of |2 dp + 1| - 1 (slice 3 zero)
  cnt         (b, l)
  cnt_tr/te   (b, l, c)
  mhat etc.   (h, l)
  mchat/tchat (h, l, c)
  y_ind       (h, c)           y_test_ind (t, c)
  h_mult      (h)              harmonic lookup multiplicities
  svsum/svavg (h)
  slice_p     (h_low)          per-provider score slice
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import P, encode_signed_vec, f_inv, gl_add, gl_inv, gl_mul
from .mle import MLEOracle
from .params import PublicParams
from .pcs import CodeParams, CommitmentDigest, ProverState, pcs_commit, pcs_setup
from .valuation import (
    BucketStats,
    HarmonicTable,
    HashParams,
    QuantizedDataset,
    WeightTensors,
    bucket_statistics,
    bucket_weight_tensors,
    lsh_shapley,
)


@dataclass
class ProviderPartition:
    """Contiguous equal slices of [0, N) plus per-provider salt seeds."""

    providers: int
    slice_size: int
    salts: list[bytes]

    def rows(self, p: int) -> range:
        return range(p * self.slice_size, (p + 1) * self.slice_size)


def _salted_feature_table(features: np.ndarray, s_x: int, salt: bytes, log_rows: int, log_d: int):
    """(j, rows, z) layout: data half then a salt row of random field elements."""
    d = 1 << log_d
    rows = 1 << log_rows
    if features.shape != (rows, d):
        raise ValueError("feature block shape mismatch")
    half = rows * d
    table = np.zeros(2 * half, dtype=np.uint64)
    table[:half] = encode_signed_vec(features.reshape(-1))
    salt_rng = np.random.Generator(np.random.Philox(key=int.from_bytes(salt[:16].ljust(16, b"\0"), "little")))
    salt_row = salt_rng.integers(0, P, size=d, dtype=np.uint64)
    table[half : half + d] = salt_row
    return table


def feature_oracle(data: QuantizedDataset, salt: bytes, log_rows: int, log_d: int) -> MLEOracle:
    table = _salted_feature_table(data.features, data.scale, salt, log_rows, log_d)
    return MLEOracle(log_d + log_rows + 1, table)


def shard_oracle(train: QuantizedDataset, part: ProviderPartition, p: int, pp: PublicParams) -> MLEOracle:
    rows = part.rows(p)
    block = train.features[rows.start : rows.stop]
    table = _salted_feature_table(block, pp.s_x, part.salts[p], pp.log_slice, pp.log_d)
    return MLEOracle(pp.log_d + pp.log_slice + 1, table)


def partition_and_commit(
    train: QuantizedDataset,
    val: QuantizedDataset,
    pp: PublicParams,
    salts: list[bytes],
    buyer_salt: bytes,
):
    """Per-provider commitments over each slice plus the buyer's commitment."""
    m = pp.providers
    if len(salts) != m:
        raise ValueError("one salt per provider required")
    part = ProviderPartition(m, pp.n_train // m, salts)
    shard_params = pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks)
    digests = []
    for p in range(m):
        digest, _ = pcs_commit(shard_oracle(train, part, p, pp).values, shard_params)
        digests.append(digest)
    buyer_params = pcs_setup(pp.log_d + pp.log_t + 1, pp.col_checks)
    buyer_oracle = feature_oracle(val, buyer_salt, pp.log_t, pp.log_d)
    buyer_digest, _ = pcs_commit(buyer_oracle.values, buyer_params)
    return part, digests, buyer_digest


def commit_score_slices(svavg_field: np.ndarray, part: ProviderPartition, pp: PublicParams):
    """Commitment of the score MLE restricted to each provider's rows."""
    params = pcs_setup(pp.log_slice, pp.col_checks)
    out = []
    for p in range(part.providers):
        rows = part.rows(p)
        digest, state = pcs_commit(svavg_field[rows.start : rows.stop].copy(), params)
        out.append((digest, state))
    return out


@dataclass
class OracleSet:
    """All witness tensors plus the integer data they were derived from."""

    pp: PublicParams
    oracles: dict[str, MLEOracle]
    stats: BucketStats
    weights: WeightTensors
    dp_tr: np.ndarray  # int64 (L, K, N)
    dp_te: np.ndarray
    svsum_field: np.ndarray
    svavg_field: np.ndarray

    def oracle(self, name: str) -> MLEOracle:
        return self.oracles[name]


def _preamble_tables(dp: np.ndarray, pp: PublicParams, count: int):
    """dp (L,K,count) ints -> dp/pre/limb tables in (pt, l, k[, sel]) layout."""
    ell, k_real, n = dp.shape
    k_pad = pp.k_pad
    two = 2 * dp + 1
    sign = (two > 0).astype(np.int64)
    abs1 = np.abs(two)
    # padded hash slots carry dp=0, s=1, abs1=1 so every identity holds there
    dp_t = np.zeros((k_pad, ell, n), dtype=np.int64)
    s_t = np.ones((k_pad, ell, n), dtype=np.int64)
    a_t = np.ones((k_pad, ell, n), dtype=np.int64)
    dp_t[:k_real] = dp.transpose(1, 0, 2)
    s_t[:k_real] = sign.transpose(1, 0, 2)
    a_t[:k_real] = abs1.transpose(1, 0, 2)
    if a_t.max() - 1 >= 1 << 48:
        raise OverflowError("absolute dot product exceeds the 48-bit range budget")
    dp_vals = encode_signed_vec(dp_t.reshape(-1))
    pre_vals = np.concatenate(
        [s_t.reshape(-1).astype(np.uint64), a_t.reshape(-1).astype(np.uint64)]
    )
    rem = a_t.reshape(-1).astype(np.uint64) - 1
    limbs = np.zeros(4 * k_pad * ell * n, dtype=np.uint64)
    block = k_pad * ell * n
    for j in range(3):
        limbs[j * block : (j + 1) * block] = (rem >> np.uint64(16 * j)) & np.uint64(0xFFFF)
    return dp_vals, pre_vals, limbs


def build_oracle_set(
    train: QuantizedDataset,
    val: QuantizedDataset,
    h: HashParams,
    ht: HarmonicTable,
    pp: PublicParams,
    x_salt: bytes = b"\0",
    buyer_salt: bytes = b"\0",
    audit: bool = True,
) -> OracleSet:
    from .valuation import signed_dot_products

    if train.n != pp.n_train or val.n != pp.n_test or train.dim != pp.dim:
        raise ValueError("dataset shapes do not match public params")
    if h.num_tables != pp.num_tables or h.depth != pp.depth:
        raise ValueError("hash params do not match public params")
    stats = bucket_statistics(train, val, h)
    wt = bucket_weight_tensors(stats, train.labels, ht)
    lam = ht.scale

    dp_tr = signed_dot_products(train.features, h)
    dp_te = signed_dot_products(val.features, h)

    oracles: dict[str, MLEOracle] = {}
    ell, n, t = pp.num_tables, pp.n_train, pp.n_test
    b, c_pad, c = pp.num_buckets, pp.c_pad, pp.num_classes

    oracles["x_tr"] = feature_oracle(train, x_salt, pp.log_n, pp.log_d)
    oracles["x_te"] = feature_oracle(val, buyer_salt, pp.log_t, pp.log_d)

    for side, dp, count, log_count in (("tr", dp_tr, n, pp.log_n), ("te", dp_te, t, pp.log_t)):
        dp_vals, pre_vals, limb_vals = _preamble_tables(dp, pp, count)
        nv = log_count + pp.log_l + pp.log_k
        oracles[f"dp_{side}"] = MLEOracle(nv, dp_vals)
        oracles[f"pre_{side}"] = MLEOracle(nv + 1, pre_vals)
        oracles[f"limb_{side}"] = MLEOracle(nv + 2, limb_vals)

    # histograms: (b, l) and (b, l, c) layouts, class axis on top
    oracles["cnt"] = MLEOracle(pp.depth + pp.log_l, stats.cnt.reshape(-1).astype(np.uint64))
    for name, hist in (("cnt_tr", stats.cnt_tr), ("cnt_te", stats.cnt_te)):
        tbl = np.zeros(c_pad * ell * b, dtype=np.uint64)
        arr = hist.transpose(2, 0, 1).reshape(c, -1).astype(np.uint64)  # (c, l*b)
        tbl[: c * ell * b] = arr.reshape(-1)
        support = np.nonzero(tbl)[0]
        oracles[name] = MLEOracle(pp.depth + pp.log_l + pp.log_c, tbl, support=support)

    # per-sample lookups and weight advice, (h, l) low bits
    def hl(arr):  # (L, N) int -> flat index l*N + h
        return encode_signed_vec(arr.reshape(-1))

    oracles["mhat"] = MLEOracle(pp.log_n + pp.log_l, hl(wt.mhat))
    for name, tens in (("mchat", wt.mchat), ("tchat", wt.tchat)):
        tbl = np.zeros(c_pad * ell * n, dtype=np.uint64)
        arr = tens.transpose(2, 0, 1).reshape(c, -1).astype(np.uint64)
        tbl[: c * ell * n] = arr.reshape(-1)
        support = np.nonzero(tbl)[0]
        oracles[name] = MLEOracle(pp.log_n + pp.log_l + pp.log_c, tbl, support=support)

    harm_fix = np.asarray(ht.fixed, dtype=np.int64)
    oracles["harm"] = MLEOracle(pp.log_n + pp.log_l, hl(harm_fix[wt.mhat]))
    oracles["e"] = MLEOracle(pp.log_n + pp.log_l, hl(wt.edge))
    oracles["dsq"] = MLEOracle(pp.log_n + pp.log_l, hl(wt.denom))
    oracles["t_match"] = MLEOracle(pp.log_n + pp.log_l, hl(wt.t_match))
    oracles["wt_num"] = MLEOracle(pp.log_n + pp.log_l, hl(wt.wt_num))

    denom_field = encode_signed_vec(wt.denom.reshape(-1))
    d_inv = np.zeros_like(denom_field)
    interior = denom_field != 0
    d_inv[interior] = gl_inv(denom_field[interior])
    oracles["d_inv"] = MLEOracle(pp.log_n + pp.log_l, d_inv)

    w_field = gl_mul(encode_signed_vec(wt.wt_num.reshape(-1)), d_inv)
    edge_flat = wt.edge.reshape(-1).astype(bool)
    lam_u = np.uint64(lam % P)
    edge_w = gl_mul(
        np.full(edge_flat.sum(), lam_u, dtype=np.uint64),
        encode_signed_vec((wt.mhat * wt.t_match).reshape(-1)[edge_flat]),
    )
    w_field[edge_flat] = edge_w
    oracles["w"] = MLEOracle(pp.log_n + pp.log_l, w_field)

    # label indicators, class axis on top
    y_tbl = np.zeros(c_pad * n, dtype=np.uint64)
    y_tbl[train.labels.astype(np.int64) * n + np.arange(n)] = 1
    oracles["y_ind"] = MLEOracle(pp.log_n + pp.log_c, y_tbl, support=np.nonzero(y_tbl)[0])
    yt_tbl = np.zeros(c_pad * t, dtype=np.uint64)
    yt_tbl[val.labels.astype(np.int64) * t + np.arange(t)] = 1
    oracles["y_te_ind"] = MLEOracle(pp.log_t + pp.log_c, yt_tbl, support=np.nonzero(yt_tbl)[0])

    # harmonic lookup multiplicities: cells counting each bucket size m = idx + 1
    mult = np.bincount(wt.mhat.reshape(-1) - 1, minlength=n).astype(np.uint64)
    oracles["h_mult"] = MLEOracle(pp.log_n, mult)

    # range-table multiplicities over both sides' limb tensors
    all_limbs = np.concatenate(
        [oracles["limb_tr"].values.astype(np.int64), oracles["limb_te"].values.astype(np.int64)]
    )
    rmult = np.bincount(all_limbs, minlength=1 << 16).astype(np.uint64)
    oracles["rmult16"] = MLEOracle(16, rmult)

    # aggregates: svsum = sum_l W (as committed field values), svavg = svsum / (lam L T)
    w_mat = w_field.reshape(ell, n)
    svsum = np.zeros(n, dtype=np.uint64)
    for l in range(ell):
        svsum = gl_add(svsum, w_mat[l])
    norm = lam % P * (ell * t) % P
    svavg = gl_mul(svsum, np.uint64(f_inv(norm)))
    oracles["svsum"] = MLEOracle(pp.log_n, svsum)
    oracles["svavg"] = MLEOracle(pp.log_n, svavg)

    oset = OracleSet(pp, oracles, stats, wt, dp_tr, dp_te, svsum, svavg)
    if audit:
        audit_oracle_set(oset, train, val, h, ht)
    return oset


def audit_oracle_set(oset: OracleSet, train, val, h, ht):
    """Cheap linear self-checks of every builder invariant; raises on failure."""
    pp = oset.pp
    stats, wt = oset.stats, oset.weights
    n, t, ell = pp.n_train, pp.n_test, pp.num_tables
    if not (stats.cnt.sum(axis=1) == n).all():
        raise AssertionError("cnt rows do not sum to N_train")
    if not (stats.cnt_tr.sum(axis=2) == stats.cnt).all():
        raise AssertionError("class-resolved training histogram does not refine cnt")
    if not (stats.cnt_te.sum(axis=(1, 2)) == t * np.ones(ell, dtype=np.int64)).all():
        raise AssertionError("validation histogram does not conserve N_test")
    l_idx = np.arange(ell)[:, None]
    if not (wt.mhat == stats.cnt[l_idx, stats.train_buckets]).all():
        raise AssertionError("mhat gather mismatch")
    if not ((wt.edge == 1) == (wt.mhat == 1)).all():
        raise AssertionError("edge flag mismatch")
    if not (wt.edge * wt.denom == 0).all():
        raise AssertionError("edge rows must have zero denominator")
    # signed preamble identity on the real hash slots
    two = 2 * oset.dp_tr + 1
    if not (np.abs(two) == np.where(two > 0, two, -two)).all():
        raise AssertionError("abs preamble mismatch")
    # recompute wt_num from phi_fixed on a sample of points
    from .valuation import phi_fixed

    lam = ht.scale
    rng = np.random.default_rng(0)
    for _ in range(min(64, ell * n)):
        l = int(rng.integers(ell))
        i = int(rng.integers(n))
        m = int(wt.mhat[l, i])
        if m == 1:
            continue
        acc = 0
        for cc in range(pp.num_classes):
            hits = int(wt.tchat[l, i, cc])
            if not hits:
                continue
            mp = int(wt.mchat[l, i, cc])
            same = cc == int(train.labels[i])
            fr = phi_fixed(m, mp, same, ht) * hits * lam * m * (m - 1)
            acc += fr
        if acc != wt.wt_num[l, i]:
            raise AssertionError("wt_num does not reproduce the closed form")
    # decoded svavg equals the plaintext rational path exactly
    res = lsh_shapley(train, val, h, ht)
    enc = np.array(res.field_encodings(), dtype=np.uint64)
    if not np.array_equal(enc, oset.svavg_field):
        raise AssertionError("field-decoded svavg differs from the plaintext rationals")
