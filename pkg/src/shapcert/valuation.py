"""Bucket-collision Shapley valuation in the clear.

A SimHash table hashes every training and validation point into one of 2^K
buckets; the Shapley value of a training point under the bucket-vote utility
depends only on the bucket size M, the same-label count M+, and the harmonic
number H_M, via a closed form that brute-force coalition enumeration
certifies exactly.  Scores average over tables and validation points and are
carried as exact rationals; a fixed-point harmonic table (scale lambda)
makes the rational pipeline reproducible inside the proof system's field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .field import P, f_inv

S_X_DEFAULT = 1 << 12
S_R_DEFAULT = 1 << 12
LAMBDA_DEFAULT = 1 << 20


# -- harmonic table ----------------------------------------------------------


class HarmonicTable:
    """Exact harmonic numbers H_1..H_n plus their fixed-point roundings.

    fixed[m] = round(scale * H_m), rounding half away from zero upward; the
    exact rationals ride along so the closed form can be checked against the
    enumeration oracle without rounding error.
    """

    def __init__(self, n: int, scale: int = LAMBDA_DEFAULT):
        if n < 1:
            raise ValueError("harmonic table needs n >= 1")
        if scale < (1 << 10):
            raise ValueError("harmonic scale must be at least 2^10")
        self.n = n
        self.scale = scale
        self.exact = [Fraction(0)] * (n + 1)
        self.fixed = [0] * (n + 1)
        acc = Fraction(0)
        prev = 0
        for m in range(1, n + 1):
            acc += Fraction(1, m)
            self.exact[m] = acc
            num, den = acc.numerator, acc.denominator
            rounded = (2 * scale * num + den) // (2 * den)
            if rounded <= prev:
                raise ValueError("harmonic scale too small for strict monotonicity")
            self.fixed[m] = rounded
            prev = rounded

    def fixed_fraction(self, m: int) -> Fraction:
        return Fraction(self.fixed[m], self.scale)


def harmonic_table(n: int, scale: int = LAMBDA_DEFAULT) -> HarmonicTable:
    return HarmonicTable(n, scale)


# -- scores ------------------------------------------------------------------


@dataclass(frozen=True)
class RationalScore:
    """Exact score as numerator/denominator plus its field encoding."""

    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0:
            raise ValueError("denominator must be positive")

    @classmethod
    def from_fraction(cls, fr: Fraction) -> "RationalScore":
        return cls(fr.numerator, fr.denominator)

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def field_encoding(self) -> int:
        den = self.denominator % P
        if den == 0:
            raise ZeroDivisionError("denominator not invertible mod p")
        return (self.numerator % P) * f_inv(den) % P

    def __float__(self):
        return self.numerator / self.denominator


def phi_pm(m: int, m_plus: int, same_label: bool, harm: Fraction) -> Fraction:
    """Closed-form per-validation-point weight from (M, M+, H_M)."""
    if m < 1:
        raise ValueError("a training point always occupies its own bucket (M >= 1)")
    if not 0 <= m_plus <= m:
        raise ValueError("need 0 <= M+ <= M")
    if same_label and m_plus < 1:
        raise ValueError("a same-label collider implies M+ >= 1")
    if m == 1:
        return Fraction(1) if same_label else Fraction(0)
    denom = m * (m - 1)
    if same_label:
        return harm / m - Fraction(m_plus - 1) * (harm - 1) / denom
    return -Fraction(m_plus) * (harm - 1) / denom


def phi_closed_form(m: int, m_plus: int, same_label: bool, ht: HarmonicTable) -> RationalScore:
    """Exact-harmonic closed form (the variant the enumeration oracle certifies)."""
    harm = ht.exact[m] if m >= 1 else None
    if harm is None:
        raise ValueError("a training point always occupies its own bucket (M >= 1)")
    return RationalScore.from_fraction(phi_pm(m, m_plus, same_label, harm))


def phi_fixed(m: int, m_plus: int, same_label: bool, ht: HarmonicTable) -> Fraction:
    """Committed-scale variant: identical formula with H_M -> fixed[m]/scale."""
    if m < 1:
        raise ValueError("a training point always occupies its own bucket (M >= 1)")
    return phi_pm(m, m_plus, same_label, ht.fixed_fraction(m))


def brute_force_bucket_shapley(bucket_labels: list[int], y_t: int) -> list[RationalScore]:
    """Exact Shapley of the bucket-vote utility by full coalition enumeration.

    Utility of a coalition S: fraction of S whose label equals y_t (0 for the
    empty coalition).  All listed points are bucket members by definition.
    """
    m = len(bucket_labels)
    if m > 20:
        raise ValueError("coalition enumeration capped at 20 players")
    same = [1 if y == y_t else 0 for y in bucket_labels]

    fact = [math.factorial(i) for i in range(m + 1)]

    def utility(mask: int) -> Fraction:
        size = mask.bit_count()
        if size == 0:
            return Fraction(0)
        good = sum(same[j] for j in range(m) if mask >> j & 1)
        return Fraction(good, size)

    utils = [utility(mask) for mask in range(1 << m)]
    scores = []
    for i in range(m):
        acc = Fraction(0)
        others = [j for j in range(m) if j != i]
        for sub in range(1 << (m - 1)):
            mask = 0
            for bit, j in enumerate(others):
                if sub >> bit & 1:
                    mask |= 1 << j
            s = mask.bit_count()
            w = Fraction(fact[s] * fact[m - s - 1], fact[m])
            acc += w * (utils[mask | (1 << i)] - utils[mask])
        scores.append(RationalScore.from_fraction(acc))
    return scores


# -- datasets and hashing ----------------------------------------------------


@dataclass
class QuantizedDataset:
    """Fixed-point features (scale s_x) with labels; raw floats kept for metrics."""

    features: np.ndarray  # int64, (N, d)
    labels: np.ndarray  # int64, (N,), values in [0, num_classes)
    num_classes: int
    scale: int = S_X_DEFAULT
    raw: np.ndarray | None = None

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError("features (N, d) and labels (N,) required")
        if np.abs(self.features).max(initial=0) > self.scale:
            raise ValueError("quantized feature exceeds scale; inputs must be l2-normalized")
        if self.labels.min(initial=0) < 0 or self.labels.max(initial=0) >= self.num_classes:
            raise ValueError("label out of range")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @classmethod
    def from_raw(cls, raw: np.ndarray, labels, num_classes=None, scale=S_X_DEFAULT):
        feats = quantize_features(raw, scale)
        labels = np.asarray(labels, dtype=np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1
        return cls(feats, labels, num_classes, scale, raw=np.asarray(raw, dtype=np.float64))


def quantize_features(raw: np.ndarray, scale: int = S_X_DEFAULT) -> np.ndarray:
    """round(scale * value) for l2-normalized rows; rejects unnormalized input."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size and np.abs(raw).max() > 1.0 + 1e-9:
        raise ValueError("feature magnitude exceeds 1; l2-normalize rows first")
    return np.rint(raw * scale).astype(np.int64)


@dataclass
class HashParams:
    """SimHash family: L tables of K quantized Gaussian hyperplanes each."""

    num_tables: int
    depth: int
    seed: int
    dim: int
    scale: int = S_R_DEFAULT
    projections: np.ndarray = field(init=False)  # int64, (L, K, d)

    def __post_init__(self):
        self.projections = gaussian_projections(
            self.seed, self.num_tables, self.depth, self.dim, self.scale
        )

    @property
    def num_buckets(self):
        return 1 << self.depth


def gaussian_projections(seed: int, num_tables: int, depth: int, dim: int, scale: int) -> np.ndarray:
    """Quantized Box-Muller normals from a Philox counter stream (public)."""
    count = num_tables * depth * dim
    gen = np.random.Generator(np.random.Philox(key=seed))
    u = gen.random(2 * count)
    u1 = 1.0 - u[0::2]
    u2 = u[1::2]
    g = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return np.rint(g[:count] * scale).astype(np.int64).reshape(num_tables, depth, dim)


def signed_dot_products(features: np.ndarray, h: HashParams) -> np.ndarray:
    """Integer dot products <r_lk, x_i>, shape (L, K, N)."""
    if features.shape[1] != h.dim:
        raise ValueError("feature dimension does not match hash params")
    dp = np.einsum("lkd,nd->lkn", h.projections, features, dtype=np.int64)
    if np.abs(dp).max(initial=0) >= 1 << 62:
        raise OverflowError("dot product exceeds the fixed-point budget")
    return dp


def simhash_assign(data: QuantizedDataset, h: HashParams) -> np.ndarray:
    """Bucket id per (table, point): bit k = sign(2 <r,x> + 1) mapped to {0,1}."""
    dp = signed_dot_products(data.features, h)
    bits = (2 * dp + 1 > 0).astype(np.int64)
    weights = (1 << np.arange(h.depth, dtype=np.int64))[None, :, None]
    return (bits * weights).sum(axis=1)


@dataclass
class BucketStats:
    cnt: np.ndarray  # (L, B) training histogram
    cnt_tr: np.ndarray  # (L, B, C) per-class training histogram
    cnt_te: np.ndarray  # (L, B, C) per-class validation histogram
    train_buckets: np.ndarray  # (L, N)
    val_buckets: np.ndarray  # (L, T)


def bucket_statistics(train: QuantizedDataset, val: QuantizedDataset, h: HashParams) -> BucketStats:
    if train.num_classes != val.num_classes:
        raise ValueError("train/val class counts differ")
    c = train.num_classes
    b = h.num_buckets
    tb = simhash_assign(train, h)
    vb = simhash_assign(val, h)
    ell = h.num_tables
    cnt = np.zeros((ell, b), dtype=np.int64)
    cnt_tr = np.zeros((ell, b, c), dtype=np.int64)
    cnt_te = np.zeros((ell, b, c), dtype=np.int64)
    for l in range(ell):
        cnt[l] = np.bincount(tb[l], minlength=b)
        np.add.at(cnt_tr[l], (tb[l], train.labels), 1)
        if val.n:
            np.add.at(cnt_te[l], (vb[l], val.labels), 1)
    return BucketStats(cnt, cnt_tr, cnt_te, tb, vb)


# -- weight tensors (shared with the witness builder) ------------------------


@dataclass
class WeightTensors:
    """Integer per-(table, point) weight data in the committed fixed-point scale."""

    mhat: np.ndarray  # (L, N) bucket size at the point's bucket
    mchat: np.ndarray  # (L, N, C) per-class training count at the bucket
    tchat: np.ndarray  # (L, N, C) per-class validation count at the bucket
    t_match: np.ndarray  # (L, N) validation hits with the point's own label
    edge: np.ndarray  # (L, N) 1 iff mhat == 1
    denom: np.ndarray  # (L, N) mhat * (mhat - 1)
    wt_num: np.ndarray  # (L, N) scaled interior numerator (signed)


def bucket_weight_tensors(stats: BucketStats, labels: np.ndarray, ht: HarmonicTable) -> WeightTensors:
    ell, n = stats.train_buckets.shape
    lam = ht.scale
    tb = stats.train_buckets
    l_idx = np.arange(ell)[:, None]
    mhat = stats.cnt[l_idx, tb]
    mchat = stats.cnt_tr[l_idx, tb, :]
    tchat = stats.cnt_te[l_idx, tb, :]
    t_match = np.take_along_axis(tchat, labels[None, :, None].repeat(ell, 0), axis=2)[:, :, 0]
    edge = (mhat == 1).astype(np.int64)
    denom = mhat * (mhat - 1)
    hfix = np.asarray(ht.fixed, dtype=np.int64)
    htilde = hfix[mhat]
    hm1 = htilde - lam
    mchat_y = np.take_along_axis(mchat, labels[None, :, None].repeat(ell, 0), axis=2)[:, :, 0]
    cross = (tchat * mchat).sum(axis=2) - t_match * mchat_y
    wt_num = t_match * ((mhat - 1) * htilde - (mchat_y - 1) * hm1) - cross * hm1
    return WeightTensors(mhat, mchat, tchat, t_match, edge, denom, wt_num)


@dataclass
class ValuationResult:
    svavg: list[RationalScore]
    svsum: list[Fraction]

    def as_floats(self) -> np.ndarray:
        return np.array([float(s) for s in self.svavg])

    def field_encodings(self) -> list[int]:
        return [s.field_encoding() for s in self.svavg]


def lsh_shapley(
    train: QuantizedDataset,
    val: QuantizedDataset,
    h: HashParams,
    ht: HarmonicTable,
    harmonic: str = "fixed",
) -> ValuationResult:
    """Per-training-point scores: mean of phi over tables and validation points.

    harmonic="fixed" (default) uses the committed fixed-point harmonic table,
    matching the proof-system encoding bit for bit; "exact" uses true
    harmonic numbers.
    """
    if val.n == 0:
        raise ValueError("empty validation set: score normalization undefined")
    if ht.n < train.n:
        raise ValueError("harmonic table shorter than the training set")
    stats = bucket_statistics(train, val, h)
    ell, n = stats.train_buckets.shape
    norm = h.num_tables * val.n
    if harmonic == "fixed":
        wt = bucket_weight_tensors(stats, train.labels, ht)
        lam = ht.scale
        svsum = []
        for i in range(n):
            acc = Fraction(0)
            for l in range(ell):
                if wt.edge[l, i]:
                    acc += Fraction(int(wt.t_match[l, i]))
                else:
                    acc += Fraction(int(wt.wt_num[l, i]), lam * int(wt.denom[l, i]))
            svsum.append(acc)
    elif harmonic == "exact":
        svsum = [Fraction(0)] * n
        for l in range(ell):
            for i in range(n):
                m = int(stats.cnt[l, stats.train_buckets[l, i]])
                b = stats.train_buckets[l, i]
                acc = Fraction(0)
                for c in range(train.num_classes):
                    hits = int(stats.cnt_te[l, b, c])
                    if hits == 0:
                        continue
                    m_plus = int(stats.cnt_tr[l, b, c])
                    same = c == int(train.labels[i])
                    acc += hits * phi_pm(m, m_plus, same, ht.exact[m])
                svsum[i] += acc
    else:
        raise ValueError("harmonic must be 'fixed' or 'exact'")
    svavg = [RationalScore.from_fraction(s / norm) for s in svsum]
    return ValuationResult(svavg, svsum)


# -- KNN-Shapley baseline -----------------------------------------------------


def _distances(train_raw: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(train_raw - q[None, :], axis=1)


def knn_shapley_baseline(train: QuantizedDataset, val: QuantizedDataset, k: int) -> np.ndarray:
    """Closed-form KNN-Shapley recurrence averaged over the validation set."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = train.n
    if k > n:
        raise ValueError("k exceeds the training-set size")
    if train.raw is None or val.raw is None:
        raise ValueError("float features required for the KNN baseline")
    scores = np.zeros(n)
    for t in range(val.n):
        d = _distances(train.raw, val.raw[t])
        order = np.lexsort((np.arange(n), d))  # distance, then index
        s = np.zeros(n)
        match = (train.labels[order] == val.labels[t]).astype(np.float64)
        s[n - 1] = match[n - 1] / n
        for j in range(n - 2, -1, -1):
            s[j] = s[j + 1] + (match[j] - match[j + 1]) * min(k, j + 1) / (k * (j + 1))
        scores[order] += s
    return scores / val.n


def brute_force_knn_shapley(train: QuantizedDataset, val: QuantizedDataset, k: int) -> np.ndarray:
    """Exact Shapley of the k-NN vote utility by coalition enumeration (N <= 12)."""
    n = train.n
    if n > 12:
        raise ValueError("coalition enumeration capped at N = 12")
    fact = [math.factorial(i) for i in range(n + 1)]
    scores = np.zeros(n)
    for t in range(val.n):
        d = _distances(train.raw, val.raw[t])
        order = np.lexsort((np.arange(n), d))
        match = (train.labels == val.labels[t]).astype(np.float64)

        def utility(mask: int) -> float:
            picked = [j for j in order if mask >> j & 1]
            if not picked:
                return 0.0
            top = picked[: min(k, len(picked))]
            return sum(match[j] for j in top) / k

        utils = [utility(mask) for mask in range(1 << n)]
        for i in range(n):
            acc = 0.0
            others = [j for j in range(n) if j != i]
            for sub in range(1 << (n - 1)):
                mask = 0
                for bit, j in enumerate(others):
                    if sub >> bit & 1:
                        mask |= 1 << j
                sz = mask.bit_count()
                w = fact[sz] * fact[n - sz - 1] / fact[n]
                acc += w * (utils[mask | (1 << i)] - utils[mask])
            scores[i] += acc
    return scores / val.n


# -- rank concentration probe --------------------------------------------------


def rank_concentration_probe(
    train: QuantizedDataset,
    val: QuantizedDataset,
    seeds: list[int],
    l_grid: list[int],
    depth: int,
    knn_k: int = 5,
    ht: HarmonicTable | None = None,
) -> dict[int, float]:
    """Mean Spearman agreement between LSH-Shapley and KNN-Shapley ranks per L."""
    from scipy.stats import spearmanr

    if ht is None:
        ht = HarmonicTable(train.n)
    knn = knn_shapley_baseline(train, val, knn_k)
    out = {}
    for l in sorted(l_grid):
        vals = []
        for seed in seeds:
            h = HashParams(l, depth, seed, train.dim)
            res = lsh_shapley(train, val, h, ht)
            rho = spearmanr(res.as_floats(), knn).statistic
            vals.append(float(rho))
        out[l] = float(np.mean(vals))
    return out
