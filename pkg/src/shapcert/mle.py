"""Multilinear-extension tables over the Boolean cube and the eq kernel.

Index convention: table index bit i corresponds to point coordinate i, so
point[0] binds the least-significant bit.  Folding a table at challenge r
eliminates coordinate 0 and pairs adjacent entries.
"""

from __future__ import annotations

import numpy as np

from .field import EF, as_fvec


class MLEOracle:
    """Evaluation table of a multilinear polynomial on {0,1}^num_vars.

    `values` is a uint64 array (base field) or an EF vector of length
    2^num_vars.  `support` is an optional sorted index array that must
    contain every nonzero position (a superset is fine).
    """

    __slots__ = ("num_vars", "values", "support")

    def __init__(self, num_vars: int, values, support=None):
        if isinstance(values, EF):
            size = values.shape[0]
        else:
            values = as_fvec(values)
            size = values.shape[0]
        if size != 1 << num_vars:
            raise ValueError(f"table length {size} != 2^{num_vars}")
        if support is not None:
            support = np.asarray(support, dtype=np.int64)
            vals = values.c0 if isinstance(values, EF) else values
            nz = np.nonzero(vals)[0] if not isinstance(values, EF) else np.nonzero(
                values.c0 | values.c1
            )[0]
            if not np.isin(nz, support).all():
                raise ValueError("support mask misses a nonzero entry")
        self.num_vars = num_vars
        self.values = values
        self.support = support

    def as_ef(self) -> EF:
        return self.values if isinstance(self.values, EF) else EF.from_base(self.values)

    def eval(self, point: EF) -> EF:
        """Multilinear extension at `point` (length num_vars), O(2^n) time."""
        if point.shape[0] != self.num_vars:
            raise ValueError(f"point has {point.shape[0]} coords, oracle has {self.num_vars} vars")
        return mle_eval_ef(self.as_ef(), point)

    def is_boolean_point(self, point: EF):
        bits = []
        for i in range(point.shape[0]):
            c = point[i]
            if c == EF.zero():
                bits.append(0)
            elif c == EF.one():
                bits.append(1)
            else:
                return None
        return sum(b << i for i, b in enumerate(bits))


def mle_eval_ef(table: EF, point: EF) -> EF:
    """Fold an EF table down to its evaluation at an extension point."""
    t = table
    for i in range(point.shape[0]):
        r = point[i]
        lo = t[0::2]
        hi = t[1::2]
        t = lo + r * (hi - lo)
    return t[0]


def eq_eval(r: EF, j: EF) -> EF:
    """eq(r, j) = prod_k (r_k j_k + (1 - r_k)(1 - j_k))."""
    if r.shape != j.shape:
        raise ValueError("eq_eval needs equal-length points")
    acc = EF.one()
    one = EF.one()
    for k in range(r.shape[0]):
        rk, jk = r[k], j[k]
        acc = acc * (rk * jk + (one - rk) * (one - jk))
    return acc


def eq_table(r: EF) -> EF:
    """All 2^n values eq(r, b) for Boolean b, index bit i bound to r[i]."""
    w = EF.one((1,))
    one = EF.one()
    for i in range(r.shape[0]):
        ri = r[i]
        lo = w * (one - ri)
        hi = w * ri
        w = EF(
            np.concatenate([lo.c0, hi.c0]),
            np.concatenate([lo.c1, hi.c1]),
        )
    return w


def point_concat(*points: EF) -> EF:
    return EF(
        np.concatenate([p.c0.reshape(-1) for p in points]),
        np.concatenate([p.c1.reshape(-1) for p in points]),
    )


def point_int(value: int, bits: int) -> EF:
    """Boolean point encoding `value` over `bits` coordinates, LSB first."""
    c0 = np.array([(value >> i) & 1 for i in range(bits)], dtype=np.uint64)
    return EF(c0, np.zeros(bits, dtype=np.uint64))
