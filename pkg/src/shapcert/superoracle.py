"""Super-oracle packing: one commitment and opening for a family of tables.

A family f_0..f_{Q'-1} of multilinear tables on {0,1}^n packs into a single
table F on {0,1}^(n + log Q) with F(x, j) = f_j(x) (index j in the top
coordinates, zero-padded to the next power of two).  One opening of F at
(x*, r) plus the recovery identity F(x*, r) = sum_j eq(r, j) v_j binds all
the prover-supplied values v_j = f_j(x*) with error log Q / |EF|.
"""

from __future__ import annotations

import numpy as np

from .field import EF
from .mle import MLEOracle, eq_table


def pack_family(family: list[MLEOracle]) -> MLEOracle:
    """Concatenate a family into its packed super-oracle (zero-padded)."""
    if not family:
        raise ValueError("cannot pack an empty family")
    n = family[0].num_vars
    for o in family:
        if o.num_vars != n:
            raise ValueError("family members must share num_vars")
    q = 1
    while q < len(family):
        q *= 2
    log_q = q.bit_length() - 1
    size = 1 << n
    values = np.zeros(q * size, dtype=np.uint64)
    supports = []
    have_masks = all(o.support is not None for o in family)
    for j, o in enumerate(family):
        if isinstance(o.values, EF):
            raise TypeError("packing expects base-field tables")
        values[j * size : (j + 1) * size] = o.values
        if have_masks:
            supports.append(o.support + j * size)
    mask = np.concatenate(supports) if have_masks and supports else None
    return MLEOracle(n + log_q, values, support=mask)


def recovery_value(r: EF, supplied: list[EF]) -> EF:
    """sum_j eq(r, j) * v_j over the padded index range."""
    q = 1 << r.shape[0]
    if len(supplied) != q:
        raise ValueError(f"need {q} supplied values, got {len(supplied)}")
    weights = eq_table(r)
    out = EF.zero()
    for j, v in enumerate(supplied):
        out = out + weights[j] * v
    return out


def verify_recovery(opened: EF, r: EF, supplied: list[EF]) -> bool:
    """Accept iff the packed opening matches the eq-weighted supplied values."""
    return opened == recovery_value(r, supplied)
