"""Radix-2 number-theoretic transform over the Goldilocks field.

Works along the last axis of a uint64 array so a whole matrix of rows is
encoded in one call.  Sizes must be powers of two dividing 2^32 (the two-adic
subgroup order of F_p^*).
"""

from __future__ import annotations

import numpy as np

from .field import P, gl_add, gl_sub, gl_mul, gl_inv

GENERATOR = 7  # multiplicative generator; its non-residue property gives full 2-adicity
MAX_LOG_SIZE = 32

_root_cache: dict[tuple[int, bool], np.ndarray] = {}


def _primitive_root(size: int) -> int:
    return pow(GENERATOR, (P - 1) // size, P)


def _twiddles(size: int, inverse: bool) -> np.ndarray:
    """Powers w^0..w^(size/2 - 1) of the order-`size` root (or its inverse)."""
    key = (size, inverse)
    if key not in _root_cache:
        w = _primitive_root(size)
        if inverse:
            w = pow(w, P - 2, P)
        out = np.empty(size // 2, dtype=np.uint64)
        acc = 1
        for i in range(size // 2):
            out[i] = acc
            acc = acc * w % P
        _root_cache[key] = out
    return _root_cache[key]


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.uint64)
    rev = np.zeros_like(idx)
    for _ in range(bits):
        rev = (rev << np.uint64(1)) | (idx & np.uint64(1))
        idx >>= np.uint64(1)
    return rev.astype(np.int64)


def ntt(values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Forward or inverse NTT along the last axis; exact roundtrip."""
    n = values.shape[-1]
    if n == 0 or n & (n - 1):
        raise ValueError(f"NTT size must be a power of two, got {n}")
    if n.bit_length() - 1 > MAX_LOG_SIZE:
        raise ValueError(f"NTT size 2^{n.bit_length() - 1} exceeds two-adic limit")
    if n == 1:
        return values.copy()
    a = values[..., _bit_reverse_indices(n)]
    m = 1
    while m < n:
        tw = _twiddles(2 * m, inverse)
        shape = a.shape[:-1] + (n // (2 * m), 2, m)
        blk = a.reshape(shape)
        lo = blk[..., 0, :]
        t = gl_mul(blk[..., 1, :], tw)
        blk_new = np.empty_like(blk)
        blk_new[..., 0, :] = gl_add(lo, t)
        blk_new[..., 1, :] = gl_sub(lo, t)
        a = blk_new.reshape(a.shape)
        m *= 2
    if inverse:
        a = gl_mul(a, _size_inverse(n))
    return a


_size_inv_cache: dict[int, np.ndarray] = {}


def _size_inverse(n: int) -> np.ndarray:
    if n not in _size_inv_cache:
        _size_inv_cache[n] = np.asarray(pow(n, P - 2, P), dtype=np.uint64)
    return _size_inv_cache[n]


def rs_encode(rows: np.ndarray) -> np.ndarray:
    """Rate-1/2 systematic Reed-Solomon encode of each row.

    Interpolates each row over the size-w subgroup and re-evaluates over the
    size-2w subgroup; the original row appears at the even codeword positions.
    """
    w = rows.shape[-1]
    coeffs = ntt(rows, inverse=True)
    padded = np.zeros(rows.shape[:-1] + (2 * w,), dtype=np.uint64)
    padded[..., :w] = coeffs
    return ntt(padded)
