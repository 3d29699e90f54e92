"""Arithmetic over the 64-bit Goldilocks prime field and its quadratic extension.

Base field: F_p with p = 2^64 - 2^32 + 1.  Elements are canonical integers in
[0, p), held as numpy uint64 arrays so that whole tensors move through one
vectorized kernel call.  The extension field EF = F_p[X] / (X^2 - 7) supplies
the ~128-bit challenge space; 7 is a quadratic non-residue mod p (checked at
import).

All kernels accept and return canonical values.  Internally they exploit
2^64 ≡ 2^32 - 1 and 2^96 ≡ -1 (mod p) to reduce 128-bit products using only
uint64 operations.
"""

from __future__ import annotations

import numpy as np

P = 0xFFFFFFFF_00000001  # 2^64 - 2^32 + 1
EXT_NONRESIDUE = 7  # X^2 = 7 defines the degree-2 extension

_P = np.uint64(P)
_EPS = np.uint64(0xFFFFFFFF)  # 2^32 - 1 == 2^64 mod p
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_U0 = np.uint64(0)
_U1 = np.uint64(1)


class OpCounter:
    """Counts base-field multiplications (by element) for cost accounting."""

    def __init__(self):
        self.muls = 0

    def reset(self):
        self.muls = 0


_counter: OpCounter | None = None


def set_counter(counter: OpCounter | None):
    """Install (or remove) the global multiplication counter."""
    global _counter
    _counter = counter


def _count_mul(n):
    if _counter is not None:
        _counter.muls += int(n)


def as_fvec(x) -> np.ndarray:
    """Coerce ints / lists / arrays to a canonical uint64 field array."""
    if isinstance(x, np.ndarray) and x.dtype == np.uint64:
        return x
    arr = np.asarray(x)
    if arr.dtype == object or arr.dtype.kind in "iu":
        return np.asarray(np.mod(np.asarray(arr, dtype=object), P), dtype=np.uint64)
    raise TypeError(f"cannot coerce dtype {arr.dtype} to field vector")


def _promote(a, b):
    """numpy ufuncs on two 0-d arrays yield warning-prone scalars; lift to 1-d."""
    if getattr(a, "ndim", 1) == 0 and getattr(b, "ndim", 1) == 0:
        return a.reshape(1), b.reshape(1), True
    return a, b, False


def _gl_add_np(a, b):
    a, b, demote = _promote(a, b)
    s = a + b
    s = np.where(s < a, s + _EPS, s)
    s = np.where(s >= _P, s - _P, s)
    return s.reshape(()) if demote else s


def _gl_sub_np(a, b):
    a, b, demote = _promote(a, b)
    d = a - b
    d = np.where(a < b, d - _EPS, d)
    return d.reshape(()) if demote else d


def gl_neg(a):
    if np.ndim(a) == 0:
        a = np.atleast_1d(a)
        return np.where(a == _U0, _U0, _P - a).reshape(())
    return np.where(a == _U0, _U0, _P - a)


def _gl_mul_np(a, b):
    """Vector product mod p via 32-bit limb decomposition."""
    a, b, demote = _promote(a, b)
    a0 = a & _MASK32
    a1 = a >> _SHIFT32
    b0 = b & _MASK32
    b1 = b >> _SHIFT32
    ll = a0 * b0
    lh = a0 * b1
    hl = a1 * b0
    hh = a1 * b1
    mid = lh + hl
    carry_mid = np.where(mid < lh, _U1, _U0)  # overflow of lh + hl adds 2^96
    mid_lo_shift = (mid & _MASK32) << _SHIFT32
    lo = ll + mid_lo_shift
    carry_lo = np.where(lo < ll, _U1, _U0)
    hi = hh + (mid >> _SHIFT32) + (carry_mid << _SHIFT32) + carry_lo
    # reduce hi*2^64 + lo: 2^64 -> 2^32 - 1, 2^96 -> -1
    h0 = hi & _MASK32
    h1 = hi >> _SHIFT32
    t = lo - h1
    t = np.where(lo < h1, t - _EPS, t)
    u = (h0 << _SHIFT32) - h0  # h0 * (2^32 - 1), exact in uint64
    s = t + u
    s = np.where(s < t, s + _EPS, s)
    s = np.where(s >= _P, s - _P, s)
    return s.reshape(()) if demote else s


try:  # compiled elementwise kernels; the numpy path stays as the reference
    import numba as _nb

    @_nb.njit("void(uint64[::1], uint64[::1], uint64[::1])", cache=True)
    def _mul_kernel(a, b, out):  # pragma: no cover - exercised via gl_mul
        for i in range(a.size):
            x, y = a[i], b[i]
            a0 = x & np.uint64(0xFFFFFFFF)
            a1 = x >> np.uint64(32)
            b0 = y & np.uint64(0xFFFFFFFF)
            b1 = y >> np.uint64(32)
            ll = a0 * b0
            lh = a0 * b1
            hl = a1 * b0
            hh = a1 * b1
            mid = lh + hl
            carry_mid = np.uint64(1) if mid < lh else np.uint64(0)
            lo = ll + ((mid & np.uint64(0xFFFFFFFF)) << np.uint64(32))
            carry_lo = np.uint64(1) if lo < ll else np.uint64(0)
            hi = hh + (mid >> np.uint64(32)) + (carry_mid << np.uint64(32)) + carry_lo
            h0 = hi & np.uint64(0xFFFFFFFF)
            h1 = hi >> np.uint64(32)
            t = lo - h1
            if lo < h1:
                t -= np.uint64(0xFFFFFFFF)
            u = (h0 << np.uint64(32)) - h0
            s = t + u
            if s < t:
                s += np.uint64(0xFFFFFFFF)
            if s >= np.uint64(0xFFFFFFFF00000001):
                s -= np.uint64(0xFFFFFFFF00000001)
            out[i] = s

    @_nb.njit("void(uint64[::1], uint64[::1], uint64[::1])", cache=True)
    def _add_kernel(a, b, out):  # pragma: no cover
        for i in range(a.size):
            s = a[i] + b[i]
            if s < a[i]:
                s += np.uint64(0xFFFFFFFF)
            if s >= np.uint64(0xFFFFFFFF00000001):
                s -= np.uint64(0xFFFFFFFF00000001)
            out[i] = s

    @_nb.njit("void(uint64[::1], uint64[::1], uint64[::1])", cache=True)
    def _sub_kernel(a, b, out):  # pragma: no cover
        for i in range(a.size):
            d = a[i] - b[i]
            if a[i] < b[i]:
                d -= np.uint64(0xFFFFFFFF)
            out[i] = d

    def _run_kernel(kernel, a, b):
        a2, b2 = np.broadcast_arrays(a, b)
        shape = a2.shape
        a2 = np.ascontiguousarray(a2, dtype=np.uint64).reshape(-1)
        b2 = np.ascontiguousarray(b2, dtype=np.uint64).reshape(-1)
        out = np.empty(a2.size, dtype=np.uint64)
        kernel(a2, b2, out)
        return out.reshape(shape)

    def gl_mul(a, b):
        _count_mul(max(np.size(a), np.size(b)))
        return _run_kernel(_mul_kernel, a, b)

    def gl_add(a, b):
        return _run_kernel(_add_kernel, a, b)

    def gl_sub(a, b):
        return _run_kernel(_sub_kernel, a, b)

except ImportError:  # pragma: no cover

    def gl_mul(a, b):
        _count_mul(max(np.size(a), np.size(b)))
        return _gl_mul_np(a, b)

    gl_add = _gl_add_np
    gl_sub = _gl_sub_np


def gl_inv(a):
    """Elementwise inverse by exponentiation with p - 2 (zero input is an error)."""
    if np.any(a == _U0):
        raise ZeroDivisionError("inverse of zero in F_p")
    # Addition chain on the fixed exponent p - 2.
    result = np.ones_like(a)
    base = a
    e = P - 2
    while e:
        if e & 1:
            result = gl_mul(result, base)
        e >>= 1
        if e:
            base = gl_mul(base, base)
    return result


def batch_inverse(values: list[int]) -> list[int]:
    """Invert many scalars with one inversion plus multiplications."""
    if any(v % P == 0 for v in values):
        raise ZeroDivisionError("inverse of zero in F_p")
    prefix = [1]
    for v in values:
        prefix.append(prefix[-1] * v % P)
    inv_all = pow(prefix[-1], P - 2, P)
    out = [0] * len(values)
    for i in range(len(values) - 1, -1, -1):
        out[i] = prefix[i] * inv_all % P
        inv_all = inv_all * values[i] % P
    return out


def f_add(a: int, b: int) -> int:
    return (a + b) % P


def f_sub(a: int, b: int) -> int:
    return (a - b) % P


def f_mul(a: int, b: int) -> int:
    return a * b % P


def f_inv(a: int) -> int:
    if a % P == 0:
        raise ZeroDivisionError("inverse of zero in F_p")
    return pow(a, P - 2, P)


def f_from_signed(v: int) -> int:
    """Embed a signed integer: negatives map to p - |v|."""
    return v % P


def encode_signed_vec(v: np.ndarray) -> np.ndarray:
    """Embed an int64 array (|v| < 2^62) as canonical field elements."""
    v = np.asarray(v, dtype=np.int64)
    if v.size and np.abs(v).max() >= 1 << 62:
        raise OverflowError("signed value too large for direct embedding")
    neg = v < 0
    out = v.astype(np.uint64)
    out[neg] = _P - (-v[neg]).astype(np.uint64)
    return out


def f_to_signed(x: int) -> int:
    """Decode a field element known to encode a small signed integer."""
    return x - P if x > P // 2 else x


class EF:
    """Vector of degree-2 extension elements c0 + c1*X, X^2 = 7.

    Wraps a pair of uint64 arrays of equal shape; shape () values act as
    scalars.  Instances are immutable by convention.
    """

    __slots__ = ("c0", "c1")

    def __init__(self, c0, c1=None):
        self.c0 = as_fvec(c0)
        self.c1 = as_fvec(c1 if c1 is not None else np.zeros_like(self.c0))

    @classmethod
    def zero(cls, shape=()):
        z = np.zeros(shape, dtype=np.uint64)
        return cls(z, z.copy())

    @classmethod
    def one(cls, shape=()):
        return cls(np.ones(shape, dtype=np.uint64), np.zeros(shape, dtype=np.uint64))

    @classmethod
    def from_base(cls, vec):
        v = as_fvec(vec)
        return cls(v, np.zeros_like(v))

    @property
    def shape(self):
        return self.c0.shape

    def __len__(self):
        return len(self.c0)

    def __getitem__(self, idx):
        return EF(self.c0[idx], self.c1[idx])

    def copy(self):
        return EF(self.c0.copy(), self.c1.copy())

    def __add__(self, other):
        other = _as_ef(other)
        return EF(gl_add(self.c0, other.c0), gl_add(self.c1, other.c1))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        other = _as_ef(other)
        return EF(gl_sub(self.c0, other.c0), gl_sub(self.c1, other.c1))

    def __rsub__(self, other):
        return _as_ef(other).__sub__(self)

    def __neg__(self):
        return EF(gl_neg(self.c0), gl_neg(self.c1))

    def __mul__(self, other):
        other = _as_ef(other)
        t0 = gl_mul(self.c0, other.c0)
        t1 = gl_mul(self.c1, other.c1)
        t2 = gl_mul(gl_add(self.c0, self.c1), gl_add(other.c0, other.c1))
        c0 = gl_add(t0, gl_mul(np.uint64(EXT_NONRESIDUE), t1))
        c1 = gl_sub(t2, gl_add(t0, t1))
        return EF(c0, c1)

    def __rmul__(self, other):
        return self.__mul__(other)

    def inv(self):
        """Inverse via the norm map: (c0 - c1 X) / (c0^2 - 7 c1^2)."""
        norm = gl_sub(
            gl_mul(self.c0, self.c0),
            gl_mul(np.uint64(EXT_NONRESIDUE), gl_mul(self.c1, self.c1)),
        )
        if np.any((norm == _U0) & ~((self.c0 == _U0) & (self.c1 == _U0))):
            # norm vanishes only at zero because X^2 - 7 is irreducible
            raise ArithmeticError("extension norm vanished on nonzero input")
        n_inv = gl_inv(norm)
        return EF(gl_mul(self.c0, n_inv), gl_mul(gl_neg(self.c1), n_inv))

    def sum(self):
        """Sum of all entries, returned as a scalar EF."""
        acc0 = _U0
        acc1 = _U0
        # pairwise reduction keeps everything in vectorized adds
        c0, c1 = self.c0.ravel(), self.c1.ravel()
        while c0.size > 1:
            if c0.size % 2 == 1:
                acc0 = gl_add(acc0, c0[-1])
                acc1 = gl_add(acc1, c1[-1])
                c0, c1 = c0[:-1], c1[:-1]
            c0 = gl_add(c0[0::2], c0[1::2])
            c1 = gl_add(c1[0::2], c1[1::2])
        if c0.size == 1:
            acc0 = gl_add(acc0, c0[0])
            acc1 = gl_add(acc1, c1[0])
        return EF(acc0, acc1)

    def is_zero(self) -> bool:
        return bool(np.all(self.c0 == _U0) and np.all(self.c1 == _U0))

    def __eq__(self, other):
        other = _as_ef(other)
        return bool(np.array_equal(self.c0, other.c0) and np.array_equal(self.c1, other.c1))

    def __hash__(self):
        if self.shape != ():
            raise TypeError("only scalar EF values are hashable")
        return hash((int(self.c0), int(self.c1)))

    def __repr__(self):
        if self.shape == ():
            return f"EF({int(self.c0)}, {int(self.c1)})"
        return f"EF(shape={self.shape})"

    def tolist(self):
        return list(zip(self.c0.ravel().tolist(), self.c1.ravel().tolist()))

    def to_bytes(self) -> bytes:
        """Little-endian 8-byte limbs, c0 then c1, row-major."""
        out = np.empty(self.c0.size * 2, dtype="<u8")
        out[0::2] = self.c0.ravel()
        out[1::2] = self.c1.ravel()
        return out.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, shape=None):
        raw = np.frombuffer(data, dtype="<u8")
        c0 = raw[0::2].astype(np.uint64)
        c1 = raw[1::2].astype(np.uint64)
        if shape is not None:
            c0 = c0.reshape(shape)
            c1 = c1.reshape(shape)
        elif c0.size == 1:
            c0 = c0.reshape(())
            c1 = c1.reshape(())
        if np.any(c0 >= _P) or np.any(c1 >= _P):
            raise ValueError("non-canonical field element in serialized data")
        return cls(c0, c1)


def _as_ef(x) -> EF:
    if isinstance(x, EF):
        return x
    if isinstance(x, (int, np.integer)):
        return EF(as_fvec(int(x) % P))
    if isinstance(x, np.ndarray):
        return EF.from_base(x)
    raise TypeError(f"cannot coerce {type(x)} to EF")


def ef_scalar(c0: int, c1: int = 0) -> EF:
    return EF(as_fvec(c0 % P), as_fvec(c1 % P))


def check_nonresidue():
    """The extension is a field iff 7 is a non-residue: 7^((p-1)/2) = p - 1."""
    if pow(EXT_NONRESIDUE, (P - 1) // 2, P) != P - 1:
        raise ArithmeticError("extension non-residue check failed; X^2 - 7 reducible")


check_nonresidue()
