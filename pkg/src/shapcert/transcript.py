"""Fiat-Shamir transcript: a SHA-256 duplex absorbing labeled byte strings.

Every absorb is length-prefixed and domain-tagged, so (label="ab", data="c")
and (label="a", data="bc") reach different states.  Every challenge draw
advances the state, even a zero-length draw.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .field import P, EF

HASH_ID = "sha256"


def _h(*parts: bytes) -> bytes:
    d = hashlib.sha256()
    for p in parts:
        d.update(p)
    return d.digest()


class Transcript:
    def __init__(self, domain: bytes = b"shapcert/v1"):
        self.state = _h(b"init", struct.pack("<I", len(domain)), domain)

    def clone(self) -> "Transcript":
        t = Transcript.__new__(Transcript)
        t.state = self.state
        return t

    def absorb(self, label: bytes, data: bytes):
        if not label:
            raise ValueError("transcript label must be nonempty")
        self.state = _h(
            self.state,
            b"abs",
            struct.pack("<I", len(label)),
            label,
            struct.pack("<Q", len(data)),
            data,
        )

    def absorb_ext(self, label: bytes, value: EF):
        self.absorb(label, value.to_bytes())

    def challenge_bytes(self, label: bytes, n: int) -> bytes:
        if not label:
            raise ValueError("transcript label must be nonempty")
        out = b""
        ctr = 0
        while len(out) < n:
            out += _h(self.state, b"sqz", struct.pack("<I", len(label)), label, struct.pack("<I", ctr))
            ctr += 1
        self.state = _h(self.state, b"adv", struct.pack("<I", len(label)), label, struct.pack("<Q", n))
        return out[:n]

    def challenge_base(self, label: bytes, count: int) -> np.ndarray:
        """Base-field challenges, each reduced from 128 squeezed bits (bias <= 2^-64)."""
        raw = self.challenge_bytes(label, 16 * count)
        out = np.empty(count, dtype=np.uint64)
        for i in range(count):
            out[i] = int.from_bytes(raw[16 * i : 16 * i + 16], "little") % P
        return out

    def challenge_ext(self, label: bytes, count: int) -> EF:
        """Vector of `count` extension-field challenges."""
        limbs = self.challenge_base(label, 2 * count)
        return EF(limbs[0::2].copy(), limbs[1::2].copy())

    def challenge_indices(self, label: bytes, count: int, bound: int) -> list[int]:
        raw = self.challenge_bytes(label, 8 * count)
        return [int.from_bytes(raw[8 * i : 8 * i + 8], "little") % bound for i in range(count)]
