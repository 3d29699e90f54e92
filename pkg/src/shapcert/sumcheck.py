"""Generic batched sumcheck with a sparsity-aware prover path.

A batch proves sum_z F(z) over {0,1}^n for F = sum_i coeff_i * member_i(z),
where each member is a polynomial in a shared set of multilinear factor
tables: member = sum_j c_j * prod_k (alpha_k * f_k(z) + beta_k).  Round
messages are the (D+1) evaluations of the round univariate at 0..D.

Sparse factors carry a support mask (superset of nonzero cells).  Product
terms whose factors are all masked iterate only the mask intersection; the
emitted messages are bit-identical to the dense path because skipped cells
contribute zero to every evaluation point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import EF, P, gl_add
from .transcript import Transcript

IDENTITY = (1, 0)  # (alpha, beta) leaving the factor unchanged


@dataclass
class Ref:
    """Affine image alpha * f + beta of the named factor."""

    factor: str
    alpha: EF = None
    beta: EF = None

    def __post_init__(self):
        if self.alpha is None:
            self.alpha = EF.one()
        if self.beta is None:
            self.beta = EF.zero()

    @property
    def is_identity(self):
        return self.alpha == EF.one() and self.beta == EF.zero()


@dataclass
class Term:
    coeff: EF
    refs: list[Ref]


@dataclass
class Member:
    """One claim folded into a batch: claimed_sum = sum_z member(z)."""

    name: str
    terms: list[Term]
    degree: int

    def check_degree(self):
        actual = max((len(t.refs) for t in self.terms), default=0)
        if actual > self.degree:
            raise ValueError(f"member {self.name}: term degree {actual} > bound {self.degree}")


class Factor:
    """Prover-side multilinear table, folded in place round by round."""

    def __init__(self, name: str, table: EF, mask: np.ndarray | None = None):
        self.name = name
        self.table = table
        self.mask = None if mask is None else np.asarray(mask, dtype=np.int64)

    @classmethod
    def from_base(cls, name, values, mask=None):
        return cls(name, EF.from_base(values), mask)


def member_sum(member: Member, factors: dict[str, Factor]) -> EF:
    """Mechanical cube sum of a member (no honesty assumptions)."""
    total = EF.zero()
    for term in member.terms:
        prod = None
        for ref in term.refs:
            v = factors[ref.factor].table
            if not ref.is_identity:
                v = ref.alpha * v + ref.beta
            prod = v if prod is None else prod * v
        s = prod.sum() if prod is not None else EF.zero()
        total = total + term.coeff * s
    return total


def eval_member(member: Member, finals: dict[str, EF]) -> EF:
    """Member value from per-factor point evaluations."""
    total = EF.zero()
    for term in member.terms:
        prod = term.coeff
        for ref in term.refs:
            prod = prod * (ref.alpha * finals[ref.factor] + ref.beta)
        total = total + prod
    return total


def lagrange_interp(evals: list[EF], x: EF) -> EF:
    """Interpolate the degree-D univariate given values at 0..D."""
    d = len(evals) - 1
    if d == 0:
        return evals[0]
    # prefix[k] = prod_{m<k}(x-m), suffix[k] = prod_{m>k}(x-m)
    diffs = [x - EF(np.asarray(m, dtype=np.uint64)) for m in range(d + 1)]
    prefix = [EF.one()]
    for m in range(d):
        prefix.append(prefix[-1] * diffs[m])
    suffix = [EF.one()] * (d + 1)
    for m in range(d - 1, -1, -1):
        suffix[m] = suffix[m + 1] * diffs[m + 1]
    out = EF.zero()
    for k in range(d + 1):
        denom = 1
        for m in range(d + 1):
            if m != k:
                denom = denom * (k - m) % P
        inv_denom = EF(np.asarray(pow(denom, P - 2, P), dtype=np.uint64))
        out = out + evals[k] * prefix[k] * suffix[k] * inv_denom
    return out


def _gather_pairs(table: EF, idx: np.ndarray) -> tuple[EF, EF]:
    lo = EF(table.c0[2 * idx], table.c1[2 * idx])
    hi = EF(table.c0[2 * idx + 1], table.c1[2 * idx + 1])
    return lo, hi


class BatchProver:
    """Runs the rounds for one RLC batch of members over a shared cube."""

    def __init__(
        self,
        num_vars: int,
        members: list[Member],
        coeffs: list[EF],
        factors: dict[str, Factor],
        crossover: float = 0.5,
    ):
        if len(members) != len(coeffs):
            raise ValueError("one coefficient per member")
        for m in members:
            m.check_degree()
        self.num_vars = num_vars
        self.members = members
        self.coeffs = coeffs
        self.factors = factors
        self.crossover = crossover
        self.degree = max(m.degree for m in members)
        size = 1 << num_vars
        for f in factors.values():
            if f.table.shape[0] != size:
                raise ValueError(f"factor {f.name}: table size {f.table.shape[0]} != 2^{num_vars}")

    def prove(self, transcript: Transcript, label: bytes):
        msgs = []
        x_star = []
        for rnd in range(self.num_vars):
            evals = self._round_message(rnd)
            msgs.append(evals)
            payload = b"".join(e.to_bytes() for e in evals)
            transcript.absorb(label + b"/round", payload)
            r = transcript.challenge_ext(label + b"/chal", 1)[0]
            x_star.append(r)
            self._fold(r, rnd)
        finals = {name: f.table[0] for name, f in self.factors.items()}
        from .mle import point_concat

        return msgs, point_concat(*x_star) if x_star else EF.zero((0,)), finals

    # -- internals ---------------------------------------------------------

    def _round_message(self, rnd: int):
        half = 1 << (self.num_vars - rnd - 1)
        dmax = self.degree
        acc = [EF.zero() for _ in range(dmax + 1)]
        pair_masks = {}
        for name, f in self.factors.items():
            if f.mask is not None:
                pm = np.unique(f.mask >> 1)
                if pm.size > self.crossover * half:
                    f.mask = None
                    pair_masks[name] = None
                else:
                    pair_masks[name] = pm
            else:
                pair_masks[name] = None

        for member, coeff in zip(self.members, self.coeffs):
            for term in member.terms:
                # any masked factor in the product zeroes everything off its mask,
                # so the term iterates the intersection of available masks
                masks = [
                    pair_masks[r.factor] for r in term.refs if pair_masks[r.factor] is not None
                ]
                active = None
                if masks:
                    active = masks[0]
                    for m in masks[1:]:
                        active = np.intersect1d(active, m, assume_unique=True)
                c = coeff * term.coeff
                term_evals = self._term_evals(term, active, dmax)
                for x in range(dmax + 1):
                    acc[x] = acc[x] + c * term_evals[x]
        return acc

    def _term_evals(self, term: Term, active, dmax: int):
        """Sum over the half-cube of the term product at X = 0..dmax.

        The evaluation points are stacked into a leading axis so each factor
        contributes one vectorized multiply regardless of the degree bound.
        """
        stacked = []
        for ref in term.refs:
            t = self.factors[ref.factor].table
            if active is not None:
                lo, hi = _gather_pairs(t, active)
            else:
                lo, hi = t[0::2], t[1::2]
            diff = hi - lo
            if ref.is_identity:
                g, gd = lo, diff
            else:
                g = ref.alpha * lo + ref.beta
                gd = ref.alpha * diff
            m = g.c0.shape[0]
            rows0 = np.empty((dmax + 1, m), dtype=np.uint64)
            rows1 = np.empty((dmax + 1, m), dtype=np.uint64)
            rows0[0], rows1[0] = g.c0, g.c1
            for x in range(1, dmax + 1):
                g = g + gd
                rows0[x], rows1[x] = g.c0, g.c1
            stacked.append(EF(rows0, rows1))
        prod = stacked[0]
        for g in stacked[1:]:
            prod = prod * g
        # pairwise sum along the cube axis, keeping the X axis intact
        c0, c1 = prod.c0, prod.c1
        while c0.shape[1] > 1:
            half = c0.shape[1] // 2
            even0, odd0 = c0[:, 0 : 2 * half : 2], c0[:, 1 : 2 * half : 2]
            even1, odd1 = c1[:, 0 : 2 * half : 2], c1[:, 1 : 2 * half : 2]
            tail = c0.shape[1] % 2
            s0, s1 = gl_add(even0, odd0), gl_add(even1, odd1)
            if tail:
                s0[:, -1] = gl_add(s0[:, -1], c0[:, -1])
                s1[:, -1] = gl_add(s1[:, -1], c1[:, -1])
            c0, c1 = s0, s1
        if c0.shape[1] == 0:
            return [EF.zero() for _ in range(dmax + 1)]
        return [EF(c0[x, 0], c1[x, 0]) for x in range(dmax + 1)]

    def _fold(self, r: EF, rnd: int):
        for f in self.factors.values():
            t = f.table
            if f.mask is not None:
                pm = np.unique(f.mask >> 1)
                lo, hi = _gather_pairs(t, pm)
                folded = lo + r * (hi - lo)
                size = t.shape[0] // 2
                new = EF.zero((size,))
                new.c0[pm] = folded.c0
                new.c1[pm] = folded.c1
                f.table = new
                f.mask = pm
            else:
                lo, hi = t[0::2], t[1::2]
                f.table = lo + r * (hi - lo)


def verify_batch(
    num_vars: int,
    degree: int,
    claims: list[EF],
    coeffs: list[EF],
    msgs,
    transcript: Transcript,
    label: bytes,
):
    """Replay a batch: returns (x_star, reduced_claim) or raises RoundError."""
    running = EF.zero()
    for c, beta in zip(claims, coeffs):
        running = running + beta * c
    x_star = []
    if len(msgs) != num_vars:
        raise RoundError(-1, "wrong number of rounds")
    for rnd, evals in enumerate(msgs):
        if len(evals) != degree + 1:
            raise RoundError(rnd, "wrong round-message width")
        if not (evals[0] + evals[1]) == running:
            raise RoundError(rnd, "round sum mismatch")
        payload = b"".join(e.to_bytes() for e in evals)
        transcript.absorb(label + b"/round", payload)
        r = transcript.challenge_ext(label + b"/chal", 1)[0]
        x_star.append(r)
        running = lagrange_interp(evals, r)
    from .mle import point_concat

    return (point_concat(*x_star) if x_star else EF.zero((0,))), running


class RoundError(Exception):
    def __init__(self, round_index: int, reason: str):
        super().__init__(f"sumcheck round {round_index}: {reason}")
        self.round_index = round_index
        self.reason = reason


# -- single-claim conveniences (tests and small callers) -------------------


def sumcheck_prove(num_vars, members, factors, transcript, label=b"sc", coeffs=None):
    if coeffs is None:
        coeffs = [EF.one()] * len(members)
    prover = BatchProver(num_vars, members, coeffs, factors)
    return prover.prove(transcript, label)


def sumcheck_verify(num_vars, degree, claims, msgs, transcript, label=b"sc", coeffs=None):
    if coeffs is None:
        coeffs = [EF.one()] * len(claims)
    return verify_batch(num_vars, degree, claims, coeffs, msgs, transcript, label)


def rlc_claims(claims: list[EF], coeffs: list[EF]) -> EF:
    """Batched claimed sum sum_i coeff_i * claim_i."""
    out = EF.zero()
    for c, b in zip(claims, coeffs):
        out = out + b * c
    return out
