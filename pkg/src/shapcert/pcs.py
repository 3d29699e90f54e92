"""Matrix-code polynomial commitment with square-root-size openings.

A table of 2^n values becomes a near-square matrix; each row is encoded with
the rate-1/2 systematic Reed-Solomon code (NTT-based), and the codeword
columns are hashed into a Merkle tree whose root is the commitment.  An
opening at an extension point z sends the eq-weighted row combinations for a
proximity test and for the evaluation, plus `num_col_checks` authenticated
columns; the multilinear evaluation is u^T M v for the eq-tensor halves
u, v of z.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .field import EF, P, as_fvec, gl_add, gl_mul
from .mle import eq_table
from .ntt import rs_encode
from .transcript import Transcript

DEFAULT_COL_CHECKS = 100
KIND_BASE = 0
KIND_EXT = 1


@dataclass(frozen=True)
class CodeParams:
    num_vars: int
    row_bits: int
    col_bits: int
    num_col_checks: int = DEFAULT_COL_CHECKS
    rate_log: int = 1  # codeword width = 2^rate_log * message width

    @property
    def rows(self):
        return 1 << self.row_bits

    @property
    def cols(self):
        return 1 << self.col_bits

    @property
    def codeword_cols(self):
        return self.cols << self.rate_log


def pcs_setup(num_vars: int, num_col_checks: int = DEFAULT_COL_CHECKS, max_vars: int = 30) -> CodeParams:
    """Shape the matrix |rows - cols| minimal; ties give the wider matrix."""
    if num_vars < 1:
        raise ValueError("committed tables need at least one variable")
    if num_vars > max_vars:
        raise ValueError(f"num_vars {num_vars} exceeds configured maximum {max_vars}")
    row_bits = num_vars // 2
    return CodeParams(num_vars, row_bits, num_vars - row_bits, num_col_checks)


@dataclass(frozen=True)
class CommitmentDigest:
    root: bytes
    num_vars: int
    row_bits: int
    kind: int

    def to_bytes(self) -> bytes:
        return self.root + struct.pack("<BBB", self.num_vars, self.row_bits, self.kind)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CommitmentDigest":
        if len(data) != 35:
            raise ValueError("bad commitment digest length")
        nv, rb, kind = struct.unpack("<BBB", data[32:])
        return cls(data[:32], nv, rb, kind)


BYTES_PER_DIGEST = 35


class ProverState:
    def __init__(self, params, matrix, encoded, levels, digest, kind):
        self.params = params
        self.matrix = matrix
        self.encoded = encoded
        self.levels = levels
        self.digest = digest
        self.kind = kind


def _leaf_bytes(encoded, j, kind) -> bytes:
    if kind == KIND_BASE:
        return encoded[:, j].astype("<u8").tobytes()
    return encoded.c0[:, j].astype("<u8").tobytes() + encoded.c1[:, j].astype("<u8").tobytes()


def _hash_leaf(data: bytes) -> bytes:
    return hashlib.sha256(b"col" + data).digest()


def _hash_node(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"node" + left + right).digest()


def _merkle_levels(leaf_hashes: list[bytes]):
    levels = [leaf_hashes]
    cur = leaf_hashes
    while len(cur) > 1:
        cur = [_hash_node(cur[i], cur[i + 1]) for i in range(0, len(cur), 2)]
        levels.append(cur)
    return levels


def merkle_multiproof(levels, indices: list[int]) -> list[bytes]:
    """Sibling hashes needed to recompute the root from the given leaves."""
    known = sorted(set(indices))
    out = []
    for level in levels[:-1]:
        known_set = set(known)
        nxt = []
        for i in known:
            if i % 2 == 1 and (i ^ 1) in known_set:
                continue  # parent emitted when the even slot was visited
            if (i ^ 1) not in known_set:
                out.append(level[i ^ 1])
            nxt.append(i // 2)
        known = nxt
    return out


def merkle_multiverify(root: bytes, n_leaves: int, leaf_map: dict[int, bytes], proof: list[bytes]) -> bool:
    known = dict(leaf_map)
    width = n_leaves
    pos = 0
    while width > 1:
        nxt = {}
        for i in sorted(known):
            if i % 2 == 1 and (i ^ 1) in known:
                continue
            sib = i ^ 1
            if sib in known:
                sib_hash = known[sib]
            else:
                if pos >= len(proof):
                    return False
                sib_hash = proof[pos]
                pos += 1
            left, right = (known[i], sib_hash) if i % 2 == 0 else (sib_hash, known[i])
            nxt[i // 2] = _hash_node(left, right)
        known = nxt
        width //= 2
    return pos == len(proof) and known.get(0) == root


def pcs_commit(values, params: CodeParams):
    """Commit a base (uint64) or extension (EF) table; deterministic."""
    kind = KIND_EXT if isinstance(values, EF) else KIND_BASE
    size = values.shape[0] if kind == KIND_EXT else as_fvec(values).shape[0]
    if size != 1 << params.num_vars:
        raise ValueError(f"table size {size} does not match params 2^{params.num_vars}")
    if kind == KIND_BASE:
        matrix = as_fvec(values).reshape(params.rows, params.cols)
        encoded = rs_encode(matrix)
    else:
        matrix = EF(
            values.c0.reshape(params.rows, params.cols),
            values.c1.reshape(params.rows, params.cols),
        )
        encoded = EF(rs_encode(matrix.c0), rs_encode(matrix.c1))
    leaf_hashes = [
        _hash_leaf(_leaf_bytes(encoded, j, kind)) for j in range(params.codeword_cols)
    ]
    levels = _merkle_levels(leaf_hashes)
    digest = CommitmentDigest(levels[-1][0], params.num_vars, params.row_bits, kind)
    return digest, ProverState(params, matrix, encoded, levels, digest, kind)


def _gl_sum_axis0(m: np.ndarray) -> np.ndarray:
    cur = m
    while cur.shape[0] > 1:
        half = cur.shape[0] // 2
        s = gl_add(cur[0 : 2 * half : 2], cur[1 : 2 * half : 2])
        if cur.shape[0] % 2:
            s[-1] = gl_add(s[-1], cur[-1])
        cur = s
    return cur[0]


def _combine_rows(weights: EF, matrix, kind) -> EF:
    """weights^T * matrix for a base or extension matrix."""
    if kind == KIND_BASE:
        c0 = gl_mul(weights.c0[:, None], matrix)
        c1 = gl_mul(weights.c1[:, None], matrix)
        return EF(_gl_sum_axis0(c0), _gl_sum_axis0(c1))
    prod = EF(weights.c0[:, None], weights.c1[:, None]) * matrix
    return EF(_gl_sum_axis0(prod.c0), _gl_sum_axis0(prod.c1))


@dataclass
class OpeningProof:
    test_row: EF
    eval_row: EF
    columns: list  # per sorted unique checked index: base array or EF of length rows
    merkle: list[bytes]

    def to_bytes(self, kind: int) -> bytes:
        parts = [self.test_row.to_bytes(), self.eval_row.to_bytes()]
        parts.append(struct.pack("<I", len(self.columns)))
        for col in self.columns:
            if kind == KIND_BASE:
                parts.append(col.astype("<u8").tobytes())
            else:
                parts.append(col.to_bytes())
        parts.append(struct.pack("<I", len(self.merkle)))
        parts.extend(self.merkle)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes, params: CodeParams, kind: int, n_cols: int):
        w = params.cols
        off = 0
        test_row = EF.from_bytes(data[off : off + 16 * w], shape=(w,))
        off += 16 * w
        eval_row = EF.from_bytes(data[off : off + 16 * w], shape=(w,))
        off += 16 * w
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        if count != n_cols:
            raise ValueError("column count mismatch")
        columns = []
        rows = params.rows
        for _ in range(count):
            if kind == KIND_BASE:
                col = np.frombuffer(data[off : off + 8 * rows], dtype="<u8").astype(np.uint64)
                if np.any(col >= P):
                    raise ValueError("non-canonical column value")
                off += 8 * rows
            else:
                col = EF.from_bytes(data[off : off + 16 * rows], shape=(rows,))
                off += 16 * rows
            columns.append(col)
        (n_hashes,) = struct.unpack_from("<I", data, off)
        off += 4
        merkle = []
        for _ in range(n_hashes):
            merkle.append(data[off : off + 32])
            off += 32
        if off != len(data):
            raise ValueError("trailing bytes in opening proof")
        return cls(test_row, eval_row, columns, merkle)


def _split_point(point: EF, params: CodeParams):
    v = eq_table(point[: params.col_bits])
    u = eq_table(point[params.col_bits :])
    return u, v


def pcs_open(state: ProverState, point: EF, transcript: Transcript, label: bytes) -> OpeningProof:
    params = state.params
    if point.shape[0] != params.num_vars:
        raise ValueError("opening point has wrong arity")
    u, v = _split_point(point, params)
    u_test = transcript.challenge_ext(label + b"/test", params.rows)
    test_row = _combine_rows(u_test, state.matrix, state.kind)
    transcript.absorb(label + b"/trow", test_row.to_bytes())
    eval_row = _combine_rows(u, state.matrix, state.kind)
    transcript.absorb(label + b"/erow", eval_row.to_bytes())
    idx = transcript.challenge_indices(label + b"/cols", params.num_col_checks, params.codeword_cols)
    uniq = sorted(set(idx))
    if state.kind == KIND_BASE:
        columns = [state.encoded[:, j].copy() for j in uniq]
    else:
        columns = [EF(state.encoded.c0[:, j].copy(), state.encoded.c1[:, j].copy()) for j in uniq]
    proof = merkle_multiproof(state.levels, uniq)
    return OpeningProof(test_row, eval_row, columns, proof)


def claimed_eval_from_row(eval_row: EF, point: EF, params: CodeParams) -> EF:
    _, v = _split_point(point, params)
    return (eval_row * v).sum()


def pcs_verify_opening(
    digest: CommitmentDigest,
    params: CodeParams,
    point: EF,
    claimed: EF,
    proof: OpeningProof,
    transcript: Transcript,
    label: bytes,
):
    """Returns (True, "") or (False, failing-check) in {"merkle","code","evaluation"}."""
    u, v = _split_point(point, params)
    u_test = transcript.challenge_ext(label + b"/test", params.rows)
    transcript.absorb(label + b"/trow", proof.test_row.to_bytes())
    transcript.absorb(label + b"/erow", proof.eval_row.to_bytes())
    idx = transcript.challenge_indices(label + b"/cols", params.num_col_checks, params.codeword_cols)
    uniq = sorted(set(idx))
    if len(proof.columns) != len(uniq):
        return False, "merkle"
    kind = digest.kind
    leaf_map = {}
    for j, col in zip(uniq, proof.columns):
        if kind == KIND_BASE:
            data = col.astype("<u8").tobytes()
        else:
            data = col.c0.astype("<u8").tobytes() + col.c1.astype("<u8").tobytes()
        leaf_map[j] = _hash_leaf(data)
    if not merkle_multiverify(digest.root, params.codeword_cols, leaf_map, proof.merkle):
        return False, "merkle"
    test_cw = EF(rs_encode(proof.test_row.c0.reshape(1, -1))[0], rs_encode(proof.test_row.c1.reshape(1, -1))[0])
    eval_cw = EF(rs_encode(proof.eval_row.c0.reshape(1, -1))[0], rs_encode(proof.eval_row.c1.reshape(1, -1))[0])
    for j, col in zip(uniq, proof.columns):
        col_ef = EF.from_base(col) if kind == KIND_BASE else col
        t_val = (u_test * col_ef).sum()
        e_val = (u * col_ef).sum()
        if not (t_val == test_cw[j] and e_val == eval_cw[j]):
            return False, "code"
    if not (proof.eval_row * v).sum() == claimed:
        return False, "evaluation"
    return True, ""
