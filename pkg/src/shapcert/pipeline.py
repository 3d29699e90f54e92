"""End-to-end orchestration: datasets in, commitments + scores + proof out.

This is the in-process counterpart of the CLI phases; tests and benchmarks
drive it directly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .params import PublicParams
from .pcs import CommitmentDigest, pcs_commit, pcs_setup
from .protocol import ProveReport, prove, verify
from .valuation import HarmonicTable, HashParams, QuantizedDataset, lsh_shapley
from .witness import (
    OracleSet,
    ProviderPartition,
    build_oracle_set,
    feature_oracle,
    shard_oracle,
)


@dataclass
class MarketRun:
    pp: PublicParams
    train: QuantizedDataset
    val: QuantizedDataset
    hash_params: HashParams
    harmonic: HarmonicTable
    part: ProviderPartition
    provider_digests: list[CommitmentDigest]
    buyer_digest: CommitmentDigest
    buyer_salt: bytes
    x_salt: bytes
    oset: OracleSet | None = None
    report: ProveReport | None = None

    @property
    def proof(self) -> bytes:
        return self.report.proof


def deterministic_salts(seed: int, count: int) -> list[bytes]:
    return [b"salt/%d/%d" % (seed, p) for p in range(count)]


def commit_phase(
    train: QuantizedDataset,
    val: QuantizedDataset,
    pp: PublicParams,
    salts: list[bytes] | None = None,
    buyer_salt: bytes | None = None,
    x_salt: bytes | None = None,
) -> MarketRun:
    """Providers and the buyer publish commitments; the operator records salts."""
    if salts is None:
        salts = [os.urandom(16) for _ in range(pp.providers)]
    if buyer_salt is None:
        buyer_salt = os.urandom(16)
    if x_salt is None:
        x_salt = os.urandom(16)
    part = ProviderPartition(pp.providers, pp.n_train // pp.providers, salts)
    shard_params = pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks)
    provider_digests = []
    for p in range(pp.providers):
        digest, _ = pcs_commit(shard_oracle(train, part, p, pp).values, shard_params)
        provider_digests.append(digest)
    buyer_params = pcs_setup(pp.log_d + pp.log_t + 1, pp.col_checks)
    buyer_digest, _ = pcs_commit(feature_oracle(val, buyer_salt, pp.log_t, pp.log_d).values,
                                 buyer_params)
    h = HashParams(pp.num_tables, pp.depth, pp.hash_seed, pp.dim, pp.s_r)
    ht = HarmonicTable(pp.n_train, pp.lambda_scale)
    return MarketRun(pp, train, val, h, ht, part, provider_digests, buyer_digest,
                     buyer_salt, x_salt)


def valuate_phase(run: MarketRun, audit: bool = True, sparsity: bool = True) -> ProveReport:
    """The operator builds the witness and produces scores plus the proof."""
    pp = run.pp
    oset = build_oracle_set(
        run.train, run.val, run.hash_params, run.harmonic, pp,
        x_salt=run.x_salt, buyer_salt=run.buyer_salt, audit=audit,
    )
    run.oset = oset
    shard_params = pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks)
    shard_oracles, shard_states = [], []
    for p in range(pp.providers):
        o = shard_oracle(run.train, run.part, p, pp)
        shard_oracles.append(o)
        digest, state = pcs_commit(o.values, shard_params)
        if digest != run.provider_digests[p]:
            raise ValueError(f"provider {p} submission does not match its commitment")
        shard_states.append(state)
    run.report = prove(oset, run.part, shard_oracles, shard_states,
                       run.provider_digests, run.buyer_digest, run.harmonic,
                       sparsity=sparsity)
    return run.report


def full_run(
    train: QuantizedDataset,
    val: QuantizedDataset,
    pp: PublicParams,
    deterministic: bool = True,
    audit: bool = True,
    sparsity: bool = True,
) -> MarketRun:
    salts = deterministic_salts(pp.hash_seed, pp.providers) if deterministic else None
    buyer_salt = b"buyer/%d" % pp.hash_seed if deterministic else None
    x_salt = b"operator/%d" % pp.hash_seed if deterministic else None
    run = commit_phase(train, val, pp, salts, buyer_salt, x_salt)
    valuate_phase(run, audit=audit, sparsity=sparsity)
    return run


def check_run(run: MarketRun):
    return verify(run.proof, run.provider_digests, run.buyer_digest, run.pp)
