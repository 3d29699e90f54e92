"""Command-line driver for the four protocol phases plus benchmarking.

Exit codes: 0 accept / success, 1 reject, 2 usage or I/O error.
Artifacts live in the configured workdir:

  params.pub            public parameters (key=value)
  provider_<i>.commit   provider data commitment (hex)
  provider_<i>.salt     provider salt, shared with the operator (hex)
  buyer.commit / .salt  validation-set commitment
  scores.txt            released per-point scores (field elements)
  proof.bin             the valuation certificate
  provider_<i>.scores   per-provider score slice written by `open`
  metrics.txt           append-only benchmark records
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import ingest_csv, synth_gaussian
from .params import PublicParams, RunConfig
from .pcs import CommitmentDigest, pcs_commit, pcs_setup
from .pipeline import commit_phase, valuate_phase
from .protocol import provider_verify, verify
from .valuation import QuantizedDataset
from .witness import ProviderPartition, feature_oracle, shard_oracle

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2


def _workdir(cfg: RunConfig) -> Path:
    wd = Path(cfg.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _load_datasets(cfg: RunConfig):
    if cfg.train_csv:
        train = ingest_csv(cfg.train_csv, scale=cfg.s_x, max_rows=cfg.n_train)
        val = ingest_csv(cfg.test_csv, scale=cfg.s_x, max_rows=cfg.n_test)
        if train.num_classes != val.num_classes:
            c = max(train.num_classes, val.num_classes)
            train.num_classes = c
            val.num_classes = c
    else:
        train, val = synth_gaussian(cfg.n_train, cfg.n_test, cfg.dim, cfg.num_classes, cfg.seed)
    return train, val


def _pp_for(cfg: RunConfig, train, val) -> PublicParams:
    return PublicParams(
        n_train=train.n, n_test=val.n, dim=train.dim, num_classes=train.num_classes,
        num_tables=cfg.num_tables, depth=cfg.depth, providers=cfg.providers,
        hash_seed=cfg.hash_seed, lambda_scale=cfg.lambda_scale, s_x=cfg.s_x,
        s_r=cfg.s_r, col_checks=cfg.col_checks, batching=cfg.batching,
    )


def _role_salt(cfg: RunConfig, role: str) -> bytes:
    # deterministic per (seed, role) so that re-running a phase is idempotent
    return hashlib.sha256(b"salt/%d/%s" % (cfg.seed, role.encode())).digest()[:16]


def _write_atomic(path: Path, data: bytes):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _read_digest(path: Path) -> CommitmentDigest:
    return CommitmentDigest.from_bytes(bytes.fromhex(path.read_text().strip()))


def cmd_setup(cfg: RunConfig) -> int:
    train, val = _load_datasets(cfg)
    pp = _pp_for(cfg, train, val)
    wd = _workdir(cfg)
    _write_atomic(wd / "params.pub", pp.to_kv().encode())
    print(f"wrote {wd / 'params.pub'}")
    return EXIT_OK


def cmd_commit(cfg: RunConfig, provider: int | None, buyer: bool) -> int:
    wd = _workdir(cfg)
    pp = PublicParams.from_kv((wd / "params.pub").read_text())
    train, val = _load_datasets(cfg)
    if buyer:
        salt = _role_salt(cfg, "buyer")
        digest, _ = pcs_commit(
            feature_oracle(val, salt, pp.log_t, pp.log_d).values,
            pcs_setup(pp.log_d + pp.log_t + 1, pp.col_checks),
        )
        _write_atomic(wd / "buyer.commit", (digest.to_bytes().hex() + "\n").encode())
        _write_atomic(wd / "buyer.salt", (salt.hex() + "\n").encode())
        print("buyer committed")
        return EXIT_OK
    if provider is None or not 0 <= provider < pp.providers:
        print("commit needs --provider INDEX or --buyer", file=sys.stderr)
        return EXIT_USAGE
    salt = _role_salt(cfg, f"provider/{provider}")
    part = ProviderPartition(pp.providers, pp.n_train // pp.providers, [salt] * pp.providers)
    digest, _ = pcs_commit(
        shard_oracle(train, part, provider, pp).values,
        pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks),
    )
    _write_atomic(wd / f"provider_{provider}.commit", (digest.to_bytes().hex() + "\n").encode())
    _write_atomic(wd / f"provider_{provider}.salt", (salt.hex() + "\n").encode())
    print(f"provider {provider} committed")
    return EXIT_OK


def cmd_valuate(cfg: RunConfig) -> int:
    wd = _workdir(cfg)
    pp = PublicParams.from_kv((wd / "params.pub").read_text())
    train, val = _load_datasets(cfg)
    salts = []
    for p in range(pp.providers):
        salt_file = wd / f"provider_{p}.salt"
        if not salt_file.exists():
            print(f"missing {salt_file}; run commit first", file=sys.stderr)
            return EXIT_USAGE
        salts.append(bytes.fromhex(salt_file.read_text().strip()))
    buyer_salt = bytes.fromhex((wd / "buyer.salt").read_text().strip())
    run = commit_phase(train, val, pp, salts, buyer_salt, x_salt=_role_salt(cfg, "operator"))
    for p in range(pp.providers):
        published = _read_digest(wd / f"provider_{p}.commit")
        if published != run.provider_digests[p]:
            print(f"provider {p} data does not match its commitment", file=sys.stderr)
            return EXIT_REJECT
    if _read_digest(wd / "buyer.commit") != run.buyer_digest:
        print("validation data does not match the buyer commitment", file=sys.stderr)
        return EXIT_REJECT
    valuate_phase(run, sparsity=cfg.sparsity)
    _write_atomic(wd / "proof.bin", run.proof)
    scores = "\n".join(str(int(v)) for v in run.oset.svavg_field) + "\n"
    _write_atomic(wd / "scores.txt", scores.encode())
    print(f"wrote proof.bin ({len(run.proof)} bytes) and scores.txt")
    return EXIT_OK


def cmd_open(cfg: RunConfig, provider: int) -> int:
    wd = _workdir(cfg)
    pp = PublicParams.from_kv((wd / "params.pub").read_text())
    if not 0 <= provider < pp.providers:
        print("bad provider index", file=sys.stderr)
        return EXIT_USAGE
    scores = (wd / "scores.txt").read_text().split()
    s = pp.n_train // pp.providers
    slice_vals = scores[provider * s : (provider + 1) * s]
    _write_atomic(wd / f"provider_{provider}.scores", ("\n".join(slice_vals) + "\n").encode())
    print(f"wrote provider_{provider}.scores ({s} entries; verify with proof.bin)")
    return EXIT_OK


def _public_record(wd: Path, pp: PublicParams):
    digests = [_read_digest(wd / f"provider_{p}.commit") for p in range(pp.providers)]
    buyer = _read_digest(wd / "buyer.commit")
    return digests, buyer


def cmd_verify(cfg: RunConfig, as_provider: int | None) -> int:
    wd = _workdir(cfg)
    pp = PublicParams.from_kv((wd / "params.pub").read_text())
    proof = (wd / "proof.bin").read_bytes()
    digests, buyer = _public_record(wd, pp)
    if as_provider is None:
        res = verify(proof, digests, buyer, pp)
        if not res.ok:
            print(f"REJECT ({res.section}: {res.check})")
            return EXIT_REJECT
        scores_file = wd / "scores.txt"
        if scores_file.exists():
            published = np.array([int(v) for v in scores_file.read_text().split()], dtype=np.uint64)
            if not np.array_equal(published, res.svavg):
                print("REJECT (publish: scores.txt differs from certified scores)")
                return EXIT_REJECT
        print("ACCEPT")
        return EXIT_OK
    # provider-side three-check verification on its own slice
    train, _ = _load_datasets(cfg)
    salt = bytes.fromhex((wd / f"provider_{as_provider}.salt").read_text().strip())
    s = pp.n_train // pp.providers
    received = np.array(
        [int(v) for v in (wd / f"provider_{as_provider}.scores").read_text().split()],
        dtype=np.uint64,
    )
    rep = provider_verify(
        proof, as_provider, train.features[as_provider * s : (as_provider + 1) * s],
        salt, received, digests, buyer,
    )
    marks = ", ".join(
        f"{name} {'ok' if flag else 'FAIL'}"
        for name, flag in (("A", rep.input_binding), ("B", rep.output_binding), ("C", rep.transcript_ok))
    )
    print(f"provider {as_provider}: {marks}")
    if not rep.ok:
        print(f"REJECT ({rep.detail})")
        return EXIT_REJECT
    print("ACCEPT")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, parts: str) -> int:
    from .bench import run_bench

    wanted = tuple(p.strip() for p in parts.split(",") if p.strip())
    report = run_bench(cfg, wanted or ("quality",))
    wd = _workdir(cfg)
    with open(wd / "metrics.txt", "a") as fh:
        for line in report.lines():
            fh.write(line + "\n")
    print(report.table())
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="shapcert",
                                 description="verifiable bucket-Shapley data valuation")
    ap.add_argument("command", choices=["setup", "commit", "valuate", "open", "verify", "bench"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--provider", type=int, default=None)
    ap.add_argument("--buyer", action="store_true")
    ap.add_argument("--as-provider", type=int, default=None, dest="as_provider")
    ap.add_argument("--parts", default="quality", help="bench parts, comma-separated")
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
    except (OSError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "setup":
            return cmd_setup(cfg)
        if args.command == "commit":
            return cmd_commit(cfg, args.provider, args.buyer)
        if args.command == "valuate":
            return cmd_valuate(cfg)
        if args.command == "open":
            if args.provider is None:
                print("open needs --provider", file=sys.stderr)
                return EXIT_USAGE
            return cmd_open(cfg, args.provider)
        if args.command == "verify":
            return cmd_verify(cfg, args.as_provider)
        if args.command == "bench":
            return cmd_bench(cfg, args.parts)
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
