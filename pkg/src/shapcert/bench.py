"""Quality, scalability, and ablation sweeps emitting machine-readable metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import auroc, corrupt_dataset, synth_gaussian
from .params import PublicParams, RunConfig
from .pipeline import check_run, full_run
from .valuation import HarmonicTable, HashParams, knn_shapley_baseline, lsh_shapley


@dataclass
class MetricsReport:
    config_hash: str
    records: list[dict] = field(default_factory=list)

    def add(self, **kv):
        self.records.append(kv)

    def lines(self) -> list[str]:
        out = []
        for rec in self.records:
            body = " ".join(f"{k}={v}" for k, v in rec.items())
            out.append(f"config_hash={self.config_hash} {body}")
        return out

    def table(self) -> str:
        if not self.records:
            return "(no records)"
        keys = sorted({k for rec in self.records for k in rec})
        widths = {k: max(len(k), *(len(str(r.get(k, ""))) for r in self.records)) for k in keys}
        head = "  ".join(k.ljust(widths[k]) for k in keys)
        rows = [head, "-" * len(head)]
        for rec in self.records:
            rows.append("  ".join(str(rec.get(k, "")).ljust(widths[k]) for k in keys))
        return "\n".join(rows)


def quality_records(cfg: RunConfig, report: MetricsReport, seeds=None):
    """Mislabel and noisy detection AUROC: bucket-collision scores vs the KNN proxy."""
    seeds = seeds if seeds is not None else [cfg.seed + i for i in range(5)]
    ht = HarmonicTable(cfg.n_train, cfg.lambda_scale)
    for task in ("mislabel", "noisy"):
        for seed in seeds:
            train, val = synth_gaussian(cfg.n_train, cfg.n_test, cfg.dim, cfg.num_classes, seed)
            corrupted, mask = corrupt_dataset(train, task, cfg.corrupt_fraction, seed + 1000)
            t0 = time.time()
            h = HashParams(cfg.num_tables, cfg.depth, seed, cfg.dim, cfg.s_r)
            lsh = lsh_shapley(corrupted, val, h, ht).as_floats()
            t_lsh = time.time() - t0
            t0 = time.time()
            knn = knn_shapley_baseline(corrupted, val, cfg.knn_k)
            t_knn = time.time() - t0
            report.add(
                kind="quality", task=task, seed=seed,
                auroc_lsh=round(auroc(lsh, mask), 4),
                auroc_knn=round(auroc(knn, mask), 4),
                lsh_seconds=round(t_lsh, 3), knn_seconds=round(t_knn, 3),
            )


def proof_record(pp: PublicParams, seed: int, sparsity: bool = True):
    train, val = synth_gaussian(pp.n_train, pp.n_test, pp.dim, pp.num_classes, seed)
    t0 = time.time()
    run = full_run(train, val, pp, sparsity=sparsity)
    t_prove = time.time() - t0
    t0 = time.time()
    res = check_run(run)
    t_verify = time.time() - t0
    if not res.ok:
        raise RuntimeError(f"bench proof rejected: {res.section}: {res.check}")
    return run, {
        "prove_seconds": round(t_prove, 2),
        "verify_seconds": round(t_verify, 2),
        "proof_bytes": len(run.proof),
        "opening_bytes": run.report.opening_bytes,
        **{f"muls_{k}": v for k, v in run.report.counters.items()},
    }


def scalability_records(cfg: RunConfig, report: MetricsReport, axes=None):
    """One-axis-at-a-time sweeps around the configured reference point."""
    base = dict(
        n_train=cfg.n_train, n_test=cfg.n_test, dim=cfg.dim, num_classes=cfg.num_classes,
        num_tables=cfg.num_tables, depth=cfg.depth, providers=cfg.providers,
        hash_seed=cfg.hash_seed, lambda_scale=cfg.lambda_scale, s_x=cfg.s_x, s_r=cfg.s_r,
        col_checks=cfg.col_checks,
    )
    if axes is None:
        axes = {
            "n_train": [cfg.n_train // 4, cfg.n_train // 2, cfg.n_train],
            "n_test": [32, 128, 512],
            "dim": [cfg.dim // 2, cfg.dim, cfg.dim * 2],
            "num_classes": [2, cfg.num_classes, 2 * cfg.num_classes],
        }
    for axis, values in axes.items():
        for v in values:
            kw = dict(base)
            kw[axis] = v
            pp = PublicParams(**kw)
            _, rec = proof_record(pp, cfg.seed)
            report.add(kind="scalability", axis=axis, value=v, **rec)


def ablation_records(cfg: RunConfig, report: MetricsReport):
    base = dict(
        n_train=cfg.n_train, n_test=cfg.n_test, dim=cfg.dim, num_classes=cfg.num_classes,
        num_tables=cfg.num_tables, depth=cfg.depth, providers=cfg.providers,
        hash_seed=cfg.hash_seed, col_checks=cfg.col_checks,
    )
    run_b, rec_b = proof_record(PublicParams(**base, batching=True), cfg.seed)
    report.add(kind="ablation", variant="batching_on", **rec_b)
    _, rec_u = proof_record(PublicParams(**base, batching=False), cfg.seed)
    report.add(kind="ablation", variant="batching_off", **rec_u)
    report.add(
        kind="ablation", variant="batching_ratio",
        opening_ratio=round(rec_u["opening_bytes"] / rec_b["opening_bytes"], 3),
    )
    run_s, rec_s = proof_record(PublicParams(**base), cfg.seed, sparsity=True)
    run_d, rec_d = proof_record(PublicParams(**base), cfg.seed, sparsity=False)
    report.add(kind="ablation", variant="sparsity_on", **rec_s)
    report.add(kind="ablation", variant="sparsity_off", **rec_d)
    report.add(
        kind="ablation", variant="sparsity_identical_proofs",
        identical=int(run_s.proof == run_d.proof),
    )


def ntest_flatness_records(cfg: RunConfig, report: MetricsReport, grid=(32, 128, 512)):
    """Layer 1-3 prover operation counters across the validation-set size."""
    counters = []
    for n_test in grid:
        pp = PublicParams(
            n_train=cfg.n_train, n_test=n_test, dim=cfg.dim, num_classes=cfg.num_classes,
            num_tables=cfg.num_tables, depth=cfg.depth, providers=cfg.providers,
            hash_seed=cfg.hash_seed, col_checks=cfg.col_checks,
        )
        _, rec = proof_record(pp, cfg.seed, sparsity=False)
        counters.append(rec["muls_layer123"])
        report.add(kind="ntest_flatness", n_test=n_test, muls_layer123=rec["muls_layer123"],
                   muls_v3=rec["muls_v3"])
    report.add(kind="ntest_flatness", n_test="all",
               flat=int(len(set(counters)) == 1))
    return counters


def run_bench(cfg: RunConfig, parts=("quality", "scalability", "ablation", "flatness")) -> MetricsReport:
    report = MetricsReport(cfg.config_hash())
    if "quality" in parts:
        quality_records(cfg, report)
    if "scalability" in parts:
        scalability_records(cfg, report)
    if "ablation" in parts:
        ablation_records(cfg, report)
    if "flatness" in parts:
        ntest_flatness_records(cfg, report)
    return report
