"""Public protocol parameters and the flat key=value run configuration."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .pcs import DEFAULT_COL_CHECKS
from .valuation import LAMBDA_DEFAULT, S_R_DEFAULT, S_X_DEFAULT

PROTOCOL_VERSION = 1


def _is_pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


@dataclass(frozen=True)
class PublicParams:
    """Everything a verifier needs besides commitments and the proof itself."""

    n_train: int
    n_test: int
    dim: int
    num_classes: int
    num_tables: int
    depth: int
    providers: int
    hash_seed: int
    lambda_scale: int = LAMBDA_DEFAULT
    s_x: int = S_X_DEFAULT
    s_r: int = S_R_DEFAULT
    col_checks: int = DEFAULT_COL_CHECKS
    batching: bool = True
    version: int = PROTOCOL_VERSION

    def __post_init__(self):
        for name in ("n_train", "n_test", "dim", "num_tables"):
            if not _is_pow2(getattr(self, name)):
                raise ValueError(f"{name} must be a power of two, got {getattr(self, name)}")
        if self.n_train % self.providers:
            raise ValueError("provider count must divide n_train")
        if not _is_pow2(self.n_train // self.providers):
            raise ValueError("per-provider slice must be a power of two")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.depth < 1 or self.depth > 16:
            raise ValueError("hash depth out of range")

    # derived log-sizes used throughout the protocol
    @property
    def log_n(self):
        return self.n_train.bit_length() - 1

    @property
    def log_t(self):
        return self.n_test.bit_length() - 1

    @property
    def log_l(self):
        return self.num_tables.bit_length() - 1

    @property
    def log_d(self):
        return self.dim.bit_length() - 1

    @property
    def k_pad(self):
        k = 1
        while k < self.depth:
            k *= 2
        return k

    @property
    def log_k(self):
        return self.k_pad.bit_length() - 1

    @property
    def c_pad(self):
        c = 1
        while c < self.num_classes:
            c *= 2
        return c

    @property
    def log_c(self):
        return self.c_pad.bit_length() - 1

    @property
    def num_buckets(self):
        return 1 << self.depth

    @property
    def log_m(self):
        return self.providers.bit_length() - 1

    @property
    def log_slice(self):
        return (self.n_train // self.providers).bit_length() - 1

    def to_kv(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, bool):
                v = int(v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "PublicParams":
        vals = parse_kv(text)
        kwargs = {}
        for f_name, f_type in (
            ("n_train", int), ("n_test", int), ("dim", int), ("num_classes", int),
            ("num_tables", int), ("depth", int), ("providers", int), ("hash_seed", int),
            ("lambda_scale", int), ("s_x", int), ("s_r", int), ("col_checks", int),
            ("batching", lambda s: bool(int(s))),
            ("version", int),
        ):
            if f_name in vals:
                kwargs[f_name] = f_type(vals[f_name])
        return cls(**kwargs)

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_kv().encode()).digest()


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


@dataclass
class RunConfig:
    """Flat run configuration; every field is echoed into the proof header."""

    workdir: str = "."
    train_csv: str = ""
    test_csv: str = ""
    n_train: int = 256
    n_test: int = 64
    dim: int = 8
    num_classes: int = 2
    num_tables: int = 4
    depth: int = 6
    providers: int = 2
    seed: int = 1
    hash_seed: int = 1
    lambda_scale: int = LAMBDA_DEFAULT
    s_x: int = S_X_DEFAULT
    s_r: int = S_R_DEFAULT
    col_checks: int = DEFAULT_COL_CHECKS
    knn_k: int = 5
    task: str = "mislabel"
    corrupt_fraction: float = 0.1
    batching: bool = True
    sparsity: bool = True

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        vals = parse_kv(Path(path).read_text())
        cfg = cls()
        for k, v in vals.items():
            if not hasattr(cfg, k):
                raise ValueError(f"unknown config key {k!r}")
            cur = getattr(cfg, k)
            if isinstance(cur, bool):
                setattr(cfg, k, bool(int(v)))
            elif isinstance(cur, int):
                setattr(cfg, k, int(v))
            elif isinstance(cur, float):
                setattr(cfg, k, float(v))
            else:
                setattr(cfg, k, v)
        if cfg.task not in ("mislabel", "noisy"):
            raise ValueError("task must be mislabel or noisy")
        if not 0 < cfg.corrupt_fraction <= 0.5:
            raise ValueError("corrupt_fraction must lie in (0, 0.5]")
        return cfg

    def dump(self, path: str | Path):
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, bool):
                v = int(v)
            lines.append(f"{k}={v}")
        Path(path).write_text("\n".join(lines) + "\n")

    def public_params(self) -> PublicParams:
        return PublicParams(
            n_train=self.n_train,
            n_test=self.n_test,
            dim=self.dim,
            num_classes=self.num_classes,
            num_tables=self.num_tables,
            depth=self.depth,
            providers=self.providers,
            hash_seed=self.hash_seed,
            lambda_scale=self.lambda_scale,
            s_x=self.s_x,
            s_r=self.s_r,
            col_checks=self.col_checks,
            batching=self.batching,
        )

    def config_hash(self) -> str:
        payload = "\n".join(f"{k}={v}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]
