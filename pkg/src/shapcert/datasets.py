"""Dataset ingestion, synthetic workloads, corruption tasks, and AUROC."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .valuation import QuantizedDataset, S_X_DEFAULT


class IngestionError(ValueError):
    pass


def _largest_pow2_at_most(x: int) -> int:
    p = 1
    while 2 * p <= x:
        p *= 2
    return p


def ingest_csv(path: str | Path, scale: int = S_X_DEFAULT, max_rows: int | None = None):
    """Read "f0,...,f{d-1},label" rows; z-score, l2-normalize, balance to a power of two."""
    text = Path(path).read_text()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError("empty file")
    if header[-1].strip() != "label":
        raise IngestionError('header must end with "label"')
    d = len(header) - 1
    feats, labels = [], []
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != d + 1:
            raise IngestionError(f"line {lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            feats.append([float(v) for v in row[:d]])
            labels.append(int(row[d]))
        except ValueError:
            raise IngestionError(f"line {lineno}: non-numeric field")
    x = np.asarray(feats, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if y.min(initial=0) < 0:
        raise IngestionError("labels must be non-negative integers")
    classes = np.unique(y)
    if len(classes) < 2:
        raise IngestionError("single-class data cannot be valued")
    return prepare_dataset(x, y, scale=scale, max_rows=max_rows)


def prepare_dataset(
    x: np.ndarray,
    y: np.ndarray,
    scale: int = S_X_DEFAULT,
    max_rows: int | None = None,
    seed: int = 0,
) -> QuantizedDataset:
    """z-score then l2-normalize, then class-balanced subsample to a power of two."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    keep = sd > 1e-12
    if not keep.all():
        import warnings

        warnings.warn("dropping zero-variance columns", stacklevel=2)
        x = x[:, keep]
        mu, sd = mu[keep], sd[keep]
    if x.shape[1] == 0:
        raise IngestionError("no informative columns remain")
    x = (x - mu) / sd
    norms = np.linalg.norm(x, axis=1)
    norms[norms == 0] = 1.0
    x = x / norms[:, None]

    classes, counts = np.unique(y, return_counts=True)
    budget = len(y) if max_rows is None else min(len(y), max_rows)
    n = _largest_pow2_at_most(budget)
    rng = np.random.default_rng(seed)
    order = []
    per_class = [list(rng.permutation(np.nonzero(y == c)[0])) for c in classes]
    ci = 0
    while len(order) < n:
        bucket = per_class[ci % len(classes)]
        if bucket:
            order.append(bucket.pop())
        ci += 1
        if all(not b for b in per_class):
            break
    if len(order) < n:
        raise IngestionError("not enough rows for a power-of-two subsample")
    idx = np.array(sorted(order[:n]))
    num_classes = int(y.max()) + 1
    return QuantizedDataset.from_raw(x[idx], y[idx], num_classes=num_classes, scale=scale)


def synth_gaussian(n_train: int, n_test: int, dim: int, num_classes: int, seed: int):
    """i.i.d. normal features, labels by nearest-cosine to random unit anchors."""
    for v in (n_train, n_test, dim):
        if v & (v - 1):
            raise ValueError("synthetic sizes must be powers of two")
    rng = np.random.default_rng(seed)
    anchors = rng.normal(size=(num_classes, dim))
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)

    def make(n):
        x = rng.normal(size=(n, dim))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        y = np.argmax(x @ anchors.T, axis=1).astype(np.int64)
        return QuantizedDataset.from_raw(x, y, num_classes=num_classes)

    return make(n_train), make(n_test)


def corrupt_dataset(train: QuantizedDataset, task: str, fraction: float, seed: int):
    """Flip labels or perturb features on a seeded random subset; returns the mask."""
    if not 0 < fraction <= 0.5:
        raise ValueError("fraction must lie in (0, 0.5]")
    rng = np.random.default_rng(seed)
    n = train.n
    count = max(1, int(round(fraction * n)))
    chosen = rng.choice(n, size=count, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    labels = train.labels.copy()
    raw = train.raw.copy()
    if task == "mislabel":
        for i in chosen:
            options = [c for c in range(train.num_classes) if c != labels[i]]
            labels[i] = options[rng.integers(len(options))]
    elif task == "noisy":
        noise = rng.normal(scale=1.0, size=(count, raw.shape[1]))
        raw[chosen] += noise
        raw[chosen] /= np.linalg.norm(raw[chosen], axis=1, keepdims=True)
    else:
        raise ValueError("task must be mislabel or noisy")
    corrupted = QuantizedDataset.from_raw(raw, labels, num_classes=train.num_classes,
                                          scale=train.scale)
    return corrupted, mask


def auroc(scores: np.ndarray, mask: np.ndarray) -> float:
    """P(random corrupt point scores below a random clean point); ties count half."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if scores.shape != mask.shape:
        raise ValueError("scores and mask lengths differ")
    n_pos = int(mask.sum())
    n_neg = int((~mask).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC undefined: mask is all-one or all-zero")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty_like(scores)
    sorted_scores = scores[order]
    # average ranks over ties
    i = 0
    pos = 1.0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        avg = (pos + pos + (j - i)) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        pos += j - i + 1
        i = j + 1
    rank_sum_corrupt = ranks[mask].sum()
    u = rank_sum_corrupt - n_pos * (n_pos + 1) / 2
    # u counts clean points ranked below corrupt ones (plus half-ties)
    return 1.0 - u / (n_pos * n_neg)
