import numpy as np
import pytest

from shapcert.datasets import (
    IngestionError,
    auroc,
    corrupt_dataset,
    ingest_csv,
    prepare_dataset,
    synth_gaussian,
)


def write_csv(tmp_path, rows, header="f0,f1,label"):
    p = tmp_path / "data.csv"
    p.write_text(header + "\n" + "\n".join(rows) + "\n")
    return p


def test_ingest_balanced_power_of_two(tmp_path):
    p = write_csv(tmp_path, ["1.0,0.0,0", "0.0,1.0,1", "-1.0,0.0,0", "0.0,-1.0,1"])
    ds = ingest_csv(p)
    assert ds.n == 4 and ds.dim == 2


def test_ingest_five_rows_subsampled_to_four(tmp_path):
    rows = ["1.0,0.0,0", "0.9,0.1,0", "0.0,1.0,1", "0.1,0.9,1", "0.2,0.8,1"]
    ds = ingest_csv(write_csv(tmp_path, rows))
    assert ds.n == 4
    assert sorted(np.bincount(ds.labels, minlength=2).tolist()) == [2, 2]


def test_ingest_rejects_ragged_and_bad_labels(tmp_path):
    with pytest.raises(IngestionError):
        ingest_csv(write_csv(tmp_path, ["1.0,0.0"]))
    with pytest.raises(IngestionError):
        ingest_csv(write_csv(tmp_path, ["1.0,0.0,x", "0.0,1.0,1"]))
    with pytest.raises(IngestionError):
        ingest_csv(write_csv(tmp_path, ["1.0,0.0,0", "0.0,1.0,0"]))


def test_zero_variance_columns_dropped(tmp_path):
    rows = ["1.0,5.0,0", "2.0,5.0,1", "3.0,5.0,0", "4.0,5.0,1"]
    with pytest.warns(UserWarning):
        ds = ingest_csv(write_csv(tmp_path, rows))
    assert ds.dim == 1


def test_synth_nearest_cosine_assignment():
    train, val = synth_gaussian(64, 16, 4, 3, seed=5)
    anchors_rng = np.random.default_rng(5)
    anchors = anchors_rng.normal(size=(3, 4))
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)
    expect = np.argmax(train.raw @ anchors.T, axis=1)
    assert np.array_equal(train.labels, expect)


def test_synth_deterministic_and_balancedish():
    a, _ = synth_gaussian(4096, 64, 8, 5, seed=1)
    b, _ = synth_gaussian(4096, 64, 8, 5, seed=1)
    assert np.array_equal(a.features, b.features)
    counts = np.bincount(a.labels, minlength=5)
    assert (counts > 0.7 * 4096 / 5).all() and (counts < 1.3 * 4096 / 5).all()


def test_corrupt_mislabel():
    train, _ = synth_gaussian(64, 16, 4, 2, seed=2)
    corrupted, mask = corrupt_dataset(train, "mislabel", 1 / 64, seed=3)
    assert mask.sum() == 1
    i = int(np.nonzero(mask)[0][0])
    assert corrupted.labels[i] != train.labels[i]
    assert np.array_equal(corrupted.labels[~mask], train.labels[~mask])
    again, mask2 = corrupt_dataset(train, "mislabel", 1 / 64, seed=3)
    assert np.array_equal(mask, mask2)


def test_corrupt_mislabel_binary_flips_all_selected():
    train, _ = synth_gaussian(64, 16, 4, 2, seed=4)
    corrupted, mask = corrupt_dataset(train, "mislabel", 0.25, seed=9)
    assert (corrupted.labels[mask] != train.labels[mask]).all()


def test_corrupt_noisy_renormalized():
    train, _ = synth_gaussian(64, 16, 4, 2, seed=6)
    corrupted, mask = corrupt_dataset(train, "noisy", 0.25, seed=7)
    norms = np.linalg.norm(corrupted.raw, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-9)
    assert not np.allclose(corrupted.raw[mask], train.raw[mask])


def test_auroc_perfect_and_ties():
    assert auroc(np.array([0.0, 0.1, 5.0, 6.0]), np.array([True, True, False, False])) == 1.0
    assert auroc(np.array([1.0, 1.0, 1.0, 1.0]), np.array([True, False, True, False])) == 0.5


def test_auroc_hand_case():
    # derived by enumerating the four (corrupt, clean) pairs
    scores = np.array([1.0, 2.0, 3.0, 4.0])
    mask = np.array([True, False, False, True])  # corrupt scores {1, 4}
    assert auroc(scores, mask) == 0.5
    mask2 = np.array([False, True, False, True])  # corrupt {2, 4}
    assert auroc(scores, mask2) == 0.25


def test_auroc_degenerate_mask_rejected():
    with pytest.raises(ValueError):
        auroc(np.array([1.0, 2.0]), np.array([True, True]))
