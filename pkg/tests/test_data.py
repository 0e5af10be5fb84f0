import json

import numpy as np
import pytest

from phar.data import (
    Dataset,
    load_dataset,
    make_synthetic,
    save_dataset_json,
    stratified_split,
)


def test_dataset_shapes_and_validation():
    ds = Dataset("d", np.zeros((4, 3)), [0, 0, 1, 1], [True, True, False, False])
    assert ds.values.shape == (4, 3, 1)  # 2D promoted to C=1
    assert ds.n_timesteps == 3 and ds.n_channels == 1
    assert list(ds.train_indices()) == [0, 1]
    assert list(ds.test_indices()) == [2, 3]
    with pytest.raises(ValueError):
        Dataset("d", np.full((2, 3), np.nan), [0, 1], [True, False])
    with pytest.raises(ValueError):
        Dataset("d", np.zeros((2, 3)), [0], [True, False])


def test_stratified_split_deterministic_and_stratified():
    labels = np.array([0] * 40 + [1] * 20)
    m1 = stratified_split(labels, 0.25, seed=3)
    m2 = stratified_split(labels, 0.25, seed=3)
    assert np.array_equal(m1, m2)
    # per class roughly a quarter held out
    assert (~m1[:40]).sum() == 10
    assert (~m1[40:]).sum() == 5
    # tiny classes keep one on each side
    m = stratified_split(np.array([0, 0, 1, 1]), 0.25)
    for cls in (0, 1):
        idx = np.flatnonzero(np.array([0, 0, 1, 1]) == cls)
        assert 0 < m[idx].sum() < 2 or m[idx].sum() in (1,)


def test_tsv_single_file(tmp_path):
    p = tmp_path / "toy.tsv"
    lines = []
    for i in range(12):
        label = i % 2
        vals = [float(label)] * 5
        lines.append(str(label) + "\t" + "\t".join(str(v) for v in vals))
    p.write_text("\n".join(lines))
    ds = load_dataset(p)
    assert ds.name == "toy"
    assert ds.values.shape == (12, 5, 1)
    assert ds.train_mask.sum() + (~ds.train_mask).sum() == 12
    assert 0 < ds.train_mask.sum() < 12


def test_tsv_train_test_pair(tmp_path):
    for split, rows in (("TRAIN", 6), ("TEST", 4)):
        lines = [
            "1\t" + "\t".join(str(float(j)) for j in range(3)) for _ in range(rows)
        ]
        lines[0] = "0\t0.0\t0.0\t0.0"
        (tmp_path / f"Toy_{split}.tsv").write_text("\n".join(lines))
    ds = load_dataset(tmp_path / "Toy_TRAIN.tsv")
    assert ds.n_instances == 10
    assert ds.train_mask.sum() == 6
    assert (~ds.train_mask).sum() == 4
    # loading via the TEST file finds the same pair
    ds2 = load_dataset(tmp_path / "Toy_TEST.tsv")
    assert np.array_equal(ds.values, ds2.values)


def test_tsv_errors(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("0\t1.0\t2.0\n1\t3.0\n")
    with pytest.raises(ValueError, match="ragged"):
        load_dataset(p)
    p.write_text("0\tabc\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_dataset(p)


def test_json_container_round_trip(tmp_path):
    ds = make_synthetic(20, 8, 2, seed=4)
    p = tmp_path / "ds.json"
    save_dataset_json(ds, p)
    back = load_dataset(p)
    assert back.name == "synth"
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.train_mask, ds.train_mask)
    assert np.allclose(back.values, ds.values)


def test_json_container_without_split_gets_deterministic_split(tmp_path):
    obj = {"labels": [0, 1] * 8, "values": [[[0.0], [1.0]] for _ in range(16)]}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(obj))
    a = load_dataset(p)
    b = load_dataset(p)
    assert np.array_equal(a.train_mask, b.train_mask)
    assert 0 < a.train_mask.sum() < 16


def test_json_container_bad_split_tag(tmp_path):
    obj = {"labels": [0, 1], "values": [[[0.0]], [[1.0]]], "split": ["train", "dev"]}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(ValueError, match="split"):
        load_dataset(p)


def test_make_synthetic_properties():
    ds = make_synthetic(60, 24, 1, seed=0)
    assert ds.values.shape == (60, 24, 1)
    assert sorted(np.unique(ds.labels)) == [0, 1]
    assert np.bincount(ds.labels).tolist() == [30, 30]
    # same seed, same bytes; different seed, different data
    again = make_synthetic(60, 24, 1, seed=0)
    assert np.array_equal(ds.values, again.values)
    other = make_synthetic(60, 24, 1, seed=1)
    assert not np.array_equal(ds.values, other.values)
    # classes actually separated: the class means differ somewhere clearly
    m0 = ds.values[ds.labels == 0].mean(axis=0)
    m1 = ds.values[ds.labels == 1].mean(axis=0)
    assert np.abs(m0 - m1).max() > 0.5
