import dataclasses
import math

import numpy as np
import pytest

from phar.attrib import AttributionTensor
from phar.core import FeatureId, rule_satisfied
from phar.data import Dataset, make_synthetic
from phar.extract import (
    ExtractionConfig,
    compute_thresholds,
    derive_rule,
    extract_ruleset,
    perturbation_deltas,
    select_important,
)
from phar.predict import CentroidPredictor


# -- independent percentile oracle: sorted ranks, linear interpolation ------


def manual_percentile(sample, p):
    xs = sorted(sample)
    if len(xs) == 1:
        return xs[0]
    h = (len(xs) - 1) * p / 100.0
    lo = math.floor(h)
    hi = math.ceil(h)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def test_manual_percentile_frozen_values():
    assert manual_percentile([1, 2, 3, 4], 50) == 2.5
    assert manual_percentile([0, 10], 99) == pytest.approx(9.9, abs=1e-12)
    assert manual_percentile([5], 75) == 5


def uniform_attr(values, indices):
    return AttributionTensor("x", np.asarray(values, dtype=float), np.asarray(indices))


def four_instance_dataset(t=4):
    values = np.zeros((4, t, 1))
    labels = np.array([0, 1, 0, 1])
    mask = np.array([True, True, False, False])
    return Dataset("d", values, labels, mask)


def test_global_threshold_matches_oracle():
    ds = four_instance_dataset(t=2)
    # train rows only: instances 0 and 1; test row has huge values that must not leak
    attr = uniform_attr([[[1.0], [-2.0]], [[3.0], [-4.0]], [[999.0], [999.0]]], [0, 1, 2])
    for p in (50, 75, 90, 99):
        cfg = ExtractionConfig(percentile=p, global_threshold=True)
        thr = compute_thresholds(attr, ds, cfg)
        assert thr.is_global
        assert thr.global_value == pytest.approx(
            manual_percentile([1.0, 2.0, 3.0, 4.0], p), abs=1e-12
        )


def test_per_feature_threshold_matches_oracle():
    ds = four_instance_dataset(t=2)
    attr = uniform_attr([[[1.0], [-10.0]], [[3.0], [-20.0]]], [0, 1])
    cfg = ExtractionConfig(percentile=50, global_threshold=False)
    thr = compute_thresholds(attr, ds, cfg)
    assert not thr.is_global
    assert thr.per_feature[0, 0] == pytest.approx(manual_percentile([1, 3], 50), abs=1e-12)
    assert thr.per_feature[1, 0] == pytest.approx(manual_percentile([10, 20], 50), abs=1e-12)


def test_thresholds_random_tensors_match_oracle():
    rng = np.random.default_rng(8)
    for _ in range(30):
        n, t = int(rng.integers(3, 10)), int(rng.integers(2, 6))
        ds = Dataset(
            "r",
            np.zeros((n, t, 1)),
            rng.integers(0, 2, n),
            np.arange(n) < max(2, n // 2),
        )
        attr = uniform_attr(rng.normal(size=(n, t, 1)), np.arange(n))
        p = int(rng.integers(50, 100))
        train_abs = np.abs(attr.values[ds.train_mask])
        thr_g = compute_thresholds(attr, ds, ExtractionConfig(percentile=p))
        assert thr_g.global_value == pytest.approx(
            manual_percentile(train_abs.ravel().tolist(), p), abs=1e-9
        )
        thr_f = compute_thresholds(
            attr, ds, ExtractionConfig(percentile=p, global_threshold=False)
        )
        for ti in range(t):
            assert thr_f.per_feature[ti, 0] == pytest.approx(
                manual_percentile(train_abs[:, ti, 0].tolist(), p), abs=1e-9
            )


def test_thresholds_require_train_rows():
    ds = four_instance_dataset()
    attr = uniform_attr(np.ones((1, 4, 1)), [2])  # test-only row
    with pytest.raises(ValueError, match="train"):
        compute_thresholds(attr, ds, ExtractionConfig())


def test_select_important_boundary_and_zero():
    ds = four_instance_dataset(t=3)
    attr = uniform_attr([[[2.0], [2.0], [2.0]]], [0])
    thr = compute_thresholds(attr, ds, ExtractionConfig(percentile=90))
    # every |e| equals the threshold -> all selected (inclusive boundary)
    assert thr.global_value == 2.0
    grid = np.array([[2.0], [-2.0], [2.0]])
    assert select_important(grid, thr) == [FeatureId(0), FeatureId(1), FeatureId(2)]
    # strictly below -> dropped
    assert select_important(np.array([[1.9], [-2.0], [0.0]]), thr) == [FeatureId(1)]
    # zero attribution never counts as important, even at zero threshold
    zattr = uniform_attr([[[0.0], [0.0], [0.0]]], [0])
    zthr = compute_thresholds(zattr, ds, ExtractionConfig(percentile=90))
    assert zthr.global_value == 0.0
    assert select_important(np.zeros((3, 1)), zthr) == []


def test_monotone_selectivity_in_percentile():
    rng = np.random.default_rng(13)
    for glob in (True, False):
        for _ in range(20):
            n, t = 6, 5
            ds = Dataset("r", np.zeros((n, t, 1)), rng.integers(0, 2, n), np.arange(n) < 4)
            attr = uniform_attr(rng.normal(size=(n, t, 1)), np.arange(n))
            p1, p2 = sorted(rng.integers(50, 100, size=2).tolist())
            grid = attr.values[5]
            f1 = select_important(
                grid, compute_thresholds(attr, ds, ExtractionConfig(percentile=p1, global_threshold=glob))
            )
            f2 = select_important(
                grid, compute_thresholds(attr, ds, ExtractionConfig(percentile=p2, global_threshold=glob))
            )
            assert set(f2) <= set(f1)


class BoundaryPredictor:
    """class 0 iff the t0 value is <= 0.5; everything else ignored."""

    def predict(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 2:
            arr = arr[None]
        return (arr[:, 0, 0] > 0.5).astype(int)


class ExactMatchPredictor:
    """class 0 only for one exact series; any perturbation flips the label."""

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)

    def predict(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 2:
            arr = arr[None]
        hits = np.array([np.array_equal(v, self.x) for v in arr])
        return np.where(hits, 0, 1)


def boundary_dataset():
    # train std at every feature is exactly 1 (values -1 and 1)
    values = np.array(
        [[-1.0, -1.0], [1.0, 1.0], [0.0, 0.0], [0.2, 0.1]]
    )[:, :, None]
    labels = np.array([0, 1, 0, 0])
    mask = np.array([True, True, False, False])
    return Dataset("b", values, labels, mask)


def test_derive_rule_respects_analytic_boundary():
    ds = boundary_dataset()
    cfg = ExtractionConfig(scale=1.0, n_samples=10000, hull_quantile=0.01, seed=5)
    deltas = perturbation_deltas(ds, None, cfg)
    assert deltas[0, 0] == 1.0
    pred = BoundaryPredictor()
    x = ds.values[2]  # t0 = 0.0, class 0 region is (-inf, 0.5]
    rule = derive_rule(x, [FeatureId(0)], 0, pred, deltas, cfg)
    assert rule is not None
    iv = rule.conditions[0].interval
    assert rule_satisfied(rule, x)
    assert iv.upper <= 0.5  # never crosses the boundary
    assert abs(iv.upper - 0.5) < 0.02  # but lands close to it
    assert iv.lower >= -1.0 - 1e-9  # inside the sampled range


def test_derive_rule_full_hull_under_constant_predictor():
    class Constant:
        def predict(self, values):
            arr = np.asarray(values, dtype=float)
            if arr.ndim == 2:
                arr = arr[None]
            return np.zeros(arr.shape[0], dtype=int)

    ds = boundary_dataset()
    cfg = ExtractionConfig(scale=1.0, n_samples=10000, hull_quantile=0.01, seed=2)
    deltas = perturbation_deltas(ds, None, cfg)
    x = ds.values[2]
    rule = derive_rule(x, [FeatureId(0)], 0, Constant(), deltas, cfg)
    iv = rule.conditions[0].interval
    # everything kept: hull approaches the (x - delta, x + delta) window
    assert iv.lower == pytest.approx(-0.98, abs=0.02)
    assert iv.upper == pytest.approx(0.98, abs=0.02)
    assert iv.upper - iv.lower <= 2.0 + 1e-9


def test_derive_rule_absent_when_nothing_kept():
    ds = boundary_dataset()
    cfg = ExtractionConfig(scale=1.0, n_samples=500, seed=3)
    deltas = perturbation_deltas(ds, None, cfg)
    x = ds.values[2]
    rule = derive_rule(x, [FeatureId(0)], 0, ExactMatchPredictor(x), deltas, cfg)
    assert rule is None


def test_derive_rule_deterministic_per_seed():
    ds = boundary_dataset()
    pred = BoundaryPredictor()
    deltas = perturbation_deltas(ds, None, ExtractionConfig(scale=0.5))
    x = ds.values[3]
    feats = [FeatureId(0), FeatureId(1)]
    a = derive_rule(x, feats, 0, pred, deltas, ExtractionConfig(scale=0.5, n_samples=800, seed=11))
    b = derive_rule(x, feats, 0, pred, deltas, ExtractionConfig(scale=0.5, n_samples=800, seed=11))
    c = derive_rule(x, feats, 0, pred, deltas, ExtractionConfig(scale=0.5, n_samples=800, seed=12))
    assert a.conditions == b.conditions
    assert a.conditions != c.conditions


def test_derive_rule_always_covers_source():
    rng = np.random.default_rng(77)
    for trial in range(200):
        n, t = 10, int(rng.integers(2, 7))
        ds = Dataset(
            "r",
            rng.normal(size=(n, t, 1)),
            rng.integers(0, 2, n),
            np.arange(n) < 6,
        )
        pred = CentroidPredictor(ds)
        cfg = ExtractionConfig(
            scale=float(rng.uniform(0.05, 1.0)),
            n_samples=200,
            seed=int(rng.integers(0, 10000)),
        )
        deltas = perturbation_deltas(ds, None, cfg)
        x = ds.values[int(rng.integers(0, n))]
        k = int(rng.integers(1, t + 1))
        feats = [FeatureId(int(i)) for i in rng.choice(t, size=k, replace=False)]
        c_ref = int(pred.predict(x[None])[0])
        rule = derive_rule(x, feats, c_ref, pred, deltas, cfg)
        if rule is not None:
            assert rule_satisfied(rule, x)
            for c in rule.conditions:
                d = deltas[c.feature.timestep, c.feature.channel]
                width = c.interval.upper - c.interval.lower
                assert width <= 2 * d + 1e-9


def test_deltas_from_attribution_std():
    ds = boundary_dataset()
    attr = uniform_attr(
        [[[2.0], [0.0]], [[-2.0], [0.0]], [[9.0], [9.0]], [[9.0], [9.0]]],
        [0, 1, 2, 3],
    )
    cfg = ExtractionConfig(scale=0.5, delta_source="attributions")
    deltas = perturbation_deltas(ds, attr, cfg)
    # train rows: |e| at t0 = {2, 2} -> std 0; at t1 = {0, 0} -> std 0
    assert deltas[0, 0] == 0.0
    attr2 = uniform_attr([[[1.0], [0.0]], [[3.0], [0.0]]], [0, 1])
    deltas2 = perturbation_deltas(ds, attr2, cfg)
    assert deltas2[0, 0] == pytest.approx(0.5 * np.std([1.0, 3.0]), abs=1e-12)
    with pytest.raises(ValueError, match="attribution"):
        perturbation_deltas(ds, None, cfg)


def synth_with_signal_attr(seed=0):
    ds = make_synthetic(40, 12, 1, seed=seed)
    train = ds.values[ds.train_mask]
    tl = ds.labels[ds.train_mask]
    gap = np.abs(train[tl == 0].mean(axis=0) - train[tl == 1].mean(axis=0))
    rows = np.repeat(gap[None], ds.n_instances, axis=0)
    return ds, AttributionTensor("sig", rows, np.arange(ds.n_instances))


def test_extract_ruleset_end_to_end():
    ds, attr = synth_with_signal_attr()
    pred = CentroidPredictor(ds)
    cfg = ExtractionConfig(percentile=90, scale=0.3, n_samples=500, seed=1)
    rs = extract_ruleset(ds, attr, pred, cfg)
    assert rs.provenance == "sig"
    assert set(rs.rules) == set(ds.test_indices().tolist())
    present = rs.present()
    assert present  # informative attributions must yield some rules
    for n, rule in present.items():
        assert rule_satisfied(rule, ds.values[n])
        assert rule.predicted_class == pred.predict(ds.values[n][None])[0]
        assert rule.source_instance == n
        assert 0.0 <= rule.coverage <= 1.0  # metrics attached at extraction
    assert rs.config["percentile"] == 90


def test_extract_ruleset_zero_attributions_mean_no_rules():
    ds = make_synthetic(20, 8, 1, seed=3)
    attr = uniform_attr(np.zeros((20, 8, 1)), np.arange(20))
    rs = extract_ruleset(ds, attr, CentroidPredictor(ds), ExtractionConfig())
    assert set(rs.rules) == set(ds.test_indices().tolist())
    assert all(r is None for r in rs.rules.values())


def test_extract_ruleset_missing_attribution_rows_mean_no_rule():
    ds, attr = synth_with_signal_attr()
    # keep only train rows plus a single test row
    keep_test = int(ds.test_indices()[0])
    keep = sorted(ds.train_indices().tolist() + [keep_test])
    sub = AttributionTensor("sig", attr.values[keep], np.array(keep))
    rs = extract_ruleset(ds, sub, CentroidPredictor(ds), ExtractionConfig(n_samples=300))
    others = [n for n in ds.test_indices() if n != keep_test]
    assert all(rs.rules[n] is None for n in others)
    assert rs.rules[keep_test] is not None


def test_extract_ruleset_jobs_do_not_change_results():
    ds, attr = synth_with_signal_attr(seed=9)
    pred = CentroidPredictor(ds)
    cfg = ExtractionConfig(percentile=85, scale=0.3, n_samples=400, seed=4)
    one = extract_ruleset(ds, attr, pred, cfg, jobs=1)
    four = extract_ruleset(ds, attr, pred, cfg, jobs=4)
    assert set(one.rules) == set(four.rules)
    for n in one.rules:
        a, b = one.rules[n], four.rules[n]
        assert (a is None) == (b is None)
        if a is not None:
            assert a.conditions == b.conditions


def test_config_validation():
    with pytest.raises(ValueError):
        ExtractionConfig(percentile=45)
    with pytest.raises(ValueError):
        ExtractionConfig(percentile=100)
    with pytest.raises(ValueError):
        ExtractionConfig(hull_quantile=0.6)
    with pytest.raises(ValueError):
        ExtractionConfig(n_samples=0)
    with pytest.raises(ValueError):
        ExtractionConfig(delta_source="entropy")
    cfg = ExtractionConfig()
    assert dataclasses.asdict(cfg)["percentile"] == 90
