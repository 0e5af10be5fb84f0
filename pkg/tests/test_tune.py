import numpy as np
import pytest

from phar.attrib import AttributionTensor, make_synthetic_attributions
from phar.data import make_synthetic
from phar.extract import ExtractionConfig, extract_ruleset
from phar.metrics import report
from phar.predict import CentroidPredictor
from phar.tune import (
    SearchSpace,
    TuneConfig,
    default_config,
    load_extraction_config,
    save_extraction_config_toml,
    save_trials_csv,
    tune,
)

# small spaces keep trial extraction cheap in tests
FAST_SPACE = SearchSpace(n_samples_grid=(50, 100, 150))


def tuning_problem(seed=0, n=24, t=8):
    ds = make_synthetic(n, t, 1, seed=seed)
    attr = make_synthetic_attributions(ds, "sim", seed=seed + 1, noise=0.25)
    return ds, attr, CentroidPredictor(ds)


def test_default_config_midpoints():
    cfg = default_config(SearchSpace(), seed=7)
    assert cfg.percentile == 90
    assert cfg.global_threshold is True
    assert cfg.scale == pytest.approx((0.01 + 1.0) / 2)
    assert cfg.n_samples == 6000  # median element of the 1000..10000 grid
    assert cfg.seed == 7


def test_defaults_shortcut_skips_search():
    ds, attr, pred = tuning_problem()
    res = tune(ds, attr, pred, TuneConfig(trials=30, seed=3, defaults_shortcut=True, space=FAST_SPACE))
    assert len(res.trials) == 1
    assert res.trials[0].status == "default"
    assert res.best_config == default_config(FAST_SPACE, seed=3)


def test_tune_reproducible_and_in_bounds():
    ds, attr, pred = tuning_problem(seed=2)
    cfg = TuneConfig(trials=5, seed=11, space=FAST_SPACE)
    a = tune(ds, attr, pred, cfg)
    b = tune(ds, attr, pred, cfg)
    assert [t.config for t in a.trials] == [t.config for t in b.trials]
    assert a.best_objective == b.best_objective
    assert a.best_config == b.best_config
    for t in a.trials:
        assert 50 <= t.config.percentile <= 99
        assert isinstance(t.config.global_threshold, bool)
        assert 0.01 <= t.config.scale <= 1.0
        assert t.config.n_samples in FAST_SPACE.n_samples_grid
        assert t.status in ("completed", "pruned")
    # a different seed explores a different trajectory
    c = tune(ds, attr, pred, TuneConfig(trials=5, seed=12, space=FAST_SPACE))
    assert [t.config for t in c.trials] != [t.config for t in a.trials]


def test_best_objective_matches_fresh_recompute():
    ds, attr, pred = tuning_problem(seed=4)
    res = tune(ds, attr, pred, TuneConfig(trials=4, seed=1, space=FAST_SPACE))
    rs = extract_ruleset(ds, attr, pred, res.best_config)
    assert report(rs, ds, pred).metrics["mean_M"] == res.best_objective
    completed = [t.objective for t in res.trials if t.status == "completed"]
    assert res.best_objective == max(completed)


def test_tie_breaks_to_earliest_trial():
    ds, _, pred = tuning_problem(seed=5)
    # zero attributions: every config yields an empty ruleset, objective 0
    zero = AttributionTensor("z", np.zeros_like(ds.values), np.arange(ds.n_instances))
    res = tune(ds, zero, pred, TuneConfig(trials=4, seed=9, space=FAST_SPACE))
    assert res.best_objective == 0.0
    assert res.best_config == res.trials[0].config


def test_median_pruning_rule_holds_in_log():
    ds, attr, pred = tuning_problem(seed=6, n=32)
    res = tune(ds, attr, pred, TuneConfig(trials=10, seed=21, space=FAST_SPACE))
    trials = res.trials
    assert trials[0].status == "completed"  # nothing to compare against yet
    completed_cps = []
    for t in trials:
        if t.status == "pruned":
            assert t.objective is None
            assert completed_cps, "pruned with no completed baseline"
            assert t.checkpoint_value < float(np.median(completed_cps))
        else:
            assert t.objective is not None
            # a completed trial was not prunable at its checkpoint
            if completed_cps:
                assert t.checkpoint_value >= float(np.median(completed_cps))
            completed_cps.append(t.checkpoint_value)
    assert any(t.status == "completed" for t in trials)


def test_pruning_none_completes_everything():
    ds, attr, pred = tuning_problem(seed=7)
    res = tune(ds, attr, pred, TuneConfig(trials=4, seed=2, pruning="none", space=FAST_SPACE))
    assert all(t.status == "completed" for t in res.trials)


def test_trial_log_csv(tmp_path):
    ds, attr, pred = tuning_problem(seed=8)
    res = tune(ds, attr, pred, TuneConfig(trials=4, seed=13, space=FAST_SPACE))
    p = tmp_path / "trials.csv"
    save_trials_csv(res, p)
    lines = p.read_text().strip().splitlines()
    head = lines[0].split(",")
    assert head[0] == "trial" and "status" in head and "objective" in head
    assert len(lines) == 1 + len(res.trials)
    for t, line in zip(res.trials, lines[1:]):
        fields = line.split(",")
        assert int(fields[0]) == t.index
        if t.status == "pruned":
            assert fields[head.index("objective")] == ""


def test_extraction_config_toml_round_trip(tmp_path):
    cfg = ExtractionConfig(
        percentile=72,
        global_threshold=False,
        scale=0.33,
        n_samples=1500,
        hull_quantile=0.02,
        seed=42,
        delta_source="attributions",
    )
    p = tmp_path / "best.toml"
    save_extraction_config_toml(cfg, p)
    assert load_extraction_config(p) == cfg
    # json sidecars load through the same reader
    j = tmp_path / "best.json"
    j.write_text(
        '{"percentile": 72, "global_threshold": false, "scale": 0.33,'
        ' "n_samples": 1500, "hull_quantile": 0.02, "seed": 42,'
        ' "delta_source": "attributions"}'
    )
    assert load_extraction_config(j) == cfg


def test_tune_config_validation():
    with pytest.raises(ValueError):
        TuneConfig(trials=0)
    with pytest.raises(ValueError):
        TuneConfig(pruning="hyperband")
    with pytest.raises(ValueError):
        SearchSpace(n_samples_grid=())
