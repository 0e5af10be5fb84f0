"""Seeded random search over extraction hyperparameters with median pruning.

The search space covers the percentile p (integer), global vs per-feature
thresholding, the perturbation scale (continuous) and the sample count (a
fixed grid). Each trial extracts rules for the explained split and scores the
mean objective; a trial whose running mean after the checkpoint (25% of
instances by default) falls below the median of completed trials' values at
the same checkpoint is abandoned. Ties on the final objective go to the
earliest trial. ``defaults_shortcut`` skips the search and returns p=90,
global thresholding, and space-midpoint scale and sample count.

Trials reuse the tuning seed as the extraction seed, so a trial is a pure
function of its sampled hyperparameters and the reported best objective can
be recomputed exactly from the returned config.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .attrib import AttributionTensor
from .data import Dataset
from .extract import ExtractionConfig, InstanceExtractor
from .metrics import ObjectiveParams, objective
from .predict import Predictor

__all__ = [
    "SearchSpace",
    "TuneConfig",
    "TrialRecord",
    "TuneResult",
    "default_config",
    "tune",
    "save_trials_csv",
    "save_extraction_config_toml",
    "load_extraction_config",
]


@dataclass(frozen=True)
class SearchSpace:
    percentile_min: int = 50
    percentile_max: int = 99
    scale_min: float = 0.01
    scale_max: float = 1.0
    n_samples_grid: tuple[int, ...] = tuple(range(1000, 10001, 1000))

    def __post_init__(self):
        if not self.n_samples_grid:
            raise ValueError("n_samples_grid must not be empty")
        if self.percentile_min > self.percentile_max:
            raise ValueError("empty percentile range")


@dataclass(frozen=True)
class TuneConfig:
    trials: int = 30
    seed: int = 0
    pruning: str = "median"  # or "none"
    checkpoint_fraction: float = 0.25
    defaults_shortcut: bool = False
    space: SearchSpace = field(default_factory=SearchSpace)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.pruning not in ("median", "none"):
            raise ValueError(f"unknown pruning {self.pruning!r}")
        if not 0.0 < self.checkpoint_fraction <= 1.0:
            raise ValueError("checkpoint_fraction must be in (0, 1]")


@dataclass
class TrialRecord:
    index: int
    config: ExtractionConfig
    checkpoint_value: Optional[float]
    objective: Optional[float]  # None when pruned
    status: str  # "completed" | "pruned" | "default"


@dataclass
class TuneResult:
    best_config: ExtractionConfig
    best_objective: float
    trials: list[TrialRecord]


def default_config(space: SearchSpace, seed: int = 0) -> ExtractionConfig:
    grid = sorted(space.n_samples_grid)
    return ExtractionConfig(
        percentile=90,
        global_threshold=True,
        scale=(space.scale_min + space.scale_max) / 2.0,
        n_samples=grid[len(grid) // 2],
        seed=seed,
    )


def _sample_config(rng: np.random.Generator, space: SearchSpace, seed: int) -> ExtractionConfig:
    return ExtractionConfig(
        percentile=int(rng.integers(space.percentile_min, space.percentile_max + 1)),
        global_threshold=bool(rng.integers(0, 2)),
        scale=float(rng.uniform(space.scale_min, space.scale_max)),
        n_samples=int(rng.choice(np.asarray(space.n_samples_grid))),
        seed=seed,
    )


def _run_trial(
    dataset: Dataset,
    attr: AttributionTensor,
    predictor: Predictor,
    cfg: ExtractionConfig,
    params: ObjectiveParams,
    split: str,
    checkpoint: int,
    prune_below: Optional[float],
) -> tuple[Optional[float], Optional[float]]:
    """(checkpoint value, final objective); objective None when pruned."""
    ex = InstanceExtractor(dataset, attr, predictor, cfg, split=split)
    ms: list[float] = []
    cp_val: Optional[float] = None
    for j, n in enumerate(ex.explained, start=1):
        ms.append(objective(ex.rule_for(n), params))
        if j == checkpoint:
            cp_val = float(np.mean(ms))
            if prune_below is not None and cp_val < prune_below:
                return cp_val, None
    return cp_val, float(np.mean(ms))


def tune(
    dataset: Dataset,
    attr: AttributionTensor,
    predictor: Predictor,
    tune_config: TuneConfig = TuneConfig(),
    params: ObjectiveParams = ObjectiveParams(),
    split: str = "test",
) -> TuneResult:
    tc = tune_config
    if tc.defaults_shortcut:
        cfg = default_config(tc.space, seed=tc.seed)
        _, obj = _run_trial(
            dataset, attr, predictor, cfg, params, split, checkpoint=1, prune_below=None
        )
        rec = TrialRecord(0, cfg, None, obj, "default")
        return TuneResult(cfg, obj, [rec])

    n_explained = len(dataset.split_indices(split))
    checkpoint = max(1, math.ceil(tc.checkpoint_fraction * n_explained))
    rng = np.random.default_rng(tc.seed)
    records: list[TrialRecord] = []
    completed_cps: list[float] = []
    best: Optional[TrialRecord] = None
    for i in range(tc.trials):
        cfg = _sample_config(rng, tc.space, seed=tc.seed)
        prune_below = None
        if tc.pruning == "median" and completed_cps:
            prune_below = float(np.median(completed_cps))
        cp_val, obj = _run_trial(
            dataset, attr, predictor, cfg, params, split, checkpoint, prune_below
        )
        if obj is None:
            records.append(TrialRecord(i, cfg, cp_val, None, "pruned"))
            continue
        rec = TrialRecord(i, cfg, cp_val, obj, "completed")
        records.append(rec)
        completed_cps.append(cp_val)
        if best is None or obj > best.objective:  # strict: ties keep the earliest
            best = rec
    assert best is not None  # trial 0 can never be pruned
    return TuneResult(best.config, best.objective, records)


# ---------------------------------------------------------------------------
# persistence


def save_trials_csv(result: TuneResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "trial",
                "percentile",
                "global_threshold",
                "scale",
                "n_samples",
                "checkpoint",
                "objective",
                "status",
            ]
        )
        for t in result.trials:
            w.writerow(
                [
                    t.index,
                    t.config.percentile,
                    t.config.global_threshold,
                    repr(t.config.scale),
                    t.config.n_samples,
                    "" if t.checkpoint_value is None else repr(t.checkpoint_value),
                    "" if t.objective is None else repr(t.objective),
                    t.status,
                ]
            )


_CONFIG_FIELDS = (
    "percentile",
    "global_threshold",
    "scale",
    "n_samples",
    "hull_quantile",
    "seed",
    "delta_source",
)


def save_extraction_config_toml(cfg: ExtractionConfig, path: str | Path) -> None:
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [f"{name} = {fmt(getattr(cfg, name))}" for name in _CONFIG_FIELDS]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_extraction_config(path: str | Path) -> ExtractionConfig:
    path = Path(path)
    if path.suffix.lower() == ".toml":
        obj = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        obj = json.loads(path.read_text(encoding="utf-8"))
    unknown = sorted(set(obj) - set(_CONFIG_FIELDS))
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    return ExtractionConfig(**obj)
