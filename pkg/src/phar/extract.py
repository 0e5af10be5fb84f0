"""Rule extraction: attribution thresholding plus perturbation-hull intervals.

Per explained instance the steps are:

1. threshold the train-split attribution magnitudes at a percentile p, either
   one global cut or one per feature, and keep this instance's features whose
   |e| reaches the cut (a literal zero attribution never qualifies);
2. jointly perturb the kept features with uniform noise of half-width
   Delta_f = scale * train std of the feature (raw values by default,
   attribution magnitudes via ``delta_source="attributions"``), keep the
   samples the classifier still assigns to the instance's reference class,
   and take the per-feature quantile hull of the kept values;
3. widen each hull minimally so the source value itself lies in (lower,
   upper], and conjoin the intervals into a rule.

No kept samples, or no features past the threshold, means no rule for that
instance. Percentiles interpolate linearly between closest ranks throughout.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .attrib import AttributionTensor
from .core import Condition, FeatureId, Interval, Rule, RuleSet
from .data import Dataset
from .metrics import rule_metrics
from .predict import Predictor

__all__ = [
    "ExtractionConfig",
    "Thresholds",
    "compute_thresholds",
    "select_important",
    "perturbation_deltas",
    "derive_rule",
    "InstanceExtractor",
    "extract_ruleset",
]


@dataclass(frozen=True)
class ExtractionConfig:
    percentile: int = 90  # p, in [50, 99]
    global_threshold: bool = True  # one cut for all features vs per-feature
    scale: float = 0.505  # sigma_p, perturbation half-width multiplier
    n_samples: int = 6000  # N_p, perturbations per instance
    hull_quantile: float = 0.01  # two-sided quantile trim of kept values
    seed: int = 0
    delta_source: str = "values"  # or "attributions"

    def __post_init__(self):
        if not 50 <= self.percentile <= 99:
            raise ValueError(f"percentile must be in [50, 99], got {self.percentile}")
        if not 0.0 < self.scale:
            raise ValueError("scale must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not 0.0 <= self.hull_quantile < 0.5:
            raise ValueError("hull_quantile must be in [0, 0.5)")
        if self.delta_source not in ("values", "attributions"):
            raise ValueError(f"unknown delta_source {self.delta_source!r}")


@dataclass(frozen=True)
class Thresholds:
    is_global: bool
    global_value: Optional[float] = None
    per_feature: Optional[np.ndarray] = None  # (T, C)

    def cut_for(self, t: int, c: int) -> float:
        if self.is_global:
            return self.global_value
        return float(self.per_feature[t, c])


def _train_rows(attr: AttributionTensor, dataset: Dataset) -> np.ndarray:
    rows = attr.rows_for_mask(dataset.train_mask)
    if rows.shape[0] == 0:
        raise ValueError("attribution tensor has no train-split rows for thresholds")
    return rows


def compute_thresholds(
    attr: AttributionTensor, dataset: Dataset, config: ExtractionConfig
) -> Thresholds:
    """Percentile cuts over train-split |e|; test rows never contribute."""
    mags = np.abs(_train_rows(attr, dataset))
    if config.global_threshold:
        return Thresholds(
            is_global=True, global_value=float(np.percentile(mags, config.percentile))
        )
    return Thresholds(
        is_global=False, per_feature=np.percentile(mags, config.percentile, axis=0)
    )


def select_important(grid: np.ndarray, thresholds: Thresholds) -> list[FeatureId]:
    """Features of one instance whose |e| reaches the applicable cut.

    The comparison is inclusive, but an attribution of exactly zero carries no
    signal and is never selected; this keeps an all-zero tensor rule-free.
    """
    arr = np.asarray(grid, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    out = []
    for t in range(arr.shape[0]):
        for c in range(arr.shape[1]):
            mag = abs(float(arr[t, c]))
            if mag > 0.0 and mag >= thresholds.cut_for(t, c):
                out.append(FeatureId(t, c))
    return out


def perturbation_deltas(
    dataset: Dataset, attr: Optional[AttributionTensor], config: ExtractionConfig
) -> np.ndarray:
    """Half-widths Delta_f = scale * train std per feature, shape (T, C).

    Std is the population std (ddof=0) of the train split, taken over raw
    series values or over attribution magnitudes per ``delta_source``.
    """
    if config.delta_source == "values":
        base = dataset.values[dataset.train_mask]
    else:
        if attr is None:
            raise ValueError('delta_source="attributions" needs an attribution tensor')
        base = np.abs(_train_rows(attr, dataset))
    return config.scale * base.std(axis=0)


def derive_rule(
    x: np.ndarray,
    features: Iterable[FeatureId],
    c_ref: int,
    predictor: Predictor,
    deltas: np.ndarray,
    config: ExtractionConfig,
    rng: Optional[np.random.Generator] = None,
) -> Optional[Rule]:
    """Perturbation-hull rule for one instance; None when nothing is kept."""
    feats = sorted(set(features))
    if not feats:
        return None
    if rng is None:
        rng = np.random.default_rng(config.seed)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    samples = np.repeat(x[None], config.n_samples, axis=0)
    for f in feats:
        centre = x[f.timestep, f.channel]
        d = float(deltas[f.timestep, f.channel])
        samples[:, f.timestep, f.channel] = rng.uniform(
            centre - d, centre + d, config.n_samples
        )
    kept = samples[np.asarray(predictor.predict(samples)) == c_ref]
    if kept.shape[0] == 0:
        return None
    q_lo = 100.0 * config.hull_quantile
    conditions = []
    for f in feats:
        vals = kept[:, f.timestep, f.channel]
        lo, up = np.percentile(vals, [q_lo, 100.0 - q_lo])
        centre = float(x[f.timestep, f.channel])
        up = max(float(up), centre)
        lo = float(lo) if lo < centre else float(np.nextafter(centre, -np.inf))
        conditions.append(Condition(f, Interval(lo, up)))
    return Rule(conditions=tuple(conditions), predicted_class=int(c_ref))


class InstanceExtractor:
    """Per-instance extraction with the split-level work done once.

    Thresholds, perturbation deltas, reference labels and the evaluation
    cache are computed at construction; ``rule_for`` is then independent per
    instance, each with its own RNG stream seeded ``config.seed ^ n`` so the
    outcome does not depend on scheduling.
    """

    def __init__(
        self,
        dataset: Dataset,
        attr: AttributionTensor,
        predictor: Predictor,
        config: ExtractionConfig,
        split: str = "test",
        eval_split: str = "test",
    ):
        self.dataset = dataset
        self.attr = attr
        self.predictor = predictor
        self.config = config
        self.thresholds = compute_thresholds(attr, dataset, config)
        self.deltas = perturbation_deltas(dataset, attr, config)
        self.explained = [int(n) for n in dataset.split_indices(split)]
        refs = predictor.predict(dataset.values[self.explained])
        self._c_ref = dict(zip(self.explained, (int(v) for v in refs)))
        self._eval_values = dataset.values[dataset.split_indices(eval_split)]
        self._eval_labels = predictor.predict(self._eval_values)

    def rule_for(self, n: int) -> Optional[Rule]:
        row = self.attr.row_for(n)
        if row is None:
            return None
        feats = select_important(row, self.thresholds)
        if not feats:
            return None
        rule = derive_rule(
            self.dataset.values[n],
            feats,
            self._c_ref[n],
            self.predictor,
            self.deltas,
            self.config,
            rng=np.random.default_rng(self.config.seed ^ n),
        )
        if rule is None:
            return None
        cov, conf = rule_metrics(rule, self._eval_values, self._eval_labels)
        return dataclasses.replace(
            rule, coverage=cov, confidence=conf, source_instance=n
        )


def extract_ruleset(
    dataset: Dataset,
    attr: AttributionTensor,
    predictor: Predictor,
    config: ExtractionConfig,
    split: str = "test",
    jobs: int = 1,
    eval_split: str = "test",
) -> RuleSet:
    """Rules for every instance of ``split`` that has an attribution row.

    Instances without a row, without selected features, or whose perturbation
    keeps nothing, map to None. Each produced rule carries its coverage and
    confidence evaluated on ``eval_split``.
    """
    ex = InstanceExtractor(dataset, attr, predictor, config, split, eval_split)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            produced = list(pool.map(ex.rule_for, ex.explained))
    else:
        produced = [ex.rule_for(n) for n in ex.explained]
    return RuleSet(
        provenance=attr.tag,
        rules=dict(zip(ex.explained, produced)),
        config=dataclasses.asdict(config),
    )
