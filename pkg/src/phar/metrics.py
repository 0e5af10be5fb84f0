"""Rule quality: coverage, confidence, and a penalized product objective.

For a rule R evaluated on a split S of the dataset:

* coverage  COV(R) = |{i in S : R satisfied by x_i}| / |S|
* confidence CONF(R) = fraction of satisfying instances whose *predicted*
  label equals R's class; undefined (None) when nothing satisfies R.

The per-instance objective is M = COV * CONF with three sequential penalties:
confidence in (0, conf_floor) multiplies by CONF/conf_floor, coverage in
(0, cov_floor) multiplies by COV/cov_floor, and more than max_features
conditions multiplies by max_features/|F|. An absent rule, or absent
confidence, scores 0.

Report aggregates: mean_M averages over every explained instance (absent
rules contribute 0); ER is the fraction of explained instances that got a
rule; the remaining means and the feature median run only over instances
with rules, and instances with undefined confidence are additionally left
out of mean_CONF.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Rule, RuleSet
from .data import Dataset
from .predict import Predictor

__all__ = [
    "ObjectiveParams",
    "MetricsReport",
    "satisfaction_mask",
    "rule_metrics",
    "coverage",
    "confidence",
    "objective_value",
    "objective",
    "report",
    "save_report",
    "load_report",
]

METRIC_KEYS = (
    "mean_M",
    "ER",
    "mean_CONF",
    "mean_COV",
    "mean_features",
    "median_features",
    "CONFxER",
    "CONFxCOVxER",
)


@dataclass(frozen=True)
class ObjectiveParams:
    conf_floor: float = 0.5
    cov_floor: float = 0.01
    max_features: int = 10


def satisfaction_mask(rule: Rule, values: np.ndarray) -> np.ndarray:
    """Boolean mask over (M, T, C) values: which instances satisfy the rule."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    mask = np.ones(arr.shape[0], dtype=bool)
    for c in rule.conditions:
        col = arr[:, c.feature.timestep, c.feature.channel]
        mask &= (col > c.interval.lower) & (col <= c.interval.upper)
    return mask


def rule_metrics(
    rule: Rule, values: np.ndarray, pred_labels: np.ndarray
) -> tuple[float, Optional[float]]:
    """(coverage, confidence) against precomputed split values and labels."""
    sat = satisfaction_mask(rule, values)
    n_sat = int(sat.sum())
    cov = n_sat / sat.shape[0]
    if n_sat == 0:
        return cov, None
    conf = float(np.mean(np.asarray(pred_labels)[sat] == rule.predicted_class))
    return cov, conf


def coverage(rule: Rule, dataset: Dataset, split: str = "test") -> float:
    values = dataset.values[dataset.split_indices(split)]
    return float(satisfaction_mask(rule, values).mean())


def confidence(
    rule: Rule, dataset: Dataset, predictor: Predictor, split: str = "test"
) -> Optional[float]:
    values = dataset.values[dataset.split_indices(split)]
    return rule_metrics(rule, values, predictor.predict(values))[1]


def objective_value(
    cov: float,
    conf: Optional[float],
    n_features: int,
    params: ObjectiveParams = ObjectiveParams(),
) -> float:
    if conf is None:
        return 0.0
    m = cov * conf
    if 0.0 < conf < params.conf_floor:
        m *= conf / params.conf_floor
    if 0.0 < cov < params.cov_floor:
        m *= cov / params.cov_floor
    if n_features > params.max_features:
        m *= params.max_features / n_features
    return m


def objective(rule: Optional[Rule], params: ObjectiveParams = ObjectiveParams()) -> float:
    """Objective from the metrics already attached to a rule; absent rule is 0."""
    if rule is None:
        return 0.0
    return objective_value(rule.coverage, rule.confidence, rule.n_features, params)


@dataclass
class MetricsReport:
    provenance: str
    dataset: str
    split: str
    metrics: dict
    per_instance: dict[int, dict] = field(default_factory=dict)

    def metric(self, name: str) -> Optional[float]:
        if name not in self.metrics:
            raise KeyError(
                f"unknown metric {name!r}; have {sorted(self.metrics)}"
            )
        return self.metrics[name]


def report(
    ruleset: RuleSet,
    dataset: Dataset,
    predictor: Predictor,
    params: ObjectiveParams = ObjectiveParams(),
    split: str = "test",
) -> MetricsReport:
    values = dataset.values[dataset.split_indices(split)]
    labels = predictor.predict(values)
    per_instance: dict[int, dict] = {}
    m_values, covs, confs, feats = [], [], [], []
    for n in sorted(ruleset.rules):
        rule = ruleset.rules[n]
        if rule is None:
            per_instance[n] = {
                "M": 0.0,
                "coverage": None,
                "confidence": None,
                "n_features": None,
            }
            m_values.append(0.0)
            continue
        cov, conf = rule_metrics(rule, values, labels)
        m = objective_value(cov, conf, rule.n_features, params)
        per_instance[n] = {
            "M": m,
            "coverage": cov,
            "confidence": conf,
            "n_features": rule.n_features,
        }
        m_values.append(m)
        covs.append(cov)
        feats.append(rule.n_features)
        if conf is not None:
            confs.append(conf)
    n_explained = len(ruleset.rules)
    er = len(covs) / n_explained if n_explained else 0.0
    mean_conf = float(np.mean(confs)) if confs else None
    mean_cov = float(np.mean(covs)) if covs else None
    metrics = {
        "mean_M": float(np.mean(m_values)) if m_values else 0.0,
        "ER": er,
        "mean_CONF": mean_conf,
        "mean_COV": mean_cov,
        "mean_features": float(np.mean(feats)) if feats else None,
        "median_features": float(np.median(feats)) if feats else None,
        "CONFxER": None if mean_conf is None else mean_conf * er,
        "CONFxCOVxER": None
        if mean_conf is None or mean_cov is None
        else mean_conf * mean_cov * er,
    }
    return MetricsReport(
        provenance=ruleset.provenance,
        dataset=dataset.name,
        split=split,
        metrics=metrics,
        per_instance=per_instance,
    )


def save_report(rep: MetricsReport, path: str | Path) -> None:
    obj = {
        "provenance": rep.provenance,
        "dataset": rep.dataset,
        "split": rep.split,
        "metrics": rep.metrics,
        "per_instance": {str(n): v for n, v in sorted(rep.per_instance.items())},
    }
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def load_report(path: str | Path) -> MetricsReport:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return MetricsReport(
        provenance=obj["provenance"],
        dataset=obj["dataset"],
        split=obj["split"],
        metrics=obj["metrics"],
        per_instance={int(n): v for n, v in obj.get("per_instance", {}).items()},
    )
