"""Combining per-instance rules from several attribution sources.

Six methods, all per explained instance over the union of the inputs'
domains:

* ``intersection`` keeps features present in every source rule with the
  tightest bounds (max lower, min upper); any missing source rule, no shared
  feature, or an empty intersection means no fused rule.
* ``union`` keeps features from any source rule with the widest bounds
  (min lower, max upper); absent only when no source has a rule.
* ``weighted`` scores each feature by the metric-weighted fraction of sources
  whose rule contains it and keeps features strictly above a presence
  threshold; kept intervals merge by union.
* ``best`` copies the source rule with the highest metric; ties resolve by
  source order ANCHOR, LIME, SHAP, then remaining tags lexicographically.
* ``lasso_local`` / ``lasso_global`` regress the predictor's class indicator
  on binary condition-satisfaction columns over the train split, with an L1
  penalty, and keep conditions whose coefficient magnitude clears a tolerance.
  Local fits one model per instance on its candidate conditions; global fits
  one model on every condition and hands each instance the surviving
  conditions it contributed, imputing the most frequent fused rule (preferring
  the instance's predicted class) for instances with no candidates at all.

The lasso objective is ||y - b0 - Z beta||^2 + lambda * ||beta||_1 with an
unpenalized intercept, binary unstandardized columns, cyclic coordinate
descent and soft thresholding. ``lambda_max`` is the smallest penalty that
provably zeroes every coefficient for this objective, 2 * max_j |Z_j^T
(y - ybar)|; the default penalty is 0.01 * lambda_max.

All methods require class agreement among an instance's candidate rules.
``finalize`` re-evaluates coverage and confidence of fused rules on the
evaluation split.
"""

from __future__ import annotations

import dataclasses
import json
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Condition, FeatureId, Interval, Rule, RuleSet, rule_to_json
from .data import Dataset
from .metrics import objective, rule_metrics
from .predict import Predictor

__all__ = [
    "FUSION_METHODS",
    "FusionConfig",
    "FusionConflictError",
    "DegenerateWeightsError",
    "LassoFit",
    "lasso_coordinate_descent",
    "lasso_objective",
    "lambda_max",
    "fuse_rulesets",
    "finalize",
]

FUSION_METHODS = (
    "intersection",
    "union",
    "weighted",
    "best",
    "lasso_local",
    "lasso_global",
)

_WEIGHT_METRICS = ("confidence", "coverage", "M")
_SOURCE_PRIORITY = {"ANCHOR": 0, "LIME": 1, "SHAP": 2}


class FusionConflictError(RuntimeError):
    """Sources disagree on the predicted class of an instance."""


class DegenerateWeightsError(RuntimeError):
    """Weighted fusion found candidates but every weight is zero."""


@dataclass(frozen=True)
class FusionConfig:
    method: str
    weight_metric: str = "M"
    presence_tau: float = 0.5
    lam: Optional[float] = None  # None: 0.01 * lambda_max per fit
    beta_zero_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        method = "lasso_local" if self.method == "lasso" else self.method
        object.__setattr__(self, "method", method)
        if method not in FUSION_METHODS:
            raise ValueError(f"unknown fusion method {self.method!r}")
        if self.weight_metric not in _WEIGHT_METRICS:
            raise ValueError(f"unknown weight metric {self.weight_metric!r}")
        if not 0.0 <= self.presence_tau <= 1.0:
            raise ValueError("presence_tau must be in [0, 1]")


# ---------------------------------------------------------------------------
# lasso solver


@dataclass
class LassoFit:
    beta: np.ndarray
    intercept: float
    objective_history: list[float]  # after each sweep, centered objective
    sweeps: int
    converged: bool


def _soft(x: float, thr: float) -> float:
    if x > thr:
        return x - thr
    if x < -thr:
        return x + thr
    return 0.0


def lasso_objective(
    Z: np.ndarray, y: np.ndarray, beta: np.ndarray, intercept: float, lam: float
) -> float:
    r = np.asarray(y, float) - intercept - np.asarray(Z, float) @ beta
    return float(r @ r + lam * np.abs(beta).sum())


def lambda_max(Z: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which the all-zero solution is optimal.

    Uses the same centered per-column dot products as the solver so that at
    exactly this penalty the first soft-threshold lands on the boundary and
    every coefficient stays at literal zero.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    if Z.shape[1] == 0:
        return 0.0
    Zc = Z - Z.mean(axis=0)
    yc = y - y.mean()
    return 2.0 * max(abs(float(Zc[:, j] @ yc)) for j in range(Z.shape[1]))


def lasso_coordinate_descent(
    Z: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_sweeps: int = 1000,
) -> LassoFit:
    """Cyclic coordinate descent with an implicit optimal intercept.

    Works on column-centered data so the intercept is always at its optimum;
    the recorded objective is therefore non-increasing sweep over sweep.
    Constant columns get coefficient zero.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = Z.shape
    col_mean = Z.mean(axis=0)
    Zc = Z - col_mean
    yc = y - y.mean()
    norms = (Zc**2).sum(axis=0)
    beta = np.zeros(k)
    resid = yc.copy()
    history = [float(resid @ resid)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_step = 0.0
        for j in range(k):
            if norms[j] == 0.0:
                continue
            rho = float(Zc[:, j] @ resid) + beta[j] * norms[j]
            new = _soft(rho, lam / 2.0) / norms[j]
            step = new - beta[j]
            if step != 0.0:
                resid -= Zc[:, j] * step
                beta[j] = new
            max_step = max(max_step, abs(step))
        history.append(float(resid @ resid + lam * np.abs(beta).sum()))
        if max_step < tol:
            converged = True
            break
    intercept = float(y.mean() - col_mean @ beta)
    return LassoFit(beta, intercept, history, sweeps, converged)


# ---------------------------------------------------------------------------
# per-instance assembly helpers


def _shared_class(n: int, present: Sequence[Rule]) -> int:
    classes = {r.predicted_class for r in present}
    if len(classes) > 1:
        raise FusionConflictError(
            f"instance {n}: sources disagree on the class ({sorted(classes)})"
        )
    return present[0].predicted_class


def _metric_value(rule: Rule, metric: str) -> float:
    if metric == "confidence":
        return rule.confidence if rule.confidence is not None else 0.0
    if metric == "coverage":
        return rule.coverage
    return objective(rule)


def _merge_union(conds: Sequence[Condition], cls: int, n: int) -> Rule:
    by_feat: dict[FeatureId, tuple[float, float]] = {}
    for c in conds:
        lo, up = c.interval.lower, c.interval.upper
        if c.feature in by_feat:
            old_lo, old_up = by_feat[c.feature]
            lo, up = min(old_lo, lo), max(old_up, up)
        by_feat[c.feature] = (lo, up)
    return Rule(
        conditions=tuple(
            Condition(f, Interval(lo, up)) for f, (lo, up) in by_feat.items()
        ),
        predicted_class=cls,
        source_instance=n,
    )


def _fuse_intersection(n: int, cands: list[Optional[Rule]]) -> Optional[Rule]:
    if any(r is None for r in cands):
        return None
    cls = _shared_class(n, cands)
    shared = set(cands[0].features)
    for r in cands[1:]:
        shared &= set(r.features)
    if not shared:
        return None
    conds = []
    for f in sorted(shared):
        lo = max(r_cond(r, f).interval.lower for r in cands)
        up = min(r_cond(r, f).interval.upper for r in cands)
        if not lo < up:
            return None
        conds.append(Condition(f, Interval(lo, up)))
    return Rule(conditions=tuple(conds), predicted_class=cls, source_instance=n)


def r_cond(rule: Rule, f: FeatureId) -> Condition:
    for c in rule.conditions:
        if c.feature == f:
            return c
    raise KeyError(f)


def _fuse_union(n: int, cands: list[Optional[Rule]]) -> Optional[Rule]:
    present = [r for r in cands if r is not None]
    if not present:
        return None
    cls = _shared_class(n, present)
    return _merge_union([c for r in present for c in r.conditions], cls, n)


def _fuse_weighted(
    n: int, cands: list[Optional[Rule]], config: FusionConfig
) -> Optional[Rule]:
    present = [r for r in cands if r is not None]
    if not present:
        return None
    cls = _shared_class(n, present)
    weights = [_metric_value(r, config.weight_metric) for r in present]
    total = sum(weights)
    if total == 0.0:
        raise DegenerateWeightsError(f"instance {n}: all source weights are zero")
    features = sorted({f for r in present for f in r.features})
    kept_conds = []
    for f in features:
        mass = sum(w for r, w in zip(present, weights) if f in r.features)
        if mass / total > config.presence_tau:
            kept_conds.extend(
                r_cond(r, f) for r in present if f in r.features
            )
    if not kept_conds:
        return None
    return _merge_union(kept_conds, cls, n)


def _fuse_best(
    n: int, tagged: list[tuple[str, Optional[Rule]]], config: FusionConfig
) -> Optional[Rule]:
    ordered = sorted(
        [(tag, r) for tag, r in tagged if r is not None],
        key=lambda tr: (_SOURCE_PRIORITY.get(tr[0], 3), tr[0]),
    )
    if not ordered:
        return None
    _shared_class(n, [r for _, r in ordered])
    best = None
    best_val = -np.inf
    for _, r in ordered:
        val = _metric_value(r, config.weight_metric)
        if val > best_val:  # strict: earlier sources win ties
            best, best_val = r, val
    return dataclasses.replace(best, source_instance=n)


# ---------------------------------------------------------------------------
# lasso fusion


def _cond_key(c: Condition) -> tuple:
    return (c.feature.timestep, c.feature.channel, c.interval.lower, c.interval.upper)


def _condition_columns(
    conds: list[Condition], train_values: np.ndarray
) -> np.ndarray:
    cols = np.empty((train_values.shape[0], len(conds)))
    for j, c in enumerate(conds):
        col = train_values[:, c.feature.timestep, c.feature.channel]
        cols[:, j] = (col > c.interval.lower) & (col <= c.interval.upper)
    return cols


def _fit_and_select(
    conds: list[Condition],
    train_values: np.ndarray,
    y: np.ndarray,
    config: FusionConfig,
) -> list[Condition]:
    Z = _condition_columns(conds, train_values)
    lam = config.lam if config.lam is not None else 0.01 * lambda_max(Z, y)
    fit = lasso_coordinate_descent(Z, y, lam)
    return [c for c, b in zip(conds, fit.beta) if abs(b) > config.beta_zero_tol]


def _dedupe(conds: list[Condition]) -> list[Condition]:
    seen = {}
    for c in conds:
        seen.setdefault(_cond_key(c), c)
    return [seen[k] for k in sorted(seen)]


def _fuse_lasso_local(
    n: int,
    cands: list[Optional[Rule]],
    train_values: np.ndarray,
    train_labels: np.ndarray,
    config: FusionConfig,
) -> Optional[Rule]:
    present = [r for r in cands if r is not None]
    if not present:
        return None
    cls = _shared_class(n, present)
    conds = _dedupe([c for r in present for c in r.conditions])
    y = (train_labels == cls).astype(float)
    survivors = _fit_and_select(conds, train_values, y, config)
    if not survivors:
        return None
    return _merge_union(survivors, cls, n)


def _rule_identity(rule: Rule) -> str:
    return json.dumps(rule_to_json(rule), sort_keys=True)


def _fuse_lasso_global(
    domain: list[int],
    cands_by_n: dict[int, list[Optional[Rule]]],
    dataset: Dataset,
    predictor: Predictor,
    config: FusionConfig,
) -> dict[int, Optional[Rule]]:
    train_values = dataset.values[dataset.train_mask]
    train_labels = np.asarray(predictor.predict(train_values))
    all_rules: list[Rule] = []
    classes: dict[int, int] = {}
    for n in domain:
        present = [r for r in cands_by_n[n] if r is not None]
        if present:
            classes[n] = _shared_class(n, present)
            all_rules.extend(present)
    out: dict[int, Optional[Rule]] = {n: None for n in domain}
    if not all_rules:
        return out
    modal = min(
        Counter(r.predicted_class for r in all_rules).items(),
        key=lambda kv: (-kv[1], kv[0]),
    )[0]
    conds = _dedupe([c for r in all_rules for c in r.conditions])
    y = (train_labels == modal).astype(float)
    surviving = {_cond_key(c) for c in _fit_and_select(conds, train_values, y, config)}
    for n in domain:
        present = [r for r in cands_by_n[n] if r is not None]
        if not present:
            continue
        mine = _dedupe([c for r in present for c in r.conditions])
        kept = [c for c in mine if _cond_key(c) in surviving]
        if kept:
            out[n] = _merge_union(kept, classes[n], n)
    # imputation for instances with no candidates: most frequent fused rule,
    # preferring the instance's predicted class, then overall
    orphans = [n for n in domain if not any(r is not None for r in cands_by_n[n])]
    pool = [r for r in out.values() if r is not None]
    if orphans and pool:
        counts = Counter(_rule_identity(r) for r in pool)
        by_identity = {_rule_identity(r): r for r in pool}

        def most_frequent(rules: list[Rule]) -> Optional[Rule]:
            if not rules:
                return None
            keys = {_rule_identity(r) for r in rules}
            best_key = min(keys, key=lambda k: (-counts[k], k))
            return by_identity[best_key]

        orphan_labels = predictor.predict(dataset.values[orphans])
        for n, label in zip(orphans, orphan_labels):
            chosen = most_frequent(
                [r for r in pool if r.predicted_class == int(label)]
            ) or most_frequent(pool)
            if chosen is not None:
                out[n] = dataclasses.replace(chosen, source_instance=n)
    return out


# ---------------------------------------------------------------------------
# entry points


def fuse_rulesets(
    rulesets: Sequence[RuleSet],
    config: FusionConfig,
    dataset: Optional[Dataset] = None,
    predictor: Optional[Predictor] = None,
) -> RuleSet:
    if len(rulesets) < 2:
        raise ValueError("fusion needs at least two rule sets")
    needs_data = config.method in ("lasso_local", "lasso_global")
    if needs_data and (dataset is None or predictor is None):
        raise ValueError(f"{config.method} fusion needs a dataset and predictor")
    domain = sorted(set().union(*(set(r.rules) for r in rulesets)))
    cands_by_n = {n: [r.rules.get(n) for r in rulesets] for n in domain}
    rules: dict[int, Optional[Rule]]
    if config.method == "intersection":
        rules = {n: _fuse_intersection(n, cands_by_n[n]) for n in domain}
    elif config.method == "union":
        rules = {n: _fuse_union(n, cands_by_n[n]) for n in domain}
    elif config.method == "weighted":
        rules = {n: _fuse_weighted(n, cands_by_n[n], config) for n in domain}
    elif config.method == "best":
        rules = {
            n: _fuse_best(
                n, [(r.provenance, r.rules.get(n)) for r in rulesets], config
            )
            for n in domain
        }
    elif config.method == "lasso_local":
        train_values = dataset.values[dataset.train_mask]
        train_labels = np.asarray(predictor.predict(train_values))
        rules = {
            n: _fuse_lasso_local(
                n, cands_by_n[n], train_values, train_labels, config
            )
            for n in domain
        }
    else:
        rules = _fuse_lasso_global(domain, cands_by_n, dataset, predictor, config)
    provenance = "+".join(r.provenance for r in rulesets) + "/" + config.method
    return RuleSet(
        provenance=provenance, rules=rules, config=dataclasses.asdict(config)
    )


def finalize(
    ruleset: RuleSet, dataset: Dataset, predictor: Predictor, split: str = "test"
) -> RuleSet:
    """Re-evaluate coverage and confidence of every rule on ``split``."""
    values = dataset.values[dataset.split_indices(split)]
    labels = predictor.predict(values)
    rules: dict[int, Optional[Rule]] = {}
    for n, rule in ruleset.rules.items():
        if rule is None:
            rules[n] = None
            continue
        cov, conf = rule_metrics(rule, values, labels)
        rules[n] = dataclasses.replace(rule, coverage=cov, confidence=conf)
    return RuleSet(
        provenance=ruleset.provenance, rules=rules, config=dict(ruleset.config)
    )
