"""Core rule types: half-open interval conditions over time-series features.

A rule is a conjunction of conditions "feature value in (lower, upper]" with a
predicted class. Membership is strict on the lower bound and inclusive on the
upper; either bound may be infinite. Features are addressed by (timestep,
channel) and named "t{i}c{v}", shortened to "t{i}" for single-channel data.

Absence of a rule is represented at the RuleSet level (entry is None); an
empty conjunction is not representable on purpose.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "FeatureId",
    "Interval",
    "Condition",
    "Rule",
    "RuleSet",
    "feature_name",
    "parse_feature_name",
    "rule_satisfied",
    "rule_to_json",
    "rule_from_json",
    "rule_to_text",
    "save_rules",
    "load_rules",
]


@dataclass(frozen=True, order=True)
class FeatureId:
    """A single scalar position in a T x C series."""

    timestep: int
    channel: int = 0

    def __post_init__(self):
        if self.timestep < 0 or self.channel < 0:
            raise ValueError(f"negative feature coordinates: {self}")


def feature_name(fid: FeatureId, multivariate: bool) -> str:
    """Canonical text name: "t3c1" with channels, "t3" without."""
    if multivariate:
        return f"t{fid.timestep}c{fid.channel}"
    return f"t{fid.timestep}"


def parse_feature_name(name: str) -> FeatureId:
    """Inverse of :func:`feature_name`; accepts both forms."""
    if not name.startswith("t"):
        raise ValueError(f"bad feature name {name!r}")
    body = name[1:]
    if "c" in body:
        t_part, _, c_part = body.partition("c")
    else:
        t_part, c_part = body, "0"
    try:
        return FeatureId(int(t_part), int(c_part))
    except ValueError as exc:
        raise ValueError(f"bad feature name {name!r}") from exc


@dataclass(frozen=True)
class Interval:
    """Half-open interval (lower, upper]; bounds may be -inf / +inf."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, up = float(self.lower), float(self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if math.isnan(lo) or math.isnan(up):
            raise ValueError("interval bounds must not be NaN")
        if not lo < up:
            raise ValueError(f"empty interval ({lo}, {up}]")

    def contains(self, x: float) -> bool:
        return self.lower < x <= self.upper

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)


@dataclass(frozen=True)
class Condition:
    feature: FeatureId
    interval: Interval

    def satisfied_by(self, series: np.ndarray) -> bool:
        x = float(series[self.feature.timestep, self.feature.channel])
        return self.interval.contains(x)


@dataclass(frozen=True)
class Rule:
    """Conjunction of interval conditions predicting a class.

    Conditions are stored sorted by (timestep, channel) and must address
    distinct features. ``confidence`` is None when undefined (no instance in
    the evaluation split satisfied the rule).
    """

    conditions: tuple[Condition, ...]
    predicted_class: int
    confidence: Optional[float] = None
    coverage: float = 0.0
    source_instance: Optional[int] = None

    def __post_init__(self):
        conds = tuple(sorted(self.conditions, key=lambda c: c.feature))
        if not conds:
            raise ValueError("a rule needs at least one condition")
        feats = [c.feature for c in conds]
        if len(set(feats)) != len(feats):
            raise ValueError(f"duplicate features in rule: {feats}")
        object.__setattr__(self, "conditions", conds)

    @property
    def features(self) -> tuple[FeatureId, ...]:
        return tuple(c.feature for c in self.conditions)

    @property
    def n_features(self) -> int:
        return len(self.conditions)


@dataclass
class RuleSet:
    """Instance index -> optional Rule, plus where the rules came from.

    The mapping's domain is the full explained split; a None value means no
    rule was produced for that instance.
    """

    provenance: str
    rules: dict[int, Optional[Rule]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def present(self) -> dict[int, Rule]:
        return {n: r for n, r in self.rules.items() if r is not None}

    @property
    def n_explained(self) -> int:
        return len(self.rules)


def rule_satisfied(rule: Rule, series: np.ndarray) -> bool:
    """True iff every condition holds for the T x C series (T,) also accepted."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return all(c.satisfied_by(arr) for c in rule.conditions)


# ---------------------------------------------------------------------------
# serialization


def _bound_to_json(x: float) -> Optional[float]:
    return None if math.isinf(x) else x


def _bound_from_json(x, infinity: float) -> float:
    if x is None:
        return infinity
    x = float(x)
    if math.isnan(x):
        raise ValueError("NaN bound in rule JSON")
    return x


def rule_to_json(rule: Rule) -> dict:
    return {
        "conditions": [
            {
                "t": c.feature.timestep,
                "c": c.feature.channel,
                "lower": _bound_to_json(c.interval.lower),
                "upper": _bound_to_json(c.interval.upper),
            }
            for c in rule.conditions
        ],
        "predicted_class": int(rule.predicted_class),
        "confidence": None if rule.confidence is None else float(rule.confidence),
        "coverage": float(rule.coverage),
    }


def rule_from_json(obj: dict, source_instance: Optional[int] = None) -> Rule:
    conds = tuple(
        Condition(
            FeatureId(int(c["t"]), int(c.get("c", 0))),
            Interval(
                _bound_from_json(c["lower"], -math.inf),
                _bound_from_json(c["upper"], math.inf),
            ),
        )
        for c in obj["conditions"]
    )
    conf = obj.get("confidence")
    return Rule(
        conditions=conds,
        predicted_class=int(obj["predicted_class"]),
        confidence=None if conf is None else float(conf),
        coverage=float(obj.get("coverage", 0.0)),
        source_instance=source_instance,
    )


def _fmt_bound(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return f"{x:.2f}"


def rule_to_text(rule: Rule, multivariate: bool = False) -> str:
    """Human-readable one-liner, 2-decimal bounds (lossy; JSON is canonical)."""
    parts = [
        f"{feature_name(c.feature, multivariate)} in "
        f"({_fmt_bound(c.interval.lower)}, {_fmt_bound(c.interval.upper)}]"
        for c in rule.conditions
    ]
    conf = "NA" if rule.confidence is None else f"{rule.confidence:.2f}"
    return (
        " AND ".join(parts)
        + f" => class {rule.predicted_class} [CONF={conf}, COV={rule.coverage:.2f}]"
    )


def save_rules(ruleset: RuleSet, path: str | Path) -> None:
    """Write a rule set as a JSON array of {instance_index, rule|null}."""
    records = [
        {"instance_index": n, "rule": None if r is None else rule_to_json(r)}
        for n, r in sorted(ruleset.rules.items())
    ]
    Path(path).write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")


def load_rules(path: str | Path, provenance: Optional[str] = None) -> RuleSet:
    """Inverse of :func:`save_rules`.

    The array format carries no provenance; callers may pass one, otherwise
    the file stem is used.
    """
    path = Path(path)
    records = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(records, list):
        raise ValueError(f"{path}: expected a JSON array of rule records")
    rules: dict[int, Optional[Rule]] = {}
    for rec in records:
        n = int(rec["instance_index"])
        if n in rules:
            raise ValueError(f"{path}: duplicate instance_index {n}")
        obj = rec.get("rule")
        rules[n] = None if obj is None else rule_from_json(obj, source_instance=n)
    return RuleSet(provenance=provenance or path.stem, rules=rules)
