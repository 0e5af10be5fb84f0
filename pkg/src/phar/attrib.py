"""Attribution ingest: per-instance feature scores aligned to a dataset.

Scores arrive as CSV with an ``instance_index`` column followed by canonical
feature columns (``t0,t1,...`` or ``t0c0,t0c1,...``). The tensor is dense over
the dataset's T x C grid; features missing from the header are zero. Row
count may be any subset of the dataset's instances.

Also here: a text parser for precomputed conjunction rules (one rule per
line), an occlusion stand-in that produces flip-indicator attributions from
any predictor, and a simulated-attribution generator for the bundled
synthetic data.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    Condition,
    FeatureId,
    Interval,
    Rule,
    RuleSet,
    feature_name,
    parse_feature_name,
)
from .data import Dataset
from .predict import Predictor

__all__ = [
    "AttributionTensor",
    "load_attributions",
    "save_attributions",
    "occlusion_attribution",
    "parse_anchor_rules",
    "make_synthetic_attributions",
]


@dataclass
class AttributionTensor:
    """Attribution values for a subset of a dataset's instances.

    ``values[i]`` is the T x C score grid for dataset instance
    ``instance_indices[i]``.
    """

    tag: str
    values: np.ndarray  # (M, T, C)
    instance_indices: np.ndarray  # (M,) int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 2:
            self.values = self.values[:, :, None]
        self.instance_indices = np.asarray(self.instance_indices, dtype=int)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("attribution values must be finite")
        idx = self.instance_indices
        if len(np.unique(idx)) != len(idx):
            raise ValueError("duplicate instance indices in attribution tensor")
        self._row_of = {int(n): i for i, n in enumerate(idx)}

    def row_for(self, instance: int) -> Optional[np.ndarray]:
        i = self._row_of.get(int(instance))
        return None if i is None else self.values[i]

    def rows_for_mask(self, mask: np.ndarray) -> np.ndarray:
        """Rows whose instance falls inside a boolean dataset mask."""
        keep = [i for i, n in enumerate(self.instance_indices) if mask[n]]
        return self.values[keep]


# ---------------------------------------------------------------------------
# CSV round trip


def load_attributions(
    path: str | Path, dataset: Dataset, tag: Optional[str] = None
) -> AttributionTensor:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty attribution file")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != "instance_index":
        raise ValueError(f"{path}: first column must be instance_index")
    t_max, c_max = dataset.n_timesteps, dataset.n_channels
    cols: list[FeatureId] = []
    for name in header[1:]:
        try:
            fid = parse_feature_name(name)
        except ValueError as exc:
            raise ValueError(f"{path}: unknown column {name!r}") from exc
        if fid.timestep >= t_max or fid.channel >= c_max:
            raise ValueError(
                f"{path}: column {name!r} outside the {t_max} x {c_max} grid"
            )
        cols.append(fid)
    indices: list[int] = []
    rows: list[np.ndarray] = []
    seen: set[int] = set()
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}:{ln}: expected {len(header)} fields")
        try:
            n = int(parts[0])
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: non-numeric field") from exc
        if n < 0 or n >= dataset.n_instances:
            raise ValueError(f"{path}:{ln}: instance_index {n} out of range")
        if n in seen:
            raise ValueError(f"{path}:{ln}: duplicate instance_index {n}")
        if any(not math.isfinite(v) for v in vals):
            raise ValueError(f"{path}:{ln}: non-finite attribution value")
        seen.add(n)
        grid = np.zeros((t_max, c_max))
        for fid, v in zip(cols, vals):
            grid[fid.timestep, fid.channel] = v
        indices.append(n)
        rows.append(grid)
    if not rows:
        raise ValueError(f"{path}: no attribution rows")
    return AttributionTensor(tag or path.stem, np.stack(rows), np.array(indices))


def save_attributions(tensor: AttributionTensor, path: str | Path) -> None:
    """Full-grid CSV; values via repr so load(save(x)) is value-exact."""
    m, t_max, c_max = tensor.values.shape
    multivariate = c_max > 1
    names = [
        feature_name(FeatureId(t, c), multivariate)
        for t in range(t_max)
        for c in range(c_max)
    ]
    out = ["instance_index," + ",".join(names)]
    for i in range(m):
        flat = tensor.values[i].reshape(-1)
        out.append(
            str(int(tensor.instance_indices[i]))
            + ","
            + ",".join(repr(float(v)) for v in flat)
        )
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# occlusion stand-in


def occlusion_attribution(
    dataset: Dataset,
    predictor: Predictor,
    split: str = "all",
    baseline: str = "train_mean",
) -> AttributionTensor:
    """Flip-indicator attributions: 1.0 where replacing one feature with the
    baseline changes the predicted label, else 0.0.

    ``baseline`` is "zero" or "train_mean" (per-feature mean over the train
    split). Deterministic; no sampling involved.
    """
    if baseline == "zero":
        base = np.zeros((dataset.n_timesteps, dataset.n_channels))
    elif baseline == "train_mean":
        base = dataset.values[dataset.train_mask].mean(axis=0)
    else:
        raise ValueError(f"unknown baseline {baseline!r}")
    indices = dataset.split_indices(split)
    t_max, c_max = dataset.n_timesteps, dataset.n_channels
    ref = predictor.predict(dataset.values[indices])
    rows = np.zeros((len(indices), t_max, c_max))
    for i, n in enumerate(indices):
        variants = np.repeat(dataset.values[n][None], t_max * c_max, axis=0)
        k = 0
        for t in range(t_max):
            for c in range(c_max):
                variants[k, t, c] = base[t, c]
                k += 1
        flipped = predictor.predict(variants) != ref[i]
        rows[i] = flipped.reshape(t_max, c_max).astype(float)
    return AttributionTensor("occlusion", rows, indices)


# ---------------------------------------------------------------------------
# precomputed rule text


_LINE_RE = re.compile(
    r"^instance\s+(\d+)\s+class\s+(-?\d+)\s*:\s*(.+?)"
    r"(?:\s*\[conf=([^\s\]]+)\s+cov=([^\s\]]+)\])?\s*$"
)
_NUM = r"(-?(?:inf|[0-9.eE+-]+))"
_GT_RE = re.compile(rf"^(t\d+(?:c\d+)?)\s*>\s*{_NUM}$")
_LE_RE = re.compile(rf"^(t\d+(?:c\d+)?)\s*<=\s*{_NUM}$")
_IN_RE = re.compile(rf"^(t\d+(?:c\d+)?)\s+in\s+\(\s*{_NUM}\s*,\s*{_NUM}\s*\]$")


def _parse_condition(text: str) -> tuple[FeatureId, float, float]:
    m = _GT_RE.match(text)
    if m:
        return parse_feature_name(m.group(1)), float(m.group(2)), math.inf
    m = _LE_RE.match(text)
    if m:
        return parse_feature_name(m.group(1)), -math.inf, float(m.group(2))
    m = _IN_RE.match(text)
    if m:
        return parse_feature_name(m.group(1)), float(m.group(2)), float(m.group(3))
    raise ValueError(f"bad condition {text!r}")


def parse_anchor_rules(
    path: str | Path, dataset: Dataset, tag: str = "ANCHOR"
) -> RuleSet:
    """Parse one-rule-per-line text into a RuleSet.

    Line grammar::

        instance <n> class <y>: <cond> AND <cond> ... [conf=<g> cov=<k>]

    with conditions ``t5 > a``, ``t5 <= b`` or ``t5 in (a, b]`` (``t5c1``
    for multichannel data). The bracketed metrics tail is optional; when
    absent the rule carries confidence None and coverage 0. Conjuncts that
    repeat a feature are intersected. The resulting domain is the test split
    plus any instance the file mentions; unmentioned instances read as "no
    rule".
    """
    path = Path(path)
    classes = set(int(c) for c in dataset.classes)
    rules: dict[int, Optional[Rule]] = {int(n): None for n in dataset.test_indices()}
    mentioned: set[int] = set()
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        m = _LINE_RE.match(line.strip())
        if not m:
            raise ValueError(f"{path}:{ln}: unparseable rule line")
        n, cls = int(m.group(1)), int(m.group(2))
        if n >= dataset.n_instances:
            raise ValueError(f"{path}:{ln}: instance {n} out of range")
        if cls not in classes:
            raise ValueError(f"{path}:{ln}: unknown class {cls}")
        if n in mentioned:
            raise ValueError(f"{path}:{ln}: duplicate rule for instance {n}")
        mentioned.add(n)
        bounds: dict[FeatureId, tuple[float, float]] = {}
        for part in m.group(3).split(" AND "):
            try:
                fid, lo, up = _parse_condition(part.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{ln}: {exc}") from exc
            if fid.timestep >= dataset.n_timesteps or fid.channel >= dataset.n_channels:
                raise ValueError(f"{path}:{ln}: feature {part.strip()!r} out of range")
            if fid in bounds:
                old_lo, old_up = bounds[fid]
                lo, up = max(old_lo, lo), min(old_up, up)
                if not lo < up:
                    raise ValueError(
                        f"{path}:{ln}: conjuncts on {feature_name(fid, dataset.multivariate)} "
                        f"intersect to an empty interval"
                    )
            bounds[fid] = (lo, up)
        conf = float(m.group(4)) if m.group(4) is not None else None
        cov = float(m.group(5)) if m.group(5) is not None else 0.0
        rules[n] = Rule(
            conditions=tuple(
                Condition(fid, Interval(lo, up)) for fid, (lo, up) in bounds.items()
            ),
            predicted_class=cls,
            confidence=conf,
            coverage=cov,
            source_instance=n,
        )
    return RuleSet(provenance=tag, rules=rules)


# ---------------------------------------------------------------------------
# simulated attributions for the bundled synthetic


def make_synthetic_attributions(
    dataset: Dataset, tag: str, seed: int, noise: float = 0.3
) -> AttributionTensor:
    """Class-contrast signal plus seeded Gaussian noise, for every instance.

    The clean part of each instance's attribution is its class's train-mean
    deviation from the grand train mean, so mass sits on the timesteps where
    classes actually differ; noise buries that signal in proportion to
    ``noise``.
    """
    rng = np.random.default_rng(seed)
    train = dataset.values[dataset.train_mask]
    train_labels = dataset.labels[dataset.train_mask]
    grand = train.mean(axis=0)
    contrast = {
        int(c): train[train_labels == c].mean(axis=0) - grand for c in dataset.classes
    }
    rows = np.empty_like(dataset.values)
    for n in range(dataset.n_instances):
        rows[n] = contrast[int(dataset.labels[n])] + rng.normal(
            0.0, noise, grand.shape
        )
    return AttributionTensor(tag, rows, np.arange(dataset.n_instances))
