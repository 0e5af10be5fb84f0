"""Datasets: N x T x C series with labels and a train/test partition.

Two on-disk forms are accepted:

* UCR-style TSV, one instance per line: ``label<TAB>v1<TAB>...<TAB>vT``
  (single channel). A ``_TRAIN``/``_TEST`` sibling pair is honored when
  present; a lone file gets a deterministic stratified 75:25 split.
* A JSON container ``{"labels": [...], "values": [[[...]]]}`` with values
  N x T x C (N x T accepted and treated as C=1). An optional ``"split"`` key
  lists "train"/"test" per instance; when absent the same stratified split
  applies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "Dataset",
    "stratified_split",
    "load_dataset",
    "save_dataset_json",
    "make_synthetic",
]

_SPLIT_SEED = 1729  # fixed so that loading without an explicit split is repeatable


@dataclass
class Dataset:
    name: str
    values: np.ndarray  # (N, T, C) float64
    labels: np.ndarray  # (N,) int
    train_mask: np.ndarray  # (N,) bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 2:
            self.values = self.values[:, :, None]
        if self.values.ndim != 3:
            raise ValueError(f"values must be N x T x C, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("dataset values must be finite")
        self.labels = np.asarray(self.labels, dtype=int)
        self.train_mask = np.asarray(self.train_mask, dtype=bool)
        n = self.values.shape[0]
        if self.labels.shape != (n,) or self.train_mask.shape != (n,):
            raise ValueError("labels/split length must match number of instances")

    @property
    def n_instances(self) -> int:
        return self.values.shape[0]

    @property
    def n_timesteps(self) -> int:
        return self.values.shape[1]

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    @property
    def multivariate(self) -> bool:
        return self.n_channels > 1

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def train_indices(self) -> np.ndarray:
        return np.flatnonzero(self.train_mask)

    def test_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.train_mask)

    def split_indices(self, split: str) -> np.ndarray:
        if split == "train":
            return self.train_indices()
        if split == "test":
            return self.test_indices()
        if split == "all":
            return np.arange(self.n_instances)
        raise ValueError(f"unknown split {split!r}")


def stratified_split(
    labels: np.ndarray, test_fraction: float = 0.25, seed: int = _SPLIT_SEED
) -> np.ndarray:
    """Boolean train mask with roughly ``test_fraction`` held out per class.

    Each class keeps at least one instance on each side when it has two or
    more members. Deterministic for a given seed.
    """
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    train = np.ones(labels.shape[0], dtype=bool)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        n_test = int(round(test_fraction * idx.size))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        picked = rng.permutation(idx)[:n_test]
        train[picked] = False
    if not train.any() or train.all():
        raise ValueError("degenerate split: one side is empty")
    return train


# ---------------------------------------------------------------------------
# loading / saving


def _load_tsv_rows(path: Path) -> tuple[np.ndarray, np.ndarray]:
    labels, rows = [], []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ValueError(f"{path}:{ln}: expected label<TAB>values")
        try:
            labels.append(int(float(parts[0])))
            rows.append([float(p) for p in parts[1:]])
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: non-numeric field") from exc
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows, lengths {sorted(widths)}")
    return np.array(rows, dtype=float), np.array(labels, dtype=int)


def _tsv_sibling(path: Path) -> Optional[tuple[Path, Path]]:
    s = path.name
    for a, b in (("_TRAIN", "_TEST"), ("_TEST", "_TRAIN")):
        if a in s:
            other = path.with_name(s.replace(a, b))
            if other.exists():
                pair = (path, other) if a == "_TRAIN" else (other, path)
                return pair
    return None


def load_dataset(path: str | Path, name: Optional[str] = None) -> Dataset:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _load_json_container(path, name)
    pair = _tsv_sibling(path)
    if pair is not None:
        train_path, test_path = pair
        tr_vals, tr_labels = _load_tsv_rows(train_path)
        te_vals, te_labels = _load_tsv_rows(test_path)
        if tr_vals.shape[1] != te_vals.shape[1]:
            raise ValueError("train/test series length mismatch")
        values = np.concatenate([tr_vals, te_vals])
        labels = np.concatenate([tr_labels, te_labels])
        mask = np.zeros(values.shape[0], dtype=bool)
        mask[: tr_vals.shape[0]] = True
        ds_name = name or train_path.name.replace("_TRAIN", "").split(".")[0]
        return Dataset(ds_name, values, labels, mask)
    values, labels = _load_tsv_rows(path)
    return Dataset(name or path.stem, values, labels, stratified_split(labels))


def _load_json_container(path: Path, name: Optional[str]) -> Dataset:
    obj = json.loads(path.read_text(encoding="utf-8"))
    try:
        values = np.asarray(obj["values"], dtype=float)
        labels = np.asarray(obj["labels"], dtype=int)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: bad dataset container") from exc
    if "split" in obj:
        tags = list(obj["split"])
        bad = sorted(set(tags) - {"train", "test"})
        if bad:
            raise ValueError(f"{path}: unknown split tags {bad}")
        mask = np.array([t == "train" for t in tags], dtype=bool)
    else:
        mask = stratified_split(labels)
    return Dataset(name or obj.get("name", path.stem), values, labels, mask)


def save_dataset_json(dataset: Dataset, path: str | Path) -> None:
    obj = {
        "name": dataset.name,
        "labels": dataset.labels.tolist(),
        "values": dataset.values.tolist(),
        "split": ["train" if t else "test" for t in dataset.train_mask],
    }
    Path(path).write_text(json.dumps(obj) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# bundled synthetic


def make_synthetic(
    n_instances: int = 60,
    n_timesteps: int = 24,
    n_channels: int = 1,
    seed: int = 0,
    noise: float = 0.25,
    name: str = "synth",
) -> Dataset:
    """Two balanced classes: a sine wave vs the same wave phase-shifted.

    Class separation varies across timesteps (largest where the phase shift
    moves the curve most), which gives attribution-driven extraction something
    real to find. Channels beyond the first carry the same construction at a
    different frequency.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_timesteps) / n_timesteps
    values = np.empty((n_instances, n_timesteps, n_channels))
    labels = np.arange(n_instances) % 2
    for ch in range(n_channels):
        freq = 1.0 + ch
        base0 = np.sin(2 * np.pi * freq * t)
        base1 = np.sin(2 * np.pi * freq * t + np.pi / 2)
        for i in range(n_instances):
            base = base1 if labels[i] else base0
            values[i, :, ch] = base + rng.normal(0.0, noise, n_timesteps)
    mask = stratified_split(labels, 0.25, seed=seed + 1)
    return Dataset(name, values, labels, mask)
