"""Reference classifiers and a bridge to external ones.

Built-ins are distance-based on the flattened T x C vector: nearest class
centroid and 1-nearest-neighbour, both Euclidean, with distance ties resolved
to the lowest class label. They exist so the pipeline runs end to end without
a model dependency; any real classifier can be attached through the external
bridge instead.

The external protocol is line-delimited JSON over a child process: one
``{"values": [[...], ...]}`` object per instance on stdin (T rows of C
values), one integer label per line on stdout, order preserved. A batch is
one process invocation; protocol violations raise with the offending line
number.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from typing import Protocol, Sequence

import numpy as np

from .data import Dataset

__all__ = [
    "Predictor",
    "CentroidPredictor",
    "OneNNPredictor",
    "ExternalPredictor",
    "PredictorBridgeError",
    "make_predictor",
]


class Predictor(Protocol):
    def predict(self, values: np.ndarray) -> np.ndarray:
        """Labels for values of shape (M, T, C); returns (M,) ints."""


def _flatten(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2:  # a single T x C instance
        arr = arr[None, :, :]
    return arr.reshape(arr.shape[0], -1)


class CentroidPredictor:
    """Nearest class-mean classifier fitted on the train split."""

    def __init__(self, dataset: Dataset):
        train = dataset.values[dataset.train_mask]
        labels = dataset.labels[dataset.train_mask]
        self.classes = np.unique(labels)  # ascending, so argmin tie -> lowest
        self.centroids = np.stack(
            [train[labels == c].reshape(-1, train.shape[1] * train.shape[2]).mean(axis=0)
             for c in self.classes]
        )

    def predict(self, values: np.ndarray) -> np.ndarray:
        flat = _flatten(values)
        out = np.empty(flat.shape[0], dtype=int)
        for i, row in enumerate(flat):
            d = np.sum((self.centroids - row) ** 2, axis=1)
            out[i] = self.classes[int(np.argmin(d))]
        return out


class OneNNPredictor:
    """1-nearest-neighbour over the train split.

    Equidistant neighbours resolve to the lowest class label among them.
    """

    def __init__(self, dataset: Dataset):
        self.train = _flatten(dataset.values[dataset.train_mask])
        self.labels = dataset.labels[dataset.train_mask].astype(int)

    def predict(self, values: np.ndarray) -> np.ndarray:
        flat = _flatten(values)
        out = np.empty(flat.shape[0], dtype=int)
        for i, row in enumerate(flat):
            d = np.sum((self.train - row) ** 2, axis=1)
            dmin = d.min()
            out[i] = self.labels[d == dmin].min()
        return out


class PredictorBridgeError(RuntimeError):
    pass


class ExternalPredictor:
    """Runs a child process per batch and speaks the line-JSON protocol."""

    def __init__(self, command: str | Sequence[str]):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)

    def predict(self, values: np.ndarray) -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        payload = "".join(
            json.dumps({"values": inst.tolist()}) + "\n" for inst in arr
        )
        proc = subprocess.run(
            self.argv, input=payload, capture_output=True, text=True
        )
        if proc.returncode != 0:
            raise PredictorBridgeError(
                f"external predictor exited {proc.returncode}: {proc.stderr.strip()}"
            )
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != arr.shape[0]:
            raise PredictorBridgeError(
                f"external predictor returned {len(lines)} labels "
                f"for {arr.shape[0]} instances"
            )
        out = np.empty(arr.shape[0], dtype=int)
        for i, line in enumerate(lines, start=1):
            try:
                out[i - 1] = int(line.strip())
            except ValueError as exc:
                raise PredictorBridgeError(
                    f"external predictor line {i}: not an integer label: {line!r}"
                ) from exc
        return out


def make_predictor(spec: str, dataset: Dataset) -> Predictor:
    """Build from a CLI-style spec: ``centroid``, ``1nn`` or ``external:<cmd>``."""
    if spec == "centroid":
        return CentroidPredictor(dataset)
    if spec == "1nn":
        return OneNNPredictor(dataset)
    if spec.startswith("external:"):
        cmd = spec[len("external:"):]
        if not cmd.strip():
            raise ValueError("external predictor needs a command")
        return ExternalPredictor(cmd)
    raise ValueError(f"unknown predictor {spec!r}")
