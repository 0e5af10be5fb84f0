"""Nonparametric comparisons across explanation methods.

Wilcoxon signed-rank for paired per-dataset scores, the Friedman test over a
blocks-by-methods score matrix, and Nemenyi post-hoc pairwise p-values with
critical-difference data for rank plots.

The Wilcoxon p-value is exact (full enumeration of sign assignments, computed
by dynamic programming over doubled ranks so tied half-ranks stay integral)
up to 15 effective pairs, and a normal approximation with tie and continuity
corrections beyond that.

Nemenyi p-values come from an embedded table of studentized-range quantiles
at infinite degrees of freedom (K = 2..20), log-linearly interpolated, so
outputs are bit-reproducible with no runtime integration. Reported values are
capped at 0.9 as is conventional for these tables; raw values are kept
alongside. Self-comparisons are 1.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import norm as _norm
from scipy.stats import rankdata as _rankdata

__all__ = [
    "PairedSample",
    "WilcoxonResult",
    "wilcoxon",
    "FriedmanResult",
    "friedman",
    "RankTable",
    "rank_rows",
    "NemenyiResult",
    "nemenyi",
    "sr_pvalue",
    "cd_value",
]

_EXACT_LIMIT = 15  # 2^15 sign patterns, still instant

# Survival levels and matching quantiles of the studentized range
# distribution at infinite degrees of freedom, K = 2..20. Quantile / sqrt(2)
# at the 0.05 level reproduces the usual critical-value tables (e.g. 2.949
# for K = 7).
_SF_LEVELS = (0.9, 0.75, 0.5, 0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001)
_Q_TABLE = {
    2: (0.177712, 0.450624, 0.953873, 1.626840, 2.326174, 2.771808, 3.169822, 3.642773, 3.969745, 4.653508),
    3: (0.618352, 1.022126, 1.587788, 2.248346, 2.902380, 3.314493, 3.682268, 4.120303, 4.424235, 5.063453),
    4: (0.979366, 1.412719, 1.978320, 2.616224, 3.240446, 3.633160, 3.984015, 4.402801, 4.694087, 5.308804),
    5: (1.261398, 1.700528, 2.256882, 2.875451, 3.478281, 3.857656, 4.197026, 4.602821, 4.885585, 5.483754),
    6: (1.488195, 1.925774, 2.471652, 3.074279, 3.660721, 4.030092, 4.360906, 4.757047, 5.033479, 5.619332),
    7: (1.676051, 2.109549, 2.645452, 3.234786, 3.808098, 4.169554, 4.493624, 4.882166, 5.153613, 5.729754),
    8: (1.835449, 2.264036, 2.790841, 3.368898, 3.931349, 4.286309, 4.604857, 4.987183, 5.254550, 5.822728),
    9: (1.973327, 2.396841, 2.915438, 3.483775, 4.037023, 4.386509, 4.700411, 5.077506, 5.341439, 5.902906),
    10: (2.094446, 2.513005, 3.024202, 3.584045, 4.129346, 4.474124, 4.784033, 5.156635, 5.417616, 5.973307),
    11: (2.202195, 2.616028, 3.120531, 3.672862, 4.211200, 4.551864, 4.858286, 5.226963, 5.485364, 6.036000),
    12: (2.299057, 2.708431, 3.206853, 3.752475, 4.284635, 4.621655, 4.924993, 5.290196, 5.546312, 6.092467),
    13: (2.386902, 2.792090, 3.284960, 3.824535, 4.351158, 4.684920, 4.985497, 5.347592, 5.601663, 6.143802),
    14: (2.467168, 2.868431, 3.356208, 3.890294, 4.411913, 4.742732, 5.040817, 5.400105, 5.652328, 6.190836),
    15: (2.540983, 2.938568, 3.421650, 3.950721, 4.467782, 4.795924, 5.091743, 5.448476, 5.699017, 6.234215),
    16: (2.609248, 3.003380, 3.482118, 4.006580, 4.519464, 4.845154, 5.138897, 5.493291, 5.742289, 6.274452),
    17: (2.672690, 3.063578, 3.538280, 4.058483, 4.567519, 4.890951, 5.182782, 5.535020, 5.782597, 6.311958),
    18: (2.731908, 3.119741, 3.590680, 4.106932, 4.612403, 4.933745, 5.223806, 5.574047, 5.820307, 6.347071),
    19: (2.787396, 3.172349, 3.639767, 4.152338, 4.654494, 4.973892, 5.262307, 5.610690, 5.855724, 6.380070),
    20: (2.839570, 3.221801, 3.685915, 4.195045, 4.694104, 5.011689, 5.298566, 5.645215, 5.889103, 6.411187),
}
_CD_ALPHA_INDEX = {0.05: _SF_LEVELS.index(0.05), 0.10: _SF_LEVELS.index(0.1)}


# ---------------------------------------------------------------------------
# wilcoxon signed-rank


@dataclass(frozen=True)
class PairedSample:
    """Matched per-dataset scores for two methods, one row per dataset."""

    values: np.ndarray  # (N, 2)
    labels: tuple[str, str] = ("a", "b")

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != 2:
            raise ValueError("paired sample needs an (N, 2) value array")
        if values.shape[0] == 0:
            raise ValueError("paired sample is empty")
        if not np.all(np.isfinite(values)):
            raise ValueError("paired sample values must be finite")
        object.__setattr__(self, "values", values)
        if len(self.labels) != 2:
            raise ValueError("labels must name exactly two methods")

    @classmethod
    def from_arrays(cls, a, b, labels: tuple[str, str] = ("a", "b")) -> "PairedSample":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("paired arrays must be 1-D and equally long")
        return cls(values=np.column_stack([a, b]), labels=labels)

    @property
    def diffs(self) -> np.ndarray:
        return self.values[:, 0] - self.values[:, 1]


@dataclass(frozen=True)
class WilcoxonResult:
    w: float
    p: float
    w_plus: float
    w_minus: float
    n_effective: int
    method: str  # "exact" or "approx"


def _exact_sign_p(doubled_ranks: np.ndarray, w2: int) -> float:
    """P(min(W+, W-) <= w) over all sign assignments, exactly.

    Ranks arrive doubled so tied average ranks are integers; the subset-sum
    distribution of 2*W+ is built by DP and both tails counted in one pass.
    """
    total2 = int(doubled_ranks.sum())
    counts = np.zeros(total2 + 1, dtype=np.int64)
    counts[0] = 1
    for dr in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[dr:] = counts[: total2 + 1 - dr]
        counts = counts + shifted
    s = np.arange(total2 + 1)
    hits = int(counts[(s <= w2) | (s >= total2 - w2)].sum())
    return hits / 2 ** len(doubled_ranks)


def wilcoxon(sample: PairedSample) -> WilcoxonResult:
    d = sample.diffs
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise ValueError("all differences are zero; statistic undefined")
    ranks = _rankdata(np.abs(d))
    total = n * (n + 1) / 2
    w_plus = float(ranks[d > 0].sum())
    w_minus = total - w_plus
    w = min(w_plus, w_minus)
    if n <= _EXACT_LIMIT:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = _exact_sign_p(doubled, int(round(2 * w)))
        method = "exact"
    else:
        mean = n * (n + 1) / 4
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24 - float(
            ((tie_counts**3 - tie_counts) / 48).sum()
        )
        delta = w_plus - mean
        z = abs(delta - 0.5 * float(np.sign(delta))) / math.sqrt(var)
        p = min(1.0, float(2 * _norm.sf(z)))
        method = "approx"
    return WilcoxonResult(
        w=w, p=p, w_plus=w_plus, w_minus=w_minus, n_effective=n, method=method
    )


# ---------------------------------------------------------------------------
# friedman


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    p: float


def friedman(values) -> FriedmanResult:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("friedman expects a blocks-by-methods matrix")
    d, k = values.shape
    if k < 3:
        raise ValueError("friedman needs at least 3 methods")
    if d < 2:
        raise ValueError("friedman needs at least 2 blocks")
    ranks = _rankdata(values, axis=1)
    mean_ranks = ranks.mean(axis=0)
    stat = float(12 * d / (k * (k + 1)) * ((mean_ranks - (k + 1) / 2) ** 2).sum())
    return FriedmanResult(chi2=stat, p=float(_chi2.sf(stat, k - 1)))


# ---------------------------------------------------------------------------
# ranking and nemenyi


@dataclass(frozen=True)
class RankTable:
    methods: tuple[str, ...]
    ranks: np.ndarray  # blocks x K, each row averages a permutation of 1..K
    mean_ranks: np.ndarray
    cd_value: Optional[float]  # None when K is outside the embedded table


def rank_rows(
    values,
    methods: Optional[Sequence[str]] = None,
    higher_is_better: bool = True,
    alpha: float = 0.05,
) -> RankTable:
    """Per-block average ranks; rank 1 is best under the chosen direction."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("rank_rows expects a blocks-by-methods matrix")
    d, k = values.shape
    if k < 2 or d < 1:
        raise ValueError("need at least 2 methods and 1 block")
    if methods is None:
        methods = tuple(f"m{j + 1}" for j in range(k))
    else:
        methods = tuple(methods)
        if len(methods) != k:
            raise ValueError("method names do not match the column count")
    ranks = _rankdata(-values if higher_is_better else values, axis=1)
    try:
        cd = cd_value(k, d, alpha)
    except ValueError:
        cd = None
    return RankTable(
        methods=methods, ranks=ranks, mean_ranks=ranks.mean(axis=0), cd_value=cd
    )


@dataclass(frozen=True)
class NemenyiResult:
    methods: tuple[str, ...]
    mean_ranks: np.ndarray
    q: np.ndarray  # studentized-range-scale statistics
    p_raw: np.ndarray
    p_report: np.ndarray  # raw capped at 0.9, diagonal 1
    cd: float
    alpha: float


def sr_pvalue(q: float, k: int) -> float:
    """Survival probability of the studentized range at df=inf for K groups.

    Log-linear interpolation between embedded quantiles; clamped to (0, 1].
    """
    if k not in _Q_TABLE:
        raise ValueError(f"K={k} outside the embedded table (2..20)")
    qs = _Q_TABLE[k]
    i = bisect.bisect_left(qs, q)
    if i < len(qs) and qs[i] == q:
        return _SF_LEVELS[i]
    if i == 0:
        a, b = 0, 1
    elif i == len(qs):
        a, b = len(qs) - 2, len(qs) - 1
    else:
        a, b = i - 1, i
    la, lb = math.log(_SF_LEVELS[a]), math.log(_SF_LEVELS[b])
    frac = (q - qs[a]) / (qs[b] - qs[a])
    return min(1.0, math.exp(la + frac * (lb - la)))


def cd_value(k: int, d: int, alpha: float = 0.05) -> float:
    """Minimum significant mean-rank gap between two of K methods over d blocks."""
    if alpha not in _CD_ALPHA_INDEX:
        raise ValueError("alpha must be 0.05 or 0.10")
    if k not in _Q_TABLE:
        raise ValueError(f"K={k} outside the embedded table (2..20)")
    q_crit = _Q_TABLE[k][_CD_ALPHA_INDEX[alpha]] / math.sqrt(2)
    return q_crit * math.sqrt(k * (k + 1) / (6 * d))


def nemenyi(rank_table: RankTable, alpha: float = 0.05) -> NemenyiResult:
    mean_ranks = np.asarray(rank_table.mean_ranks, dtype=float)
    k = mean_ranks.size
    if k not in _Q_TABLE:
        raise ValueError(f"K={k} outside the embedded table (2..20)")
    d = rank_table.ranks.shape[0]
    denom = math.sqrt(k * (k + 1) / (12 * d))
    q = np.zeros((k, k))
    p_raw = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            qij = abs(float(mean_ranks[i] - mean_ranks[j])) / denom
            q[i, j] = q[j, i] = qij
            p_raw[i, j] = p_raw[j, i] = sr_pvalue(qij, k)
    p_report = np.minimum(p_raw, 0.9)
    np.fill_diagonal(p_report, 1.0)
    return NemenyiResult(
        methods=rank_table.methods,
        mean_ranks=mean_ranks,
        q=q,
        p_raw=p_raw,
        p_report=p_report,
        cd=cd_value(k, d, alpha),
        alpha=alpha,
    )
