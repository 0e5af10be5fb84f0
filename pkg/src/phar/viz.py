"""Rule visualization: class grids of series with interval markers.

Each class gets one row of five cells: three maximally diverse instances,
the prototypical instance (nearest the class mean), and the class-mean trace.
Multivariate series stack one sub-panel per channel inside a cell. A rule's
conditions draw as red vertical segments spanning the interval at the
condition's timestep on the matching channel; bounds at infinity clip to the
panel edge and carry an arrowhead so the open direction stays visible.

Output is plain SVG assembled by hand: fixed element order, fixed coordinate
formatting, no timestamps, so identical inputs give byte-identical files and
golden-file comparisons are meaningful. Geometry attributes (``data-*``) are
written at full precision so tests can re-derive marker positions from the
file alone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .core import Rule, RuleSet
from .data import Dataset

__all__ = ["PlotSpec", "ExemplarSelection", "select_exemplars", "render_svg"]

_COLUMN_TITLES = ("diverse 1", "diverse 2", "diverse 3", "prototype", "class mean")


@dataclass(frozen=True)
class PlotSpec:
    panel_width: float = 200.0
    panel_height: float = 110.0
    gap: float = 16.0
    channel_gap: float = 8.0
    margin_left: float = 72.0
    margin_top: float = 48.0
    margin_right: float = 16.0
    margin_bottom: float = 16.0
    legend_height: float = 14.0
    series_color: str = "#2ca02c"
    mean_color: str = "#444444"
    marker_color: str = "#d62728"
    grid_color: str = "#dddddd"
    frame_color: str = "#999999"
    text_color: str = "#222222"
    font_family: str = "monospace"
    font_size: float = 10.0
    split: str = "test"  # which instances populate the grid


@dataclass(frozen=True)
class ExemplarSelection:
    diverse: tuple[int, int, int]
    prototype: int
    mean_trace: np.ndarray  # (T, C)


def select_exemplars(
    dataset: Dataset, cls: int, split: str = "test"
) -> ExemplarSelection:
    """Pick three spread-out instances and the most average one for a class.

    The first diverse pick is the instance farthest from the class mean; each
    later pick maximizes the distance to the nearest already-picked instance
    (ties go to the lowest index). Small or degenerate classes repeat picks,
    with a warning.
    """
    idx = dataset.split_indices(split)
    members = idx[dataset.labels[idx] == cls]
    if members.size == 0:
        raise ValueError(f"class {cls} has no instances in split {split!r}")
    if members.size < 4:
        warnings.warn(
            f"class {cls}: only {members.size} instances; exemplars will repeat"
        )
    flat = dataset.values[members].reshape(members.size, -1)
    mean = flat.mean(axis=0)
    dist_to_mean = np.linalg.norm(flat - mean, axis=1)
    picks: list[int] = []
    warned_reuse = False
    for _ in range(3):
        if picks:
            crit = np.min(
                np.linalg.norm(flat[:, None, :] - flat[picks][None, :, :], axis=2),
                axis=1,
            )
        else:
            crit = dist_to_mean
        best = int(np.argmax(crit))  # first max, so ties take the lowest index
        if picks and crit[best] == 0.0 and not warned_reuse:
            warnings.warn(f"class {cls}: duplicate instances; reusing an exemplar")
            warned_reuse = True
        picks.append(best)
    prototype = int(members[int(np.argmin(dist_to_mean))])
    return ExemplarSelection(
        diverse=tuple(int(members[p]) for p in picks),
        prototype=prototype,
        mean_trace=dataset.values[members].mean(axis=0),
    )


# ---------------------------------------------------------------------------
# svg assembly


def _f(v: float) -> str:
    return format(v, ".3f")


class _SvgDoc:
    def __init__(self):
        self.parts: list[str] = []

    def add(self, line: str):
        self.parts.append(line)

    def tag(self, name: str, close: bool = True, text: Optional[str] = None, **attrs):
        rendered = " ".join(
            f'{k.replace("_", "-")}="{v}"' for k, v in attrs.items() if v is not None
        )
        if text is not None:
            self.add(f"<{name} {rendered}>{escape(text)}</{name}>")
        elif close:
            self.add(f"<{name} {rendered}/>")
        else:
            self.add(f"<{name} {rendered}>")

    def end(self, name: str):
        self.add(f"</{name}>")


def _panel_range(trace: np.ndarray, rule: Optional[Rule], channel: int):
    lo = float(trace.min())
    hi = float(trace.max())
    if rule is not None:
        for cond in rule.conditions:
            if cond.feature.channel != channel:
                continue
            for bound in (cond.interval.lower, cond.interval.upper):
                if math.isfinite(bound):
                    lo = min(lo, bound)
                    hi = max(hi, bound)
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    return lo - pad, hi + pad


def _draw_panel(
    doc: _SvgDoc,
    spec: PlotSpec,
    x: float,
    y: float,
    trace: np.ndarray,  # (T,)
    channel: int,
    rule: Optional[Rule],
    color: str,
):
    w, h = spec.panel_width, spec.panel_height
    t_count = trace.shape[0]
    ylo, yhi = _panel_range(trace, rule, channel)

    def px(t: int) -> float:
        if t_count == 1:
            return x + w / 2
        return x + t / (t_count - 1) * w

    def py(v: float) -> float:
        return y + (yhi - v) / (yhi - ylo) * h

    doc.tag(
        "g",
        close=False,
        **{
            "class": "panel",
            "data-channel": str(channel),
            "data-x": repr(float(x)),
            "data-y": repr(float(y)),
            "data-w": repr(float(w)),
            "data-h": repr(float(h)),
            "data-ylo": repr(ylo),
            "data-yhi": repr(yhi),
        },
    )
    for frac in (0.25, 0.5, 0.75):
        gy = _f(y + frac * h)
        doc.tag(
            "line",
            **{"class": "grid"},
            x1=_f(x),
            y1=gy,
            x2=_f(x + w),
            y2=gy,
            stroke=spec.grid_color,
            stroke_width="1",
        )
    doc.tag(
        "rect",
        **{"class": "frame"},
        x=_f(x),
        y=_f(y),
        width=_f(w),
        height=_f(h),
        fill="none",
        stroke=spec.frame_color,
        stroke_width="1",
    )
    points = " ".join(f"{_f(px(t))},{_f(py(float(v)))}" for t, v in enumerate(trace))
    doc.tag(
        "polyline",
        **{"class": "series"},
        points=points,
        fill="none",
        stroke=color,
        stroke_width="1.2",
    )
    if rule is not None:
        for cond in rule.conditions:
            if cond.feature.channel != channel:
                continue
            t = cond.feature.timestep
            mx = px(t)
            lower, upper = cond.interval.lower, cond.interval.upper
            top_v = yhi if math.isinf(upper) else min(upper, yhi)
            bot_v = ylo if math.isinf(lower) else max(lower, ylo)
            if bot_v > top_v:  # interval entirely outside the panel range
                bot_v = top_v
            y1, y2 = py(top_v), py(bot_v)
            doc.tag(
                "line",
                **{"class": "marker", "data-t": str(t)},
                x1=_f(mx),
                y1=_f(y1),
                x2=_f(mx),
                y2=_f(y2),
                stroke=spec.marker_color,
                stroke_width="2",
            )
            if math.isinf(upper):
                doc.tag(
                    "path",
                    **{"class": "marker-arrow"},
                    d=f"M {_f(mx)},{_f(y1)} l -3,5 l 6,0 z",
                    fill=spec.marker_color,
                )
            if math.isinf(lower):
                doc.tag(
                    "path",
                    **{"class": "marker-arrow"},
                    d=f"M {_f(mx)},{_f(y2)} l -3,-5 l 6,0 z",
                    fill=spec.marker_color,
                )
    doc.end("g")


def _legend_text(n: int, rule: Rule) -> str:
    conf = "n/a" if rule.confidence is None else format(rule.confidence, ".2f")
    return f"#{n} CONF={conf} COV={format(rule.coverage, '.2f')}"


def render_svg(
    dataset: Dataset,
    ruleset: RuleSet,
    spec: Optional[PlotSpec],
    out_path,
) -> Path:
    """Write the class-grid figure for ``ruleset`` over ``dataset``."""
    spec = spec or PlotSpec()
    for rule in ruleset.present().values():
        for cond in rule.conditions:
            if not (0 <= cond.feature.timestep < dataset.n_timesteps):
                raise ValueError(
                    f"rule condition timestep {cond.feature.timestep} outside 0..{dataset.n_timesteps - 1}"
                )
            if not (0 <= cond.feature.channel < dataset.n_channels):
                raise ValueError(
                    f"rule condition channel {cond.feature.channel} outside 0..{dataset.n_channels - 1}"
                )
    classes = [int(c) for c in dataset.classes]
    n_ch = dataset.n_channels
    cell_h = n_ch * spec.panel_height + (n_ch - 1) * spec.channel_gap
    row_h = cell_h + spec.legend_height
    width = (
        spec.margin_left
        + 5 * spec.panel_width
        + 4 * spec.gap
        + spec.margin_right
    )
    height = (
        spec.margin_top
        + len(classes) * row_h
        + (len(classes) - 1) * spec.gap
        + spec.margin_bottom
    )

    doc = _SvgDoc()
    doc.add('<?xml version="1.0" encoding="UTF-8"?>')
    doc.add(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" '
        f'height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">'
    )
    doc.tag(
        "rect", x="0", y="0", width=_f(width), height=_f(height), fill="#ffffff"
    )
    doc.tag(
        "g",
        close=False,
        font_family=spec.font_family,
        font_size=_f(spec.font_size),
        fill=spec.text_color,
    )
    doc.tag(
        "text",
        text=f"{dataset.name}: {ruleset.provenance}",
        x=_f(spec.margin_left),
        y="16.000",
        **{"class": "header"},
    )
    for col, title in enumerate(_COLUMN_TITLES):
        cx = spec.margin_left + col * (spec.panel_width + spec.gap) + spec.panel_width / 2
        doc.tag(
            "text",
            text=title,
            x=_f(cx),
            y=_f(spec.margin_top - 8),
            text_anchor="middle",
            **{"class": "header"},
        )

    for row, cls in enumerate(classes):
        sel = select_exemplars(dataset, cls, spec.split)
        cell_y = spec.margin_top + row * (row_h + spec.gap)
        doc.tag(
            "text",
            text=f"class {cls}",
            x="8.000",
            y=_f(cell_y + cell_h / 2),
            **{"class": "header"},
        )
        shown = list(sel.diverse) + [sel.prototype]
        for col in range(5):
            cell_x = spec.margin_left + col * (spec.panel_width + spec.gap)
            if col < 4:
                n = shown[col]
                rule = ruleset.rules.get(n)
                traces = dataset.values[n]
                color = spec.series_color
                attrs = {
                    "class": "cell",
                    "data-class": str(cls),
                    "data-column": str(col),
                    "data-instance": str(n),
                }
            else:
                n, rule = None, None
                traces = sel.mean_trace
                color = spec.mean_color
                attrs = {
                    "class": "cell",
                    "data-class": str(cls),
                    "data-column": str(col),
                }
            doc.tag("g", close=False, **attrs)
            for ch in range(n_ch):
                _draw_panel(
                    doc,
                    spec,
                    cell_x,
                    cell_y + ch * (spec.panel_height + spec.channel_gap),
                    traces[:, ch],
                    ch,
                    rule,
                    color,
                )
            if col < 4:
                if rule is None:
                    doc.tag(
                        "text",
                        text="no rule",
                        x=_f(cell_x + spec.panel_width / 2),
                        y=_f(cell_y + cell_h / 2),
                        text_anchor="middle",
                        **{"class": "no-rule"},
                    )
                else:
                    doc.tag(
                        "text",
                        text=_legend_text(n, rule),
                        x=_f(cell_x),
                        y=_f(cell_y + cell_h + spec.legend_height - 3),
                        **{"class": "legend"},
                    )
            doc.end("g")
    doc.end("g")
    doc.add("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(doc.parts) + "\n", encoding="utf-8")
    return out_path
