"""Self-contained SVG figures: paths, barrier values, disturbance estimates, inputs.

No plotting library is involved; each figure is a stack of panels drawn with
polylines, ellipses, ticks and a legend. Every panel autoscales to its data
with a 5% margin and records the resulting ranges as ``data-*`` attributes.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .io import CsvLog, OutputError
from .runner import RunLog

MARGIN = 0.05
MAX_POINTS = 4000
PALETTE = ("#d62728", "#ff7f0e", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf")
DASHES = ("", "6,3", "2,2", "8,3,2,3")


def axis_range(values, margin: float = MARGIN) -> tuple[float, float]:
    """Data min/max widened by ``margin`` of the span on each side."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if v.size == 0:
        return -1.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo
    if span == 0.0:
        pad = 0.5 * max(abs(lo), 1.0)
        return lo - pad, hi + pad
    return lo - margin * span, hi + margin * span


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    span = hi - lo
    if not span > 0:
        return [lo]
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    n = int(math.floor((hi - first) / step + 1e-9)) + 1
    return [first + i * step for i in range(max(n, 0))]


def _tick_label(v: float) -> str:
    if v == 0 or 1e-3 <= abs(v) < 1e4:
        return f"{v:.6g}"
    return f"{v:.2e}"


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    color: str
    dash: str = ""
    width: float = 1.5


@dataclass
class Ellipse:
    cx: float
    cy: float
    rx: float
    ry: float
    label: str = ""


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)
    shapes: list = field(default_factory=list)

    def ranges(self) -> tuple[tuple[float, float], tuple[float, float]]:
        xs = [s.x for s in self.series] + [np.array([e.cx - e.rx, e.cx + e.rx]) for e in self.shapes]
        ys = [s.y for s in self.series] + [np.array([e.cy - e.ry, e.cy + e.ry]) for e in self.shapes]
        xs = np.concatenate(xs) if xs else np.zeros(0)
        ys = np.concatenate(ys) if ys else np.zeros(0)
        return axis_range(xs), axis_range(ys)


class SvgFigure:
    def __init__(self, title: str, panels: Sequence[Panel], width: int = 820, panel_height: int = 330):
        self.title = title
        self.panels = list(panels)
        self.width = width
        self.panel_height = panel_height
        self.left, self.right, self.top, self.bottom = 78, 210, 34, 48

    def render(self) -> str:
        height = 30 + self.panel_height * len(self.panels)
        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{height}" '
            f'viewBox="0 0 {self.width} {height}" font-family="sans-serif" font-size="11">',
            f'<rect width="{self.width}" height="{height}" fill="white"/>',
            f'<text x="{self.width / 2}" y="20" text-anchor="middle" font-size="15">{escape(self.title)}</text>',
        ]
        for i, panel in enumerate(self.panels):
            out.extend(self._panel(panel, 30 + i * self.panel_height))
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _panel(self, panel: Panel, y0: float) -> list[str]:
        (xmin, xmax), (ymin, ymax) = panel.ranges()
        px0, px1 = self.left, self.width - self.right
        py0, py1 = y0 + self.top, y0 + self.panel_height - self.bottom

        def sx(v):
            return px0 + (v - xmin) / (xmax - xmin) * (px1 - px0)

        def sy(v):
            return py1 - (v - ymin) / (ymax - ymin) * (py1 - py0)

        out = [
            f'<g class="panel" data-xmin="{xmin!r}" data-xmax="{xmax!r}" data-ymin="{ymin!r}" data-ymax="{ymax!r}">',
            f'<text x="{(px0 + px1) / 2}" y="{y0 + 22}" text-anchor="middle" font-size="13">{escape(panel.title)}</text>',
            f'<rect x="{px0}" y="{py0}" width="{px1 - px0}" height="{py1 - py0}" fill="none" stroke="#333"/>',
        ]
        for v in nice_ticks(xmin, xmax):
            x = sx(v)
            out.append(f'<line x1="{x:.2f}" y1="{py1}" x2="{x:.2f}" y2="{py1 + 4}" stroke="#333"/>')
            out.append(f'<line x1="{x:.2f}" y1="{py0}" x2="{x:.2f}" y2="{py1}" stroke="#eee"/>')
            out.append(f'<text x="{x:.2f}" y="{py1 + 16}" text-anchor="middle">{_tick_label(v)}</text>')
        for v in nice_ticks(ymin, ymax):
            y = sy(v)
            out.append(f'<line x1="{px0 - 4}" y1="{y:.2f}" x2="{px0}" y2="{y:.2f}" stroke="#333"/>')
            out.append(f'<line x1="{px0}" y1="{y:.2f}" x2="{px1}" y2="{y:.2f}" stroke="#eee"/>')
            out.append(f'<text x="{px0 - 7}" y="{y + 4:.2f}" text-anchor="end">{_tick_label(v)}</text>')
        if ymin < 0 < ymax:
            out.append(f'<line x1="{px0}" y1="{sy(0):.2f}" x2="{px1}" y2="{sy(0):.2f}" stroke="#999" stroke-width="0.8"/>')
        out.append(f'<text x="{(px0 + px1) / 2}" y="{py1 + 34}" text-anchor="middle">{escape(panel.xlabel)}</text>')
        out.append(
            f'<text x="{px0 - 56}" y="{(py0 + py1) / 2}" text-anchor="middle" '
            f'transform="rotate(-90 {px0 - 56} {(py0 + py1) / 2})">{escape(panel.ylabel)}</text>'
        )
        for e in panel.shapes:
            rx = e.rx / (xmax - xmin) * (px1 - px0)
            ry = e.ry / (ymax - ymin) * (py1 - py0)
            out.append(
                f'<ellipse class="obstacle" cx="{sx(e.cx):.2f}" cy="{sy(e.cy):.2f}" rx="{rx:.2f}" ry="{ry:.2f}" '
                'fill="#888" fill-opacity="0.25" stroke="#444"/>'
            )
        for s in panel.series:
            stride = max(1, int(math.ceil(s.x.size / MAX_POINTS)))
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(s.x[::stride], s.y[::stride]))
            dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{s.color}" stroke-width="{s.width}"{dash}>'
                f"<title>{escape(s.label)}</title></polyline>"
            )
        ly = py0 + 6
        for s in panel.series:
            dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
            out.append(
                f'<line x1="{px1 + 10}" y1="{ly + 5}" x2="{px1 + 34}" y2="{ly + 5}" stroke="{s.color}" '
                f'stroke-width="2"{dash}/>'
            )
            out.append(f'<text x="{px1 + 40}" y="{ly + 9}">{escape(s.label)}</text>')
            ly += 16
        if panel.shapes:
            out.append(
                f'<rect x="{px1 + 14}" y="{ly}" width="14" height="10" fill="#888" fill-opacity="0.25" stroke="#444"/>'
            )
            out.append(f'<text x="{px1 + 40}" y="{ly + 9}">obstacle</text>')
        out.append("</g>")
        return out


@dataclass
class PlotRun:
    """The columns a figure needs, from either a RunLog or an emitted CSV."""

    name: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    h: np.ndarray
    d_true: np.ndarray
    d_hat: np.ndarray
    u: np.ndarray

    @classmethod
    def from_log(cls, log: RunLog, name: Optional[str] = None) -> "PlotRun":
        label = name or (log.regime + (" (noisy)" if log.noise else ""))
        return cls(label, log.t, log.z[:, 0], log.z[:, 1], log.h, log.d_true, log.d_hat, log.u)

    @classmethod
    def from_csv(cls, c: CsvLog) -> "PlotRun":
        # files written by the CLI are named <regime>_<clean|noisy>_seed<N>
        m = re.fullmatch(r"(.+)_(clean|noisy)_seed\d+", c.name)
        label = c.name if m is None else m[1] + (" noisy" if m[2] == "noisy" else "")
        return cls(
            label,
            c["t"],
            c["x"],
            c["y"],
            c.h,
            np.column_stack([c["dx_true"], c["dy_true"]]),
            np.column_stack([c["dx_hat"], c["dy_hat"]]),
            np.column_stack([c["ax"], c["ay"]]),
        )


def _as_run(item) -> PlotRun:
    if isinstance(item, PlotRun):
        return item
    if isinstance(item, RunLog):
        return PlotRun.from_log(item)
    if isinstance(item, CsvLog):
        return PlotRun.from_csv(item)
    raise TypeError(f"cannot plot {type(item).__name__}")


def _reference_curve(reference, t_end: float):
    amp, omega = reference
    tt = np.linspace(0.0, max(t_end, 2 * math.pi / omega), 1000)
    return amp * np.sin(omega * tt), 0.5 * amp * np.sin(2 * omega * tt)


def xy_figure(runs: Sequence[PlotRun], obstacles, reference=None) -> SvgFigure:
    panel = Panel("XY paths", "x [m]", "y [m]")
    panel.shapes = [Ellipse(c[0], c[1], r, r) for c, r in obstacles]
    if reference is not None:
        rx, ry = _reference_curve(reference, max(float(r.t[-1]) for r in runs))
        panel.series.append(Series(rx, ry, "reference", "#777", "4,3", 1.0))
    for i, r in enumerate(runs):
        panel.series.append(Series(r.x, r.y, r.name, PALETTE[i % len(PALETTE)]))
    return SvgFigure("Vehicle paths", [panel])


def barrier_figure(runs: Sequence[PlotRun]) -> SvgFigure:
    panel = Panel("Barrier values", "t [s]", "h [m^2]")
    for i, r in enumerate(runs):
        for j in range(r.h.shape[1]):
            panel.series.append(Series(r.t, r.h[:, j], f"{r.name} h{j + 1}", PALETTE[i % len(PALETTE)], DASHES[j % len(DASHES)]))
    return SvgFigure("Barrier functions (h >= 0 is safe)", [panel])


def disturbance_figure(runs: Sequence[PlotRun]) -> SvgFigure:
    panels = []
    for axis, comp in ((0, "x"), (1, "y")):
        p = Panel(f"d_{comp} and its estimate", "t [s]", f"d_{comp} [m/s^2]")
        for i, r in enumerate(runs):
            color = PALETTE[i % len(PALETTE)]
            p.series.append(Series(r.t, r.d_true[:, axis], f"{r.name} true", color, "", 1.0))
            p.series.append(Series(r.t, r.d_hat[:, axis], f"{r.name} estimate", color, "5,3"))
        panels.append(p)
    return SvgFigure("Disturbance: true vs estimated", panels)


def input_figure(runs: Sequence[PlotRun]) -> SvgFigure:
    panels = []
    for axis, comp in ((0, "a_x"), (1, "a_y")):
        p = Panel(f"{comp}", "t [s]", f"{comp} [m/s^2]")
        for i, r in enumerate(runs):
            p.series.append(Series(r.t, r.u[:, axis], r.name, PALETTE[i % len(PALETTE)]))
        panels.append(p)
    return SvgFigure("Control inputs", panels)


FIGURES = ("xy_paths.svg", "barriers.svg", "disturbance.svg", "inputs.svg")


def emit_plots(logs, out_dir, obstacles=None, reference=None) -> list[Path]:
    """Write the four figures; ``obstacles`` default to those stored on RunLogs."""
    logs = list(logs)
    if not logs:
        raise ValueError("emit_plots needs at least one log")
    if obstacles is None:
        obstacles = next((lg.obstacles for lg in logs if isinstance(lg, RunLog)), [])
    if reference is None:
        reference = next((lg.reference for lg in logs if isinstance(lg, RunLog)), None)
    runs = [_as_run(lg) for lg in logs]
    figs = (xy_figure(runs, obstacles, reference), barrier_figure(runs), disturbance_figure(runs), input_figure(runs))
    out_dir = Path(out_dir)
    paths = []
    for name, fig in zip(FIGURES, figs):
        path = out_dir / name
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(fig.render())
        except OSError as exc:
            raise OutputError(path, exc) from exc
        paths.append(path)
    return paths
