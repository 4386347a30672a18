"""Artifact writers: CSV logs, metrics JSON and SVG plots.

All outputs are deterministic functions of their inputs (full double
precision in CSV, no timestamps anywhere), so repeated runs of the same
configuration produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .analysis import Metrics
from .simulation import SimLog

__all__ = [
    "CSV_HEADER",
    "write_csv",
    "read_csv",
    "metrics_record",
    "write_metrics_json",
    "write_svg_plot",
]

CSV_HEADER = "t,r,y,ydot,u_c,u_ac,e"
_COLUMNS = CSV_HEADER.split(",")


def write_csv(log: SimLog, path: str | Path) -> None:
    """Write one row per control sample at full double precision."""
    if len(log) == 0:
        raise ValueError("refusing to write an empty log")
    path = Path(path)
    lines = [CSV_HEADER]
    cols = [getattr(log, name) for name in _COLUMNS]
    for k in range(len(log)):
        lines.append(",".join(f"{col[k]:.17g}" for col in cols))
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> SimLog:
    """Read a log written by :func:`write_csv` (exact round trip)."""
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != CSV_HEADER:
        raise ValueError(f"{path}: expected header '{CSV_HEADER}'")
    rows = [line.split(",") for line in text[1:]]
    if not rows:
        raise ValueError(f"{path}: no samples")
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != len(_COLUMNS):
        raise ValueError(f"{path}: expected {len(_COLUMNS)} columns")
    cols = dict(zip(_COLUMNS, data.T))
    ts = float(cols["t"][1] - cols["t"][0]) if len(data) > 1 else 0.01
    return SimLog(
        t=cols["t"], r=cols["r"], y=cols["y"], ydot=cols["ydot"],
        u_c=cols["u_c"], u_ac=cols["u_ac"], e=cols["e"],
        diverged=False, ts=ts, tf=float(cols["t"][-1]),
    )


def metrics_record(controller: str, metrics: Metrics | None) -> dict:
    """The JSON object for one controller; None values mean unavailable."""
    return {
        "controller": controller,
        "ise": None if metrics is None else metrics.ise,
        "iace": None if metrics is None else metrics.iace,
        "iacer": None if metrics is None else metrics.iacer,
        "gm": None if metrics is None else metrics.gm,
        "gm_exceeds_cap": None if metrics is None else metrics.gm_exceeds_cap,
        "dm": None if metrics is None else metrics.dm,
        "dm_exceeds_cap": None if metrics is None else metrics.dm_exceeds_cap,
    }


def write_metrics_json(records: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


# ---------------------------------------------------------------------------
# SVG plotting
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_WIDTH, _HEIGHT = 960, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 28, 42


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * step:
        ticks.append(float(v))
        v += step
    return ticks


def write_svg_plot(
    series: list[tuple[str, np.ndarray, np.ndarray]],
    path: str | Path,
    title: str = "",
    xlabel: str = "time (s)",
    ylabel: str = "",
) -> None:
    """Render labelled (x, y) series as one SVG polyline each, with axes
    and a legend.  Purely data-driven; no timestamps or randomness.
    """
    if not series:
        raise ValueError("nothing to plot")
    for label, x, y in series:
        if len(x) != len(y) or len(x) == 0:
            raise ValueError(f"series '{label}' is empty or mismatched")

    x_lo = min(float(np.min(x)) for _, x, _ in series)
    x_hi = max(float(np.max(x)) for _, x, _ in series)
    y_lo = min(float(np.min(y)) for _, _, y in series)
    y_hi = max(float(np.max(y)) for _, _, y in series)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(v: float) -> float:
        return _MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return _MARGIN_T + (y_hi - v) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>'
        )

    for tx in _nice_ticks(x_lo, x_hi):
        px = sx(tx)
        parts.append(
            f'<line x1="{px:.2f}" y1="{_MARGIN_T}" x2="{px:.2f}" '
            f'y2="{_HEIGHT - _MARGIN_B}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{px:.2f}" y="{_HEIGHT - _MARGIN_B + 16}" '
            f'text-anchor="middle">{tx:g}</text>'
        )
    for ty in _nice_ticks(y_lo, y_hi):
        py = sy(ty)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{py:.2f}" x2="{_WIDTH - _MARGIN_R}" '
            f'y2="{py:.2f}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{py + 4:.2f}" text-anchor="end">{ty:g}</text>'
        )
    parts.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444444"/>'
    )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 8}" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    if ylabel:
        cy = _MARGIN_T + plot_h / 2
        parts.append(
            f'<text x="14" y="{cy:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {cy:.1f})">{ylabel}</text>'
        )

    for i, (label, x, y) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        ly = _MARGIN_T + 16 + 16 * i
        lx = _WIDTH - _MARGIN_R - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{lx + 28}" y="{ly}">{label}</text>')

    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
