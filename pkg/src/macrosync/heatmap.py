"""Deterministic SVG rendering of rectangular matrices."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SCALES = ("gray", "diverging")
CELL = 4
MARGIN = 40
NAN_COLOR = "#000000"


class HeatmapError(ValueError):
    pass


def _gray(t: float) -> tuple[int, int, int]:
    v = int(round(255 * t))
    return v, v, v


def _diverging(t: float) -> tuple[int, int, int]:
    # blue (0) -> white (0.5) -> red (1)
    if t < 0.5:
        s = t / 0.5
        return int(round(40 + 215 * s)), int(round(80 + 175 * s)), 255
    s = (t - 0.5) / 0.5
    return 255, int(round(255 - 175 * s)), int(round(255 - 215 * s))


def color_for(value: float, vmin: float, vmax: float, scale: str = "gray") -> str:
    if not np.isfinite(value):
        return NAN_COLOR
    t = 0.5 if vmax == vmin else float(np.clip((value - vmin) / (vmax - vmin), 0.0, 1.0))
    r, g, b = (_gray if scale == "gray" else _diverging)(t)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(
    matrix,
    x_values=None,
    y_values=None,
    x_label: str = "x",
    y_label: str = "y",
    scale: str = "gray",
    vmin: float | None = None,
    vmax: float | None = None,
) -> str:
    """SVG text for ``matrix[row, col]``; rows run along y (bottom to top), columns along x.

    NaN cells are drawn black.  The output depends only on the inputs.
    """
    if scale not in SCALES:
        raise HeatmapError(f"unknown color scale {scale!r}")
    try:
        m = np.array(matrix, dtype=float)
    except ValueError as exc:
        raise HeatmapError("matrix is not rectangular") from exc
    if m.ndim != 2 or m.size == 0:
        raise HeatmapError("matrix must be a non-empty 2-D array")
    ny, nx = m.shape
    finite = m[np.isfinite(m)]
    if vmin is None:
        vmin = float(finite.min()) if finite.size else 0.0
    if vmax is None:
        vmax = float(finite.max()) if finite.size else 1.0
    if scale == "diverging" and finite.size:
        bound = max(abs(vmin), abs(vmax))
        vmin, vmax = -bound, bound

    width = nx * CELL + 2 * MARGIN
    height = ny * CELL + 2 * MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for i in range(ny):
        y = MARGIN + (ny - 1 - i) * CELL
        for j in range(nx):
            x = MARGIN + j * CELL
            out.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{color_for(m[i, j], vmin, vmax, scale)}"/>'
            )

    def _fmt(v) -> str:
        return f"{v:.4g}"

    bottom = MARGIN + ny * CELL
    if x_values is not None and len(x_values):
        out.append(f'<text x="{MARGIN}" y="{bottom + 14}" font-size="10">{_fmt(x_values[0])}</text>')
        out.append(
            f'<text x="{MARGIN + nx * CELL}" y="{bottom + 14}" font-size="10" '
            f'text-anchor="end">{_fmt(x_values[-1])}</text>'
        )
    if y_values is not None and len(y_values):
        out.append(
            f'<text x="{MARGIN - 4}" y="{bottom}" font-size="10" text-anchor="end">{_fmt(y_values[0])}</text>'
        )
        out.append(
            f'<text x="{MARGIN - 4}" y="{MARGIN + 8}" font-size="10" '
            f'text-anchor="end">{_fmt(y_values[-1])}</text>'
        )
    out.append(
        f'<text x="{MARGIN + nx * CELL // 2}" y="{height - 8}" font-size="11" '
        f'text-anchor="middle">{x_label}</text>'
    )
    out.append(
        f'<text x="12" y="{MARGIN + ny * CELL // 2}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 12 {MARGIN + ny * CELL // 2})">{y_label}</text>'
    )
    out.append(f'<text x="{MARGIN}" y="{MARGIN - 10}" font-size="10">[{_fmt(vmin)}, {_fmt(vmax)}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def grid_from_long(rows: list[list[float]], x_col: int = 0, y_col: int = 1, value_col: int = 2):
    """Reshape long-format rows (x, y, value) into (xs, ys, matrix[y, x]).

    Raises HeatmapError unless every (x, y) pair occurs exactly once.
    """
    xs = sorted({r[x_col] for r in rows})
    ys = sorted({r[y_col] for r in rows})
    if len(xs) * len(ys) != len(rows):
        raise HeatmapError("rows do not form a rectangular grid")
    xi = {v: k for k, v in enumerate(xs)}
    yi = {v: k for k, v in enumerate(ys)}
    m = np.full((len(ys), len(xs)), np.nan)
    seen = np.zeros(m.shape, dtype=bool)
    for r in rows:
        i, j = yi[r[y_col]], xi[r[x_col]]
        if seen[i, j]:
            raise HeatmapError("duplicate grid point")
        seen[i, j] = True
        m[i, j] = r[value_col]
    return np.array(xs), np.array(ys), m


def export_heatmap(
    csv_path: str | Path,
    value: str,
    svg_path: str | Path | None = None,
    scale: str = "gray",
    x: str | None = None,
    y: str | None = None,
) -> Path:
    """Render one column of a long-format map CSV as an SVG heatmap.

    The first two columns are the axes unless ``x`` / ``y`` name others.
    """
    csv_path = Path(csv_path)
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    names = [h.split(" (")[0] for h in header]

    def col(name: str | None, default: int) -> int:
        if name is None:
            return default
        if name not in names:
            raise HeatmapError(f"column {name!r} not in {names}")
        return names.index(name)

    xc, yc, vc = col(x, 0), col(y, 1), col(value, -1)
    if any(len(r) != len(header) for r in rows):
        raise HeatmapError("ragged CSV rows")
    xs, ys, m = grid_from_long(rows, xc, yc, vc)
    svg = heatmap_svg(m, xs, ys, names[xc], names[yc], scale)
    out = Path(svg_path) if svg_path else csv_path.with_name(f"{csv_path.stem}_{value}.svg")
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return out
