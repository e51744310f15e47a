"""Plain SVG figures: grayscale heatmaps, landscape curves and MDS scatter plots.

Every figure is written as text with fixed number formatting, so identical
inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .landscape import Landscape
from .lsm import classical_mds

CELL = 48
MARGIN = 70
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")


def gray_level(value: float, vmin: float = 0.0, vmax: float = 1.0) -> int:
    """0-255 gray for a value; larger values are darker."""
    if vmax <= vmin:
        return 127
    u = min(max((value - vmin) / (vmax - vmin), 0.0), 1.0)
    return int(round(255 * (1.0 - u)))


def _svg(width, height, body):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def heatmap_svg(mat, row_labels, col_labels, title="", vmin=0.0, vmax=1.0) -> str:
    """One rect per finite entry; NaN entries are left blank."""
    mat = np.asarray(mat, dtype=float)
    nr, nc = mat.shape
    w, h = MARGIN + nc * CELL + 20, MARGIN + nr * CELL + 20
    body = [f'<text x="{MARGIN}" y="18">{escape(title)}</text>']
    for c, lab in enumerate(col_labels):
        body.append(f'<text x="{MARGIN + c * CELL + CELL / 2:.1f}" y="{MARGIN - 8}" '
                    f'text-anchor="middle">{escape(str(lab))}</text>')
    for r, lab in enumerate(row_labels):
        body.append(f'<text x="{MARGIN - 6}" y="{MARGIN + r * CELL + CELL / 2 + 4:.1f}" '
                    f'text-anchor="end">{escape(str(lab))}</text>')
        for c in range(nc):
            v = mat[r, c]
            if not np.isfinite(v):
                continue
            g = gray_level(v, vmin, vmax)
            ink = "white" if g < 128 else "black"
            x, y = MARGIN + c * CELL, MARGIN + r * CELL
            body.append(f'<rect class="cell" x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                        f'fill="rgb({g},{g},{g})" data-value="{v:.6g}"/>')
            body.append(f'<text x="{x + CELL / 2:.1f}" y="{y + CELL / 2 + 4:.1f}" text-anchor="middle" '
                        f'fill="{ink}">{v:.3f}</text>')
    return _svg(w, h, body)


def _axes(x0, x1, y0, y1, w, h, pad=50):
    sx = (w - 2 * pad) / (x1 - x0 if x1 > x0 else 1.0)
    sy = (h - 2 * pad) / (y1 - y0 if y1 > y0 else 1.0)

    def tx(x):
        return pad + (x - x0) * sx

    def ty(y):
        return h - pad - (y - y0) * sy

    return tx, ty


def landscape_svg(l: Landscape, title="", max_levels: int = 10, w=560, h=360) -> str:
    levels = l.levels[:max_levels]
    body = [f'<text x="50" y="20">{escape(title or f"order {l.order} landscape")}</text>']
    if levels:
        t_all = np.concatenate([t for t, _ in levels])
        v_max = max(float(v.max()) for _, v in levels)
        tx, ty = _axes(float(t_all.min()), float(t_all.max()), 0.0, v_max, w, h)
        body.append(f'<line x1="{tx(t_all.min()):.2f}" y1="{ty(0):.2f}" x2="{tx(t_all.max()):.2f}" '
                    f'y2="{ty(0):.2f}" stroke="black"/>')
        for k, (t, v) in enumerate(levels):
            pts = " ".join(f"{tx(a):.2f},{ty(b):.2f}" for a, b in zip(t.tolist(), v.tolist()))
            body.append(f'<polyline class="level" data-level="{k + 1}" points="{pts}" fill="none" '
                        f'stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1.5"/>')
    return _svg(w, h, body)


def mds_svg(dist, groups, title="", w=420, h=420) -> str:
    """Classical MDS of a landscape distance matrix, one colour per group."""
    xy = classical_mds(np.asarray(dist, float), 2)
    groups = np.asarray(groups)
    body = [f'<text x="50" y="20">{escape(title)}</text>']
    tx, ty = _axes(float(xy[:, 0].min()), float(xy[:, 0].max()),
                   float(xy[:, 1].min()), float(xy[:, 1].max()), w, h)
    for (x, y), g in zip(xy.tolist(), groups.tolist()):
        body.append(f'<circle class="item" cx="{tx(x):.2f}" cy="{ty(y):.2f}" r="4" '
                    f'fill="{PALETTE[int(g) % len(PALETTE)]}" data-group="{g}"/>')
    return _svg(w, h, body)


def _read_distances(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    groups = [int(r[0]) for r in rows]
    mat = np.array([[float(v) for v in r[1:]] for r in rows])
    return mat, groups


def emit_plots(artifact_dir, out_dir=None) -> list[Path]:
    """Heatmaps of the mean tables plus MDS views of the stored distance matrices."""
    artifact_dir = Path(artifact_dir)
    out_dir = Path(out_dir) if out_dir is not None else artifact_dir / "plots"
    src = artifact_dir / "artifacts.json"
    if not src.exists():
        return []
    doc = json.loads(src.read_text())
    if not doc.get("pvalues") and not doc.get("rand"):
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = out_dir / name
        p.write_text(text)
        written.append(p)

    summ = doc["summary"]
    orders = sorted({r["order"] for r in summ["pvalues"] + summ["rand"]})
    for table, key in (("pvalues", "test"), ("rand", "method")):
        rows = summ[table]
        names = sorted({r[key] for r in rows}, key=[r[key] for r in rows].index)
        for o in orders:
            for name in names:
                sel = {r["cell"]: r["mean"] for r in rows if r["order"] == o and r[key] == name}
                if doc["kind"] == "er_pairwise":
                    probs = _grid_from_cells(doc["cells"])
                    mat = np.full((len(probs), len(probs)), np.nan)
                    for i in range(len(probs)):
                        for j in range(i):
                            mat[i, j] = sel.get(f"{probs[j]}_{probs[i]}", np.nan)
                    svg = heatmap_svg(mat, probs, probs, f"{table} order {o} {name}")
                else:
                    cells = [c for c in doc["cells"] if c in sel]
                    mat = np.array([[sel[c]] for c in cells])
                    svg = heatmap_svg(mat, cells, [name], f"{table} order {o}")
                put(f"heatmap_{table}_order{o}_{name}.svg", svg)
    ddir = artifact_dir / "distances"
    if ddir.is_dir():
        for f in sorted(ddir.glob("*.csv")):
            mat, groups = _read_distances(f)
            put(f"mds_{f.stem}.svg", mds_svg(mat, groups, f.stem))
    return written


def _grid_from_cells(cells):
    probs = []
    for c in cells:
        for p in c.split("_"):
            if p not in probs:
                probs.append(p)
    return sorted(probs, key=float)
