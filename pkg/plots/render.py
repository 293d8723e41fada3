"""Render figures from cbcsim output directories.

This package is deliberately decoupled from the simulator library: it reads
only the documented output files (manifest.json, *.poly, *.csv, *.world,
summary.json) and turns them into static images.

Usage:
    python3 plots/render.py <output-dir> <kind> <image.png>

with kind one of corridor_grid, softmin, follow, explore, lor.

Colors follow one legend everywhere: corridors yellow, obstacles red,
robot cyan, reference paths blue.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Circle

KINDS = ("corridor_grid", "softmin", "follow", "explore", "lor")

CORRIDOR_COLOR = "gold"
OBSTACLE_COLOR = "red"
ROBOT_COLOR = "cyan"
PATH_COLOR = "blue"
TRAJ_COLOR = "darkcyan"

FIGSIZE = (8.0, 8.0)
DPI = 100


class PlotInputError(Exception):
    """Raised with a file (and line, when known) for any malformed input."""


@dataclass(frozen=True)
class FigureSpec:
    input_dir: Path
    kind: str
    output: Path

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotInputError(f"unknown figure kind {self.kind!r}")


# -- parsers for the documented file formats ---------------------------------


def _read(path: Path) -> str:
    if not path.is_file():
        raise PlotInputError(f"{path}: missing input file")
    return path.read_text()


def parse_polygons(path: Path):
    """Blank-line-separated blocks of 'x y' vertex lines."""
    polys, block = [], []
    for lineno, line in enumerate(_read(path).splitlines() + [""], start=1):
        line = line.strip()
        if not line:
            if block:
                polys.append(np.array(block))
                block = []
            continue
        parts = line.split()
        if len(parts) != 2:
            raise PlotInputError(f"{path}:{lineno}: expected 'x y', got {line!r}")
        try:
            block.append([float(parts[0]), float(parts[1])])
        except ValueError:
            raise PlotInputError(f"{path}:{lineno}: non-numeric vertex {line!r}")
    return polys


def parse_trajectory(path: Path):
    """Header-labelled CSV; returns (column names, float matrix)."""
    text = _read(path)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise PlotInputError(f"{path}:1: empty trajectory file")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise PlotInputError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            rows.append([float(v) if v != "" else math.nan for v in row])
        except ValueError:
            raise PlotInputError(f"{path}:{lineno}: non-numeric field")
    return header, np.array(rows)


def parse_world(path: Path):
    """'res R origin X Y' header plus #/./? rows, top row first.

    Returns (resolution, origin, cells) with 0 free, 1 occupied, 2 unknown.
    """
    lines = _read(path).splitlines()
    if not lines:
        raise PlotInputError(f"{path}:1: empty world file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "res" or head[2] != "origin":
        raise PlotInputError(f"{path}:1: bad header {lines[0]!r}")
    try:
        res = float(head[1])
        origin = np.array([float(head[3]), float(head[4])])
    except ValueError:
        raise PlotInputError(f"{path}:1: non-numeric header field")
    charmap = {".": 0, "#": 1, "?": 2}
    grid = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            grid.append([charmap[c] for c in line])
        except KeyError as exc:
            raise PlotInputError(f"{path}:{lineno}: unknown cell char {exc}")
    cells = np.array(grid[::-1], dtype=np.uint8)  # text top row = highest iy
    return res, origin, cells


def load_manifest(input_dir: Path) -> dict:
    path = input_dir / "manifest.json"
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise PlotInputError(f"{path}:{exc.lineno}: {exc.msg}")


def _outputs(manifest: dict, role: str):
    return [e["file"] for e in manifest.get("outputs", []) if e["role"] == role]


# -- shared drawing helpers ---------------------------------------------------


def _draw_obstacles(ax, scenario: dict):
    for rec in scenario.get("obstacles", []):
        q, r = rec["q"], float(rec.get("r", 0.0))
        ax.add_patch(
            Circle(q, max(r, 0.02), facecolor=OBSTACLE_COLOR, edgecolor="darkred",
                   alpha=0.9, zorder=3)
        )


def _draw_robot(ax, xy):
    ax.plot([xy[0]], [xy[1]], marker="o", markersize=8, color=ROBOT_COLOR,
            markeredgecolor="black", zorder=5)


def _draw_corridor(ax, poly, fill=True, **kw):
    if len(poly) == 0:
        return
    closed = np.vstack([poly, poly[:1]])
    if fill:
        ax.fill(closed[:, 0], closed[:, 1], facecolor=CORRIDOR_COLOR, alpha=0.5,
                edgecolor="goldenrod", zorder=1, **kw)
    else:
        ax.plot(closed[:, 0], closed[:, 1], color="goldenrod", linewidth=1.0,
                zorder=1, **kw)


def _square(ax):
    ax.set_aspect("equal")
    ax.tick_params(labelsize=7)


# -- figure kinds --------------------------------------------------------------


def _render_corridor_grid(spec: FigureSpec, manifest: dict, fig):
    names = sorted(
        n for n in _outputs(manifest, "corridor_polygon") if n.endswith(".poly")
    )
    if not names:
        raise PlotInputError(f"{spec.input_dir}: no corridor polygons in manifest")
    n = len(names)
    ncols = int(math.ceil(math.sqrt(n)))
    nrows = int(math.ceil(n / ncols))
    scenario = manifest.get("scenario", {})
    for k, name in enumerate(names):
        ax = fig.add_subplot(nrows, ncols, k + 1)
        for poly in parse_polygons(spec.input_dir / name):
            _draw_corridor(ax, poly)
        _draw_obstacles(ax, scenario)
        _draw_robot(ax, scenario.get("state", [0.0, 0.0])[:2])
        ax.set_title(Path(name).stem, fontsize=7)
        _square(ax)


def _render_softmin(spec: FigureSpec, manifest: dict, fig):
    names = sorted(
        n for n in _outputs(manifest, "corridor_polygon") if n.endswith(".poly")
    )
    exact = [n for n in names if "exact" in n]
    others = [n for n in names if "exact" not in n]
    ax = fig.add_subplot(1, 1, 1)
    scenario = manifest.get("scenario", {})
    for name in exact:
        for poly in parse_polygons(spec.input_dir / name):
            _draw_corridor(ax, poly, fill=True, label=Path(name).stem)
    for name in others:
        for poly in parse_polygons(spec.input_dir / name):
            closed = np.vstack([poly, poly[:1]]) if len(poly) else poly
            ax.plot(closed[:, 0], closed[:, 1], linewidth=1.2,
                    label=Path(name).stem, zorder=2)
    _draw_obstacles(ax, scenario)
    _draw_robot(ax, scenario.get("state", [0.0, 0.0])[:2])
    ax.legend(fontsize=7, loc="lower left")
    _square(ax)


def _render_follow(spec: FigureSpec, manifest: dict, fig):
    ax = fig.add_subplot(1, 1, 1)
    scenario = manifest.get("scenario", {})
    for name in _outputs(manifest, "corridor_polygons"):
        for poly in parse_polygons(spec.input_dir / name):
            _draw_corridor(ax, poly, fill=False)
    for name in _outputs(manifest, "path"):
        for line in parse_polygons(spec.input_dir / name):
            ax.plot(line[:, 0], line[:, 1], color=PATH_COLOR, linewidth=2.0,
                    zorder=2, label="reference path")
    for name in _outputs(manifest, "trajectory"):
        header, data = parse_trajectory(spec.input_dir / name)
        ix, iy = header.index("state_0"), header.index("state_1")
        ax.plot(data[:, ix], data[:, iy], color=TRAJ_COLOR, linewidth=1.5,
                zorder=4, label="trajectory")
        _draw_robot(ax, (data[-1, ix], data[-1, iy]))
    _draw_obstacles(ax, scenario)
    ax.legend(fontsize=7, loc="upper left")
    _square(ax)


def _render_explore(spec: FigureSpec, manifest: dict, fig):
    ax = fig.add_subplot(1, 1, 1)
    maps = _outputs(manifest, "map")
    final = [n for n in maps if n.startswith("final")] or maps[-1:]
    if not final:
        raise PlotInputError(f"{spec.input_dir}: no map outputs in manifest")
    res, origin, cells = parse_world(spec.input_dir / final[0])
    h, w = cells.shape
    rgb = np.ones((h, w, 3))
    rgb[cells == 1] = (0.8, 0.1, 0.1)  # occupied: red
    rgb[cells == 2] = (0.8, 0.8, 0.8)  # unknown: gray
    extent = (origin[0], origin[0] + w * res, origin[1], origin[1] + h * res)
    ax.imshow(rgb, origin="lower", extent=extent, interpolation="nearest", zorder=0)
    for name in _outputs(manifest, "corridor_polygon"):
        for poly in parse_polygons(spec.input_dir / name):
            _draw_corridor(ax, poly, fill=False)
    for name in _outputs(manifest, "path"):
        for line in parse_polygons(spec.input_dir / name):
            ax.plot(line[:, 0], line[:, 1], color=PATH_COLOR, linewidth=1.2, zorder=2)
    last_xy = None
    for name in _outputs(manifest, "trajectory"):
        header, data = parse_trajectory(spec.input_dir / name)
        if len(data) == 0:
            continue
        ix, iy = header.index("state_0"), header.index("state_1")
        ax.plot(data[:, ix], data[:, iy], color=TRAJ_COLOR, linewidth=1.2, zorder=4)
        last_xy = (data[-1, ix], data[-1, iy])
    if last_xy is not None:
        _draw_robot(ax, last_xy)
    _square(ax)


def _render_lor(spec: FigureSpec, manifest: dict, fig):
    ax = fig.add_subplot(1, 1, 1)
    scenario = manifest.get("scenario", {})
    names = _outputs(manifest, "trajectory")
    if not names:
        raise PlotInputError(f"{spec.input_dir}: no accepted setpoint trajectories")
    for name in sorted(names):
        header, data = parse_trajectory(spec.input_dir / name)
        it, iy = header.index("t"), header.index("state_0")
        ax.plot(data[:, it], data[:, iy], linewidth=1.5, label=Path(name).stem)
        ax.plot([data[0, it]], [data[0, iy]], marker="o", color=ROBOT_COLOR,
                markeredgecolor="black", zorder=5)
    # affine output bounds a y + b >= 0 drawn as y = -b / a
    for rec in scenario.get("output_barriers", []):
        a = float(np.atleast_1d(rec["a"])[0])
        if a != 0.0:
            ax.axhline(-float(rec["b"]) / a, color=OBSTACLE_COLOR,
                       linestyle="--", linewidth=1.0)
    ax.set_xlabel("t [s]", fontsize=8)
    ax.set_ylabel("output", fontsize=8)
    ax.legend(fontsize=7, loc="best")
    ax.tick_params(labelsize=7)


_RENDERERS = {
    "corridor_grid": _render_corridor_grid,
    "softmin": _render_softmin,
    "follow": _render_follow,
    "explore": _render_explore,
    "lor": _render_lor,
}


def render(spec: FigureSpec) -> Path:
    """Write the figure for spec and return the image path."""
    manifest = load_manifest(spec.input_dir)
    fig = plt.figure(figsize=FIGSIZE, dpi=DPI)
    try:
        _RENDERERS[spec.kind](spec, manifest, fig)
        fig.tight_layout()
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, dpi=DPI, metadata={"Software": "cbcsim-plots"})
    finally:
        plt.close(fig)
    return spec.output


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    in_dir, kind, out = argv
    try:
        render(FigureSpec(Path(in_dir), kind, Path(out)))
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
