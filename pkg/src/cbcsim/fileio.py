"""Text output formats shared by the CLI, the acceptance suite, and the
plotting scripts.

Formats:
  - polygon dump: one "x y" vertex per line with 9 significant digits,
    counterclockwise, polygons separated by a blank line
  - corridor log: line-oriented records (anchor, per-halfspace
    normal/offset, kind, params)
  - trajectory CSV: t, state, control, h_1..h_m, goal, goal_in_corridor,
    s_star
  - map snapshots: the world text format
  - path polylines: same vertex syntax as polygon dumps, single block
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .geom import Corridor, Halfspace, Polygon
from .sim import Trajectory, Sample


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def dump_polygons(polygons) -> str:
    """Serialize polygons (counterclockwise vertex lists)."""
    blocks = []
    for poly in polygons:
        verts = poly.vertices if isinstance(poly, Polygon) else np.asarray(poly)
        blocks.append(
            "\n".join(f"{_fmt(vx)} {_fmt(vy)}" for vx, vy in np.atleast_2d(verts))
        )
    return "\n\n".join(blocks) + "\n"


def parse_polygons(text: str):
    polys = []
    block = []
    for line in text.splitlines() + [""]:
        line = line.strip()
        if not line:
            if block:
                polys.append(np.array(block))
                block = []
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad polygon vertex line: {line!r}")
        block.append([float(parts[0]), float(parts[1])])
    return polys


def dump_polyline(points) -> str:
    return dump_polygons([np.atleast_2d(points)])


def dump_corridor(corridor: Corridor, params=None) -> str:
    """Line-oriented corridor record."""
    lines = []
    lines.append("anchor " + " ".join(_fmt(v) for v in corridor.anchor))
    lines.append(f"kind {corridor.kind}")
    if params is not None:
        lines.append(
            f"params kappa={_fmt(params.kappa)} alpha={_fmt(params.alpha_rate)}"
            f" epsilon={_fmt(params.epsilon)}"
        )
    for hs in corridor.halfspaces:
        normal = " ".join(_fmt(v) for v in hs.normal)
        lines.append(f"halfspace {normal} offset {_fmt(hs.offset)}")
    return "\n".join(lines) + "\n"


def parse_corridor(text: str) -> Corridor:
    anchor = None
    kind = "full"
    halfspaces = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "anchor":
            anchor = np.array([float(v) for v in parts[1:]])
        elif parts[0] == "kind":
            kind = parts[1]
        elif parts[0] == "halfspace":
            k = parts.index("offset")
            normal = np.array([float(v) for v in parts[1:k]])
            halfspaces.append(Halfspace(normal=normal, offset=float(parts[k + 1])))
        elif parts[0] == "params":
            continue
        else:
            raise ValueError(f"bad corridor log line: {line!r}")
    if anchor is None:
        raise ValueError("corridor log has no anchor line")
    return Corridor(
        anchor=anchor, halfspaces=tuple(halfspaces), kind=kind, unsafe_anchor=False
    )


def trajectory_columns(traj: Trajectory):
    first = traj.samples[0]
    n_state = first.state.shape[0]
    n_ctrl = first.control.shape[0]
    # the barrier family may change along a stitched trajectory; pad to the
    # widest sample with nan
    n_h = max(s.h_values.shape[0] for s in traj.samples)
    n_goal = first.goal.shape[0]
    cols = ["t"]
    cols += [f"state_{i}" for i in range(n_state)]
    cols += [f"control_{i}" for i in range(n_ctrl)]
    cols += [f"h_{i + 1}" for i in range(n_h)]
    cols += [f"goal_{i}" for i in range(n_goal)]
    cols += ["goal_in_corridor", "s_star"]
    return cols


def dump_trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = trajectory_columns(traj)
    writer.writerow(cols)
    n_h = sum(c.startswith("h_") for c in cols)
    for s in traj.samples:
        row = [repr(float(s.t))]
        row += [repr(float(v)) for v in s.state]
        row += [repr(float(v)) for v in s.control]
        h = np.concatenate([s.h_values, np.full(n_h - s.h_values.shape[0], np.nan)])
        row += [repr(float(v)) for v in h]
        row += [repr(float(v)) for v in s.goal]
        row.append("1" if s.goal_in_corridor else "0")
        row.append("" if s.s_star is None else repr(float(s.s_star)))
        writer.writerow(row)
    return buf.getvalue()


def parse_trajectory_csv(text: str) -> Trajectory:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    n_state = sum(c.startswith("state_") for c in header)
    n_ctrl = sum(c.startswith("control_") for c in header)
    n_h = sum(c.startswith("h_") for c in header)
    n_goal = sum(c.startswith("goal_") and c != "goal_in_corridor" for c in header)
    kind = "unicycle" if n_state == 3 and n_ctrl == 2 else "full"
    traj = Trajectory(kind=kind, dt=0.0)
    times = []
    for row in reader:
        i = 0
        t = float(row[i]); i += 1
        state = np.array([float(v) for v in row[i : i + n_state]]); i += n_state
        ctrl = np.array([float(v) for v in row[i : i + n_ctrl]]); i += n_ctrl
        h = np.array([float(v) for v in row[i : i + n_h]]); i += n_h
        goal = np.array([float(v) for v in row[i : i + n_goal]]); i += n_goal
        gic = row[i] == "1"; i += 1
        s_star = None if row[i] == "" else float(row[i])
        times.append(t)
        traj.samples.append(
            Sample(
                t=t, state=state, control=ctrl, h_values=h,
                goal=goal, goal_in_corridor=gic, s_star=s_star,
            )
        )
    if len(times) > 1:
        traj.dt = times[1] - times[0]
    return traj


def dump_summary(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def parse_summary(text: str) -> dict:
    return json.loads(text)
