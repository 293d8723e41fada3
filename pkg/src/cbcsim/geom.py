"""Halfspace corridors in goal space: membership, 2D clipping, sampling.

A corridor is an intersection of halfspaces ``normal . g >= offset``
anchored at the robot state it was built from.  Normals are kept in raw
(unnormalized) form so logged constraints can be audited coefficient by
coefficient; membership tests rescale internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SamplingFailed

MEMBERSHIP_TOL = 1e-9
ZERO_NORMAL_TOL = 1e-12
MAX_SAMPLE_TRIALS = 100_000


@dataclass(frozen=True)
class Halfspace:
    """One constraint ``normal . g >= offset`` on goal states g."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.atleast_1d(np.asarray(self.normal, dtype=float))
        if not (np.all(np.isfinite(n)) and np.isfinite(self.offset)):
            raise ValueError("halfspace coefficients must be finite")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def degenerate(self) -> bool:
        """Zero normal: the constraint is vacuous or infeasible."""
        return float(np.linalg.norm(self.normal)) < ZERO_NORMAL_TOL

    @property
    def vacuous(self) -> bool:
        return self.degenerate and self.offset <= 0.0

    @property
    def infeasible(self) -> bool:
        return self.degenerate and self.offset > 0.0


@dataclass(frozen=True)
class Corridor:
    """Intersection of halfspaces in goal space, anchored at a robot state.

    ``kind`` is one of ``full``, ``full_eps``, ``uni``, ``lor``.  A zero-normal
    halfspace with positive offset marks the whole corridor empty; vacuous
    zero-normal halfspaces are kept for audit but ignored by membership.
    """

    anchor: np.ndarray
    halfspaces: tuple
    kind: str = "full"
    unsafe_anchor: bool = False

    def __post_init__(self):
        anchor = np.atleast_1d(np.asarray(self.anchor, dtype=float))
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "halfspaces", tuple(self.halfspaces))
        live = [hs for hs in self.halfspaces if not hs.degenerate]
        if live:
            normals = np.array([hs.normal for hs in live])
            offsets = np.array([hs.offset for hs in live])
            scales = np.maximum(1.0, np.linalg.norm(normals, axis=1))
        else:
            normals = np.zeros((0, anchor.size))
            offsets = np.zeros(0)
            scales = np.zeros(0)
        object.__setattr__(self, "_normals", normals)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_scales", scales)
        object.__setattr__(
            self, "empty", any(hs.infeasible for hs in self.halfspaces)
        )

    @property
    def dim(self) -> int:
        return self.anchor.size

    def contains(self, g, tol: float = MEMBERSHIP_TOL) -> bool:
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if g.size != self.dim:
            raise DimensionMismatch(
                f"point has dimension {g.size}, corridor has {self.dim}"
            )
        if self.empty:
            return False
        if self._normals.shape[0] == 0:
            return True
        slack = (self._normals @ g - self._offsets) / self._scales
        return bool(np.all(slack >= -tol))

    def contains_many(self, points, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        """Vectorized membership test for an (N, dim) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise DimensionMismatch(
                f"expected (N, {self.dim}) points, got {points.shape}"
            )
        if self.empty:
            return np.zeros(points.shape[0], dtype=bool)
        if self._normals.shape[0] == 0:
            return np.ones(points.shape[0], dtype=bool)
        slack = (points @ self._normals.T - self._offsets) / self._scales
        return np.all(slack >= -tol, axis=1)


@dataclass(frozen=True)
class Polygon:
    """Convex simple polygon, vertices counterclockwise; may be empty."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "vertices", v)

    @property
    def empty(self) -> bool:
        return self.vertices.shape[0] == 0

    def centroid(self) -> np.ndarray:
        if self.empty:
            raise ValueError("empty polygon has no centroid")
        return self.vertices.mean(axis=0)


def default_bbox(anchor, half_width: float):
    """Square clipping box of given half-width centered at the anchor."""
    ax, ay = np.asarray(anchor, dtype=float)[:2]
    return (ax - half_width, ay - half_width, ax + half_width, ay + half_width)


def _clip_halfplane(vertices, normal, offset):
    out = []
    k = len(vertices)
    for i in range(k):
        a = vertices[i]
        b = vertices[(i + 1) % k]
        da = float(normal @ a) - offset
        db = float(normal @ b) - offset
        if da >= 0.0:
            out.append(a)
        if (da >= 0.0) != (db >= 0.0):
            t = da / (da - db)
            out.append(a + t * (b - a))
    return out


def clip_corridor_2d(corridor: Corridor, bbox) -> Polygon:
    """Clip a 2D corridor to an axis-aligned box by successive halfplanes."""
    if corridor.dim != 2:
        raise DimensionMismatch("clipping requires a 2D corridor")
    xmin, ymin, xmax, ymax = (float(v) for v in bbox)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("degenerate bbox")
    if corridor.empty:
        return Polygon(np.zeros((0, 2)))
    vertices = [
        np.array([xmin, ymin]),
        np.array([xmax, ymin]),
        np.array([xmax, ymax]),
        np.array([xmin, ymax]),
    ]
    for normal, offset in zip(corridor._normals, corridor._offsets):
        vertices = _clip_halfplane(vertices, normal, offset)
        if not vertices:
            return Polygon(np.zeros((0, 2)))
    return Polygon(np.array(vertices))


def sample_corridor(corridor: Corridor, bbox, count: int, seed: int):
    """Rejection-sample ``count`` corridor members uniformly from the bbox.

    Deterministic for a fixed seed.  Raises SamplingFailed if no member is
    found within MAX_SAMPLE_TRIALS draws.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    xmin, ymin, xmax, ymax = (float(v) for v in bbox)
    lo = np.array([xmin, ymin])
    hi = np.array([xmax, ymax])
    if corridor.dim != 2:
        raise DimensionMismatch("sampling helper is 2D")
    rng = np.random.default_rng(seed)
    accepted = []
    n_accepted = 0
    trials = 0
    while n_accepted < count and trials < MAX_SAMPLE_TRIALS:
        batch = min(max(4 * (count - n_accepted), 256), MAX_SAMPLE_TRIALS - trials)
        pts = rng.uniform(lo, hi, size=(batch, 2))
        trials += batch
        keep = corridor.contains_many(pts, tol=0.0)
        if np.any(keep):
            kept = pts[keep]
            accepted.append(kept)
            n_accepted += kept.shape[0]
    if n_accepted < count:
        if n_accepted == 0:
            raise SamplingFailed(
                f"no corridor member found in {trials} trials"
            )
        raise SamplingFailed(
            f"only {n_accepted}/{count} members found in {trials} trials"
        )
    return np.concatenate(accepted, axis=0)[:count]
