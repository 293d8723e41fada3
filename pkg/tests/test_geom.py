import numpy as np
import pytest

from cbcsim.errors import SamplingFailed
from cbcsim.geom import (
    Corridor,
    Halfspace,
    Polygon,
    clip_corridor_2d,
    default_bbox,
    sample_corridor,
)


def square_corridor(side=1.0):
    """Axis-aligned square |g_i| <= side as a corridor at the origin."""
    halfspaces = (
        Halfspace(np.array([1.0, 0.0]), -side),
        Halfspace(np.array([-1.0, 0.0]), -side),
        Halfspace(np.array([0.0, 1.0]), -side),
        Halfspace(np.array([0.0, -1.0]), -side),
    )
    return Corridor(np.zeros(2), halfspaces, kind="full", unsafe_anchor=False)


def shoelace(vertices):
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def test_halfspace_flags():
    assert not Halfspace(np.array([1.0, 0.0]), 0.0).degenerate
    zero_ok = Halfspace(np.zeros(2), -1.0)
    assert zero_ok.degenerate and zero_ok.vacuous and not zero_ok.infeasible
    zero_bad = Halfspace(np.zeros(2), 1.0)
    assert zero_bad.degenerate and zero_bad.infeasible


def test_corridor_membership_hand_case():
    cor = square_corridor(1.0)
    assert cor.contains(np.zeros(2))
    assert cor.contains(np.array([1.0, 1.0]))
    assert not cor.contains(np.array([1.1, 0.0]))
    pts = np.array([[0.0, 0.0], [0.5, -0.5], [2.0, 0.0], [0.0, -1.5]])
    np.testing.assert_array_equal(
        cor.contains_many(pts), [True, True, False, False]
    )


def test_membership_scale_invariance():
    # the same geometry with normals scaled by 1e6 must classify identically
    rng = np.random.default_rng(3)
    small = square_corridor(1.0)
    big = Corridor(
        np.zeros(2),
        tuple(Halfspace(1e6 * h.normal, 1e6 * h.offset) for h in small.halfspaces),
        kind="full",
        unsafe_anchor=False,
    )
    pts = rng.uniform(-2.0, 2.0, size=(500, 2))
    np.testing.assert_array_equal(small.contains_many(pts), big.contains_many(pts))


def test_infeasible_halfspace_makes_corridor_empty():
    cor = Corridor(
        np.zeros(2),
        (Halfspace(np.zeros(2), 1.0),),
        kind="full",
        unsafe_anchor=False,
    )
    assert cor.empty
    assert not cor.contains(np.zeros(2))


def test_clip_to_known_rectangle():
    cor = Corridor(
        np.zeros(2),
        (Halfspace(np.array([-1.0, 0.0]), -1.0),),  # g_1 <= 1
        kind="full",
        unsafe_anchor=False,
    )
    bbox = default_bbox(np.zeros(2), 2.0)
    poly = clip_corridor_2d(cor, bbox)
    assert not poly.empty
    assert shoelace(poly.vertices) == pytest.approx(3.0 * 4.0)
    assert shoelace(poly.vertices) > 0.0  # counterclockwise
    assert poly.vertices[:, 0].max() == pytest.approx(1.0)


def test_clip_empty_intersection():
    cor = Corridor(
        np.zeros(2),
        (Halfspace(np.array([1.0, 0.0]), 10.0),),  # g_1 >= 10
        kind="full",
        unsafe_anchor=False,
    )
    poly = clip_corridor_2d(cor, default_bbox(np.zeros(2), 2.0))
    assert poly.empty


def test_sample_corridor_members_and_determinism():
    cor = square_corridor(1.0)
    bbox = default_bbox(np.zeros(2), 3.0)
    pts = sample_corridor(cor, bbox, 200, seed=7)
    assert pts.shape == (200, 2)
    assert np.all(np.abs(pts) <= 1.0 + 1e-12)
    again = sample_corridor(cor, bbox, 200, seed=7)
    np.testing.assert_array_equal(pts, again)
    other = sample_corridor(cor, bbox, 200, seed=8)
    assert not np.array_equal(pts, other)


def test_sample_corridor_fails_on_empty_set():
    cor = Corridor(
        np.zeros(2),
        (Halfspace(np.array([1.0, 0.0]), 10.0),),
        kind="full",
        unsafe_anchor=False,
    )
    with pytest.raises(SamplingFailed):
        sample_corridor(cor, default_bbox(np.zeros(2), 2.0), 10, seed=0)


def test_polygon_centroid():
    poly = Polygon(np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]))
    np.testing.assert_allclose(poly.centroid(), [1.0, 1.0])
