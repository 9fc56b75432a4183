"""Discrete loop machinery: spectral calculus, shifts, intersections, areas."""

import numpy as np
import pytest

from magloop import loops
from magloop.errors import UnsupportedLoopError
from magloop.geometry import SpherePoint, stereographic_inverse
from magloop.loops import (
    DiscreteLoop,
    enclosed_area,
    eval_interp,
    fourier_derivative,
    isotropy_order,
    iterate,
    loop_checksum,
    loop_from_csv,
    loop_from_json,
    loop_to_csv,
    loop_to_json,
    orbit_distance,
    resample,
    rotation_index,
    rotation_index_with_residual,
    self_intersections,
    shift,
    shift_distance,
)

NORTH = SpherePoint(np.array([0.0, 0.0, 1.0]))
SOUTH = SpherePoint(np.array([0.0, 0.0, -1.0]))


def latitude_circle(theta, n=64, t0=0.0):
    t = 2 * np.pi * (np.arange(n) / n) + t0
    st, ct = np.sin(theta), np.cos(theta)
    return DiscreteLoop(np.stack([st * np.cos(t), st * np.sin(t), np.full(n, ct)], axis=1))


def wobbly_loop(n=96, amp=0.25):
    """A smooth band-limited non-circular simple loop."""
    t = 2 * np.pi * np.arange(n) / n
    pts = np.stack([
        np.cos(t),
        np.sin(t),
        amp * np.sin(2 * t) + 0.5 * amp * np.cos(3 * t),
    ], axis=1)
    return DiscreteLoop(pts)


def planar_to_sphere(xy, scale=0.6):
    """Lift a planar curve to the sphere through the south-pole chart."""
    pts = [stereographic_inverse(scale * p, NORTH).x for p in xy]
    return DiscreteLoop(np.array(pts))


def test_loop_validation():
    with pytest.raises(ValueError):
        DiscreteLoop(np.ones((10, 3)))  # too small
    with pytest.raises(ValueError):
        DiscreteLoop(np.ones((17, 3)))  # odd
    lp = DiscreteLoop(2.0 * latitude_circle(1.0).points)
    assert np.allclose(np.linalg.norm(lp.points, axis=1), 1.0)


def test_fourier_derivative_exact_for_modes():
    n = 32
    t = np.arange(n) / n
    vals = np.stack([np.sin(2 * np.pi * t), np.cos(6 * np.pi * t), t * 0 + 1], axis=1)
    d = fourier_derivative(vals, 1)
    assert np.allclose(d[:, 0], 2 * np.pi * np.cos(2 * np.pi * t), atol=1e-12)
    assert np.allclose(d[:, 1], -6 * np.pi * np.sin(6 * np.pi * t), atol=1e-11)
    assert np.allclose(d[:, 2], 0.0, atol=1e-13)
    d2 = fourier_derivative(vals, 2)
    assert np.allclose(d2[:, 0], -(2 * np.pi) ** 2 * np.sin(2 * np.pi * t), atol=1e-10)


def test_eval_interp_reproduces_and_extends():
    lp = wobbly_loop()
    on_grid = eval_interp(lp.points, lp.params)
    assert np.allclose(on_grid, lp.points, atol=1e-12)
    # off-grid values must agree with a finer sampling of the same interpolant
    fine = resample(lp, 4 * lp.n)
    probe = np.arange(4 * lp.n) / (4 * lp.n)
    assert np.allclose(eval_interp(lp.points, probe), fine.points, atol=1e-12)


def test_eval_interp_real_for_real_input():
    lp = wobbly_loop()
    vals = eval_interp(lp.points, np.array([0.123, 0.77]))
    assert vals.dtype == np.float64


def test_resample_round_trip():
    lp = wobbly_loop(64)
    up = resample(lp, 128)
    back = resample(up, 64)
    assert np.allclose(back.points, lp.points, atol=1e-12)


def test_shift_distance_finds_shift():
    lp = wobbly_loop()
    moved = shift(lp, 7)
    d, s = shift_distance(lp, moved)
    assert d < 1e-13
    assert s == pytest.approx(7 / lp.n)


def test_orbit_distance_subgrid():
    # same orbit discretized with base points offset by a non-integer step
    lp = wobbly_loop(64)
    frac = 0.37 / 64
    moved = DiscreteLoop(eval_interp(lp.points, lp.params + frac))
    grid_d, _ = shift_distance(lp, moved)
    assert grid_d > 1e-4  # the plain grid metric cannot see past the offset
    assert orbit_distance(lp, moved) < 1e-8
    assert orbit_distance(lp, lp) < 1e-14


def test_orbit_distance_separates_different_orbits():
    a = latitude_circle(0.8)
    b = latitude_circle(1.1)
    assert orbit_distance(a, b) > 0.1


def test_iterate_and_isotropy():
    base = latitude_circle(0.9, n=96)
    assert isotropy_order(base) == 1
    for nf in (2, 3):
        it = iterate(base, nf)
        assert isotropy_order(it) == nf


def test_isotropy_of_wobbly_loop_is_one():
    assert isotropy_order(wobbly_loop()) == 1


def test_circle_is_simple():
    assert self_intersections(latitude_circle(0.7)).simple


def figure_eight(n=128):
    # half-step offset keeps the single planar crossing strictly inside chords
    t = 2 * np.pi * (np.arange(n) + 0.5) / n
    return planar_to_sphere(np.stack([np.sin(2 * t), np.sin(t)], axis=1))


def test_figure_eight_has_one_crossing():
    res = self_intersections(figure_eight())
    assert not res.simple
    assert len(res.crossings) == 1


def test_coincident_segments_flagged_degenerate():
    lp = latitude_circle(0.8, n=32)
    pts = np.concatenate([lp.points, lp.points], axis=0)  # doubled cover, overlapping chords
    res = self_intersections(DiscreteLoop(pts))
    assert res.degenerate_pairs


def test_too_coarse_loop_rejected():
    # a 3-fold iterate on 16 points has chord gaps of 3/16 of the equator
    coarse = iterate(latitude_circle(np.pi / 2, n=16), 3)
    with pytest.raises(UnsupportedLoopError):
        self_intersections(coarse)


def test_rotation_index_equator():
    eq = latitude_circle(np.pi / 2, n=64)
    # viewed from the south pole the equator winds once counterclockwise
    assert rotation_index(eq, SOUTH) == 1
    idx, resid = rotation_index_with_residual(eq, SOUTH)
    assert idx == 1 and resid < 1e-10


def test_rotation_index_of_iterates():
    base = latitude_circle(0.9, n=96)
    pole = SOUTH
    for nf in (1, 2, 3):
        assert rotation_index(iterate(base, nf), pole) == nf


def test_rotation_index_figure_eight():
    assert rotation_index(figure_eight(), NORTH) == 0


def test_enclosed_area_latitude_cap():
    # J gamma-dot points toward the north pole for this parametrization, so
    # the positive side is the north cap of area 2 pi (1 - cos th)
    for theta in (0.5, 1.0, np.pi / 2):
        lp = latitude_circle(theta, n=64)
        assert enclosed_area(lp) == pytest.approx(2 * np.pi * (1 - np.cos(theta)), abs=1e-10)


def test_enclosed_area_orientation_complement():
    lp = latitude_circle(0.8, n=64)
    rev = DiscreteLoop(lp.points[::-1].copy())
    total = enclosed_area(lp) + enclosed_area(rev)
    assert total == pytest.approx(4 * np.pi, abs=1e-9)


def test_enclosed_area_rejects_non_simple():
    with pytest.raises(UnsupportedLoopError):
        enclosed_area(figure_eight())


def test_csv_round_trip_exact():
    lp = wobbly_loop()
    text = loop_to_csv(lp)
    back = loop_from_csv(text)
    assert np.array_equal(back.points, lp.points)
    assert loop_to_csv(back) == text


def test_csv_header_required():
    with pytest.raises(ValueError):
        loop_from_csv("a,b,c\n0,1,0,0\n")


def test_json_round_trip_and_checksum():
    lp = wobbly_loop()
    text = loop_to_json(lp, metadata={"note": "test"})
    back = loop_from_json(text)
    assert np.array_equal(back.points, lp.points)
    tampered = text.replace(text.split('"checksum": "')[1][:4], "dead")
    with pytest.raises(ValueError):
        loop_from_json(tampered)


def test_checksum_stable():
    lp = latitude_circle(1.0)
    assert loop_checksum(lp) == loop_checksum(DiscreteLoop(lp.points.copy()))
    assert loop_checksum(lp) != loop_checksum(latitude_circle(1.0 + 1e-12))
