import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monoball.geometry import (
    CameraCalibration,
    InvalidCalibration,
    NoGroundIntersection,
    NonPositiveDepth,
    PitchGeometry,
    Ray,
    backproject_ray,
    camera_center,
    discretize_ray,
    look_at_calibration,
    project,
)


def identity_calib():
    return CameraCalibration(intrinsics=np.eye(3), rotation=np.eye(3), translation=np.zeros(3))


def rot_z(deg):
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])


# reusable strategy: a valid broadcast-style calibration plus a target point
calib_strategy = st.builds(
    lambda cx, cy, cz, tx, ty, f: look_at_calibration(
        (cx, cy, cz), (tx, ty, 0.0), f, (1920.0, 1080.0)
    ),
    cx=st.floats(-40, 40),
    cy=st.floats(-80, -30),
    cz=st.floats(5, 40),
    tx=st.floats(-20, 20),
    ty=st.floats(-10, 10),
    f=st.floats(300, 3000),
)


def test_project_on_axis_identity():
    assert np.allclose(project((0, 0, 1), identity_calib()), (0.0, 0.0))


def test_project_principal_point():
    k = np.array([[1000.0, 0, 960], [0, 1000.0, 540], [0, 0, 1]])
    calib = CameraCalibration(intrinsics=k, rotation=np.eye(3), translation=np.zeros(3))
    assert np.allclose(project((0, 0, 5), calib), (960.0, 540.0))


def test_project_matches_homogeneous_oracle():
    # independent oracle: u = dehomogenize(K [R|T] [x, 1])
    rng = np.random.default_rng(42)
    for _ in range(200):
        calib = look_at_calibration(
            rng.uniform((-30, -70, 6), (30, -40, 30)),
            rng.uniform((-20, -15, 0), (20, 15, 0)),
            rng.uniform(400, 2500),
            (1920, 1080),
        )
        x = rng.uniform((-30, -20, 0), (30, 20, 10))
        p34 = calib.intrinsics @ np.hstack([calib.rotation, calib.translation[:, None]])
        h = p34 @ np.append(x, 1.0)
        assert np.allclose(project(x, calib), h[:2] / h[2], atol=1e-9)


def test_project_rejects_nonpositive_depth():
    with pytest.raises(NonPositiveDepth):
        project((0, 0, -1), identity_calib())
    with pytest.raises(NonPositiveDepth):
        project((1, 1, 0), identity_calib())


def test_project_scale_invariant_in_homogeneous_coords():
    # scaling the camera-frame point by any positive factor keeps the pixel
    k = np.array([[800.0, 0, 640], [0, 800.0, 360], [0, 0, 1]])
    xc = np.array([0.3, -0.2, 4.0])
    base = (k @ xc)[:2] / (k @ xc)[2]
    for lam in (0.5, 2.0, 17.0):
        h = k @ (lam * xc)
        assert np.allclose(h[:2] / h[2], base, atol=1e-9)


def test_camera_center_identity_rotation():
    calib = CameraCalibration(
        intrinsics=np.eye(3), rotation=np.eye(3), translation=np.array([0, 0, -5.0])
    )
    assert np.allclose(camera_center(calib), (0, 0, 5))


def test_camera_center_rotated():
    # hand matrix algebra: C = -R^T T with R a 90-degree turn about z
    r = rot_z(90)
    calib = CameraCalibration(intrinsics=np.eye(3), rotation=r, translation=np.array([1.0, 0, 0]))
    assert np.allclose(camera_center(calib), -r.T @ np.array([1.0, 0, 0]), atol=1e-12)


def test_backproject_principal_point_is_optical_axis():
    calib = identity_calib()
    ray = backproject_ray((0, 0), calib)
    assert np.allclose(ray.direction, (0, 0, 1))


def test_backproject_rays_share_origin():
    calib = look_at_calibration((0, -50, 15), (0, 0, 0), 900, (1920, 1080))
    r1 = backproject_ray((100, 200), calib)
    r2 = backproject_ray((1500, 900), calib)
    assert np.allclose(r1.origin, r2.origin)
    assert not np.allclose(r1.direction, r2.direction)


@settings(max_examples=60, deadline=None)
@given(calib=calib_strategy, u=st.tuples(st.floats(0, 1920), st.floats(0, 1080)))
def test_backproject_round_trip(calib, u):
    ray = backproject_ray(u, calib)
    for s in (0.5, 5.0, 50.0):
        px = project(ray.origin + s * ray.direction, calib)
        assert np.allclose(px, u, atol=1e-6)


def test_discretize_vertical_ray_count_and_order():
    ray = Ray(origin=np.array([0, 0, 3.0]), direction=np.array([0, 0, -1.0]))
    pts = discretize_ray(ray, 0.03)
    assert len(pts) == 101
    assert np.allclose(pts[0], (0, 0, 0))
    assert np.allclose(pts[-1], (0, 0, 3.0))
    assert np.all(np.diff(pts[:, 2]) > 0)  # ground first, strictly rising


def test_discretize_step_equal_to_height():
    ray = Ray(origin=np.array([0, 0, 3.0]), direction=np.array([0, 0, -1.0]))
    pts = discretize_ray(ray, 3.0)
    assert len(pts) == 2


def test_discretize_oblique_ray_collinear():
    d = np.array([3.0, 0, -4.0]) / 5.0
    ray = Ray(origin=np.array([0, 0, 4.0]), direction=d)
    pts = discretize_ray(ray, 0.25)
    rel = pts - ray.origin
    cross = np.cross(rel, d)
    assert np.max(np.abs(cross)) < 1e-9


def test_discretize_rejects_upward_ray():
    up = Ray(origin=np.array([0, 0, 3.0]), direction=np.array([0, 0, 1.0]))
    with pytest.raises(NoGroundIntersection):
        discretize_ray(up, 0.03)


@settings(max_examples=40, deadline=None)
@given(calib=calib_strategy, u=st.tuples(st.floats(300, 1600), st.floats(560, 1060)),
       step=st.floats(0.05, 1.0))
def test_discretize_spacing_and_count_formula(calib, u, step):
    ray = backproject_ray(u, calib)
    try:
        pts = discretize_ray(ray, step)
    except NoGroundIntersection:
        return
    # spacing is exactly the step, count matches floor(dist/step) + 1
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert np.allclose(gaps, step, atol=1e-9)
    dist = np.linalg.norm(pts[0] - ray.origin)
    assert len(pts) == int(math.floor(dist / step + 1e-9)) + 1
    assert np.all(pts[:, 2] >= -1e-12)
    assert np.all(np.diff(pts[:, 2]) > 0)


def test_calibration_invariants_enforced():
    bad_r = np.eye(3)
    bad_r = bad_r * 2.0
    with pytest.raises(InvalidCalibration):
        CameraCalibration(intrinsics=np.eye(3), rotation=bad_r, translation=np.zeros(3))
    mirror = np.diag([1.0, 1.0, -1.0])  # det -1
    with pytest.raises(InvalidCalibration):
        CameraCalibration(intrinsics=np.eye(3), rotation=mirror, translation=np.zeros(3))
    bad_k = np.array([[-100.0, 0, 0], [0, 100.0, 0], [0, 0, 1]])
    with pytest.raises(InvalidCalibration):
        CameraCalibration(intrinsics=bad_k, rotation=np.eye(3), translation=np.zeros(3))


def test_pitch_contains():
    pitch = PitchGeometry(length=100, width=60)
    assert pitch.contains(50, 30)
    assert not pitch.contains(50.01, 0)
    assert not pitch.contains(0, -30.5)
    with pytest.raises(ValueError):
        PitchGeometry(length=0, width=60)
