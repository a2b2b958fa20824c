from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walkguide.errors import GeometryError, ValidationError
from walkguide.geometry import (
    CameraModel,
    DepthMap,
    GoalPoint,
    build_path_geometry,
    build_path_polyline,
    build_region_polygons,
    goal_along_direction,
    lateral_offset_px,
    lateral_offsets,
    sample_goal_point,
)
from walkguide.geometry.calibration import depth_scale_factor
from walkguide.geometry.io import load_depth, load_mask_png, read_depth_dims, save_depth, save_mask_png

from oracles import first_row_reaching


class TestTypes:
    def test_camera_rejects_bad_focal(self):
        with pytest.raises(ValidationError):
            CameraModel(fx_px=0, fy_px=1, cx_px=0, cy_px=0)

    def test_camera_default_height(self):
        assert CameraModel(1, 1, 0, 0).height_m == 0.8

    def test_depth_flags_invalid_pixels(self):
        d = DepthMap([[1.0, 0.0], [np.nan, -2.0]])
        assert d.valid.tolist() == [[True, False], [False, False]]
        assert math.isnan(d.at(1, 0))
        assert d.at(0, 0) == 1.0

    def test_goal_range(self):
        with pytest.raises(ValidationError):
            GoalPoint(1.2, 0.5)


class TestGoalSampling:
    def test_zero_angle_stays_on_centerline(self, camera640):
        depth = DepthMap(np.full((480, 640), 10.0))
        goal = goal_along_direction(depth, camera640, 0.0)
        assert goal.x_norm == 0.5

    def test_same_seed_same_goal(self, camera640, ramp_depth):
        a = sample_goal_point(ramp_depth, camera640, rng_seed=7)
        b = sample_goal_point(ramp_depth, camera640, rng_seed=7)
        assert a == b

    def test_ramp_row_matches_brute_force_scan(self, camera640, ramp_depth):
        goal = goal_along_direction(ramp_depth, camera640, 0.0, target_dist_m=10.0)
        expected_row = first_row_reaching(ramp_depth.values, 320, 10.0)
        assert expected_row == 239
        assert goal.y_norm * 479 == pytest.approx(expected_row)
        assert goal.depth_m >= 10.0

    def test_angle_bounds(self, camera640, ramp_depth):
        for seed in range(50):
            g = sample_goal_point(ramp_depth, camera640, seed)
            # on a pure vertical ramp the reached row is fixed; x spread ~ tan(45)
            dx = (g.x_norm - 0.5) * 639
            dy = (1.0 - g.y_norm) * 479
            assert abs(math.degrees(math.atan2(dx, dy))) <= 45.0 + 1e-6

    def test_no_valid_depth(self, camera640):
        depth = DepthMap(np.full((48, 64), np.nan))
        with pytest.raises(GeometryError) as exc:
            sample_goal_point(depth, camera640, 0)
        assert exc.value.code == "no-valid-depth"

    def test_flat_ground_fallback(self):
        cam = CameraModel(fx_px=100, fy_px=100, cx_px=31.5, cy_px=23.5)
        depth = DepthMap(np.full((48, 64), 4.0))  # wall at 4 m, never reaches 10 m
        g = goal_along_direction(depth, cam, 0.0)
        assert g.depth_m == 10.0
        # v = cy + fy * 0.8 / 10
        assert g.y_norm * 47 == pytest.approx(23.5 + 8.0)
        assert g.x_norm == pytest.approx(0.5)


class TestPolyline:
    depth = DepthMap(np.full((481, 641), 5.0))

    def test_vertical(self):
        pts = build_path_polyline((320, 480), (320, 240), self.depth, n_samples=3)
        assert [(p.x, p.y) for p in pts] == [(320, 480), (320, 360), (320, 240)]

    def test_two_samples_are_endpoints(self):
        pts = build_path_polyline((320, 480), (100, 20), self.depth, n_samples=2)
        assert [(p.x, p.y) for p in pts] == [(320, 480), (100, 20)]

    def test_diagonal_progression(self):
        pts = build_path_polyline((320, 480), (420, 280), self.depth, n_samples=5)
        assert [p.x for p in pts] == [320, 345, 370, 395, 420]
        assert [p.y for p in pts] == [480, 430, 380, 330, 280]
        assert all(p.depth_m == 5.0 for p in pts)

    def test_degenerate(self):
        with pytest.raises(GeometryError) as exc:
            build_path_polyline((320, 480), (320, 480), self.depth)
        assert exc.value.code == "degenerate-path"
        with pytest.raises(GeometryError):
            build_path_polyline((320, 480), (320, -5), self.depth)


class TestLateralOffsets:
    cam = CameraModel(fx_px=500, fy_px=500, cx_px=320, cy_px=240)

    def test_literal_factor_two(self):
        left, right = lateral_offsets((320, 100), 10.0, self.cam, half_width_m=2.0, image_width=640)
        assert left == (220, 100) and right == (420, 100)

    def test_one_meter_half_width(self):
        left, right = lateral_offsets((320, 50), 2.0, self.cam, half_width_m=1.0, image_width=640)
        assert left[0] == 70 and right[0] == 570

    def test_clamps_to_image(self):
        left, right = lateral_offsets((50, 10), 0.5, self.cam, half_width_m=1.0, image_width=640)
        assert left[0] == 0 and right[0] == 639

    def test_invalid_depth(self):
        with pytest.raises(GeometryError) as exc:
            lateral_offsets((1, 1), 0.0, self.cam)
        assert exc.value.code == "invalid-depth"

    @given(z=st.floats(0.1, 100), dz=st.floats(0.01, 50), fx=st.floats(10, 2000), hw=st.floats(0.1, 5))
    def test_monotone_in_depth(self, z, dz, fx, hw):
        assert lateral_offset_px(z + dz, fx, hw) < lateral_offset_px(z, fx, hw)

    @given(z=st.floats(0.1, 100), fx=st.floats(10, 2000), hw=st.floats(0.1, 5))
    def test_doubling_width_doubles_offset(self, z, fx, hw):
        assert lateral_offset_px(z, fx, 2 * hw) == pytest.approx(2 * lateral_offset_px(z, fx, hw), rel=1e-12)


class TestPolygons:
    def test_constant_offset_strip(self):
        poly = [(320.0, 479.0), (320.0, 0.0)]
        lefts = [(220.0, 479.0), (220.0, 0.0)]
        rights = [(420.0, 479.0), (420.0, 0.0)]
        polys = build_region_polygons(poly, lefts, rights, (640, 480))
        assert polys.path == [(220.0, 479.0), (220.0, 0.0), (420.0, 0.0), (420.0, 479.0)]
        assert polys.left == [(0.0, 0.0), (0.0, 479.0), (220.0, 479.0), (220.0, 0.0)]
        assert polys.right == [(639.0, 0.0), (639.0, 479.0), (420.0, 479.0), (420.0, 0.0)]

    def test_too_few_samples(self):
        with pytest.raises(GeometryError):
            build_region_polygons([(1, 1)], [(0, 1)], [(2, 1)], (10, 10))


class TestPathGeometry:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), z=st.floats(2.0, 30.0))
    def test_invariants(self, seed, z):
        rng = np.random.default_rng(seed)
        w, h = 96, 72
        base = np.linspace(z * 4, 1.0, h)[:, None] + rng.uniform(0, 0.5, size=(h, w))
        cam = CameraModel(fx_px=80, fy_px=80, cx_px=47.5, cy_px=35.5)
        depth = DepthMap(base)
        goal = sample_goal_point(depth, cam, seed, target_dist_m=z)
        try:
            geo = build_path_geometry(depth, cam, goal, n_samples=12)
        except GeometryError as e:
            assert e.code == "degenerate-path"
            return
        ys = [s.y for s in geo.polyline]
        assert all(a >= b for a, b in zip(ys, ys[1:]))
        for s, lp, rp in zip(geo.polyline, geo.left_points, geo.right_points):
            assert lp[0] <= s.x <= rp[0]
            assert lp[1] == rp[1] == s.y
            assert 0 <= lp[0] <= w - 1 and 0 <= rp[0] <= w - 1
        m = geo.masks
        assert m.overlap_count() == 0
        keep = depth.valid & (depth.values <= geo.cutoff_depth_m)
        assert not (m.union() & ~keep).any()
        for s in geo.polyline:
            r, c = math.floor(s.y + 0.5), math.floor(s.x + 0.5)
            if keep[r, c]:
                assert m.path[r, c]

    def test_path_array_bottom_to_top(self, camera640, ramp_depth):
        goal = goal_along_direction(ramp_depth, camera640, 10.0)
        geo = build_path_geometry(ramp_depth, camera640, goal, n_samples=5)
        arr = geo.path_array()
        assert arr[0] == (0.5, 1.0)
        assert len(arr) == 5
        assert [p[1] for p in arr] == sorted([p[1] for p in arr], reverse=True)

    def test_goal_without_depth_reads_map(self, camera640, ramp_depth):
        geo = build_path_geometry(ramp_depth, camera640, GoalPoint(0.5, 0.5))
        assert geo.goal.depth_m == pytest.approx(ramp_depth.at(319.5, 239.5))


class TestCalibration:
    def test_scale_recovers_known_height(self):
        # person 1.7 m tall spans 100 rows; with fy=500 the true depth is 8.5 m
        w = h = 201
        cam = CameraModel(fx_px=500, fy_px=500, cx_px=100, cy_px=100)
        depth = DepthMap(np.full((h, w), 4.25))

        class Obj:
            label = "person"
            bbox = (0.4, 0.25, 0.6, 0.25 + 99 / 200)

        assert depth_scale_factor(depth, cam, [Obj()]) == pytest.approx(2.0)

    def test_no_known_objects(self):
        depth = DepthMap(np.ones((4, 4)))
        assert depth_scale_factor(depth, CameraModel(1, 1, 0, 0), []) == 1.0


class TestDepthIO:
    @pytest.mark.parametrize("name", ["d.tiff", "d.npy", "d.raw"])
    def test_round_trip(self, tmp_path, name):
        arr = np.arange(12, dtype=np.float32).reshape(3, 4) + 0.5
        p = save_depth(arr, tmp_path / name)
        assert read_depth_dims(p) == (4, 3)
        np.testing.assert_array_equal(load_depth(p).values, arr)

    def test_raw_size_mismatch(self, tmp_path):
        p = save_depth(np.ones((3, 4), np.float32), tmp_path / "d.bin")
        np.ones(5, np.float32).tofile(p)
        with pytest.raises(ValidationError):
            load_depth(p)

    def test_mask_png(self, tmp_path):
        m = np.zeros((5, 6), bool)
        m[1:3, 2:5] = True
        p = save_mask_png(m, tmp_path / "m.png")
        np.testing.assert_array_equal(load_mask_png(p), m)
