import numpy as np
import pytest

from ivc.errors import InvalidDirection, InvalidLevel
from ivc.navigation import (
    DEFAULT_SPEEDS_MM_S,
    HEAD_OFFSET_RADIUS_FRACTION,
    NavState,
    apply_head_pose,
    set_velocity_level,
    step,
    teleport,
)


@pytest.fixture
def line(small_art):
    return small_art.fresh_centerline()


def forward_nav(line, s=0.0):
    nav = NavState(s_mm=s)
    nav.facing = line.tangent_at(s)
    return nav


class TestVelocity:
    def test_level_zero_is_parked(self, line):
        nav = forward_nav(line)
        set_velocity_level(nav, 0)
        step(nav, line, 1.0)
        assert nav.s_mm == 0.0

    def test_level_four_speed(self):
        nav = NavState()
        set_velocity_level(nav, 4)
        assert nav.speed() == 40.0

    def test_speed_table(self):
        assert DEFAULT_SPEEDS_MM_S == (0.0, 5.0, 10.0, 20.0, 40.0)

    def test_invalid_level(self):
        nav = NavState()
        with pytest.raises(InvalidLevel):
            set_velocity_level(nav, 5)
        with pytest.raises(InvalidLevel):
            set_velocity_level(nav, -1)


class TestStep:
    def test_forward_delta_exact(self, line):
        nav = forward_nav(line, s=10.0)
        set_velocity_level(nav, 3)  # 20 mm/s
        step(nav, line, 0.1)
        assert nav.s_mm == 10.0 + 20.0 * 0.1

    def test_backward_when_looking_back(self, line):
        nav = forward_nav(line, s=10.0)
        nav.facing = -line.tangent_at(10.0)
        set_velocity_level(nav, 3)
        step(nav, line, 0.1)
        assert nav.s_mm == 10.0 - 20.0 * 0.1

    def test_clamp_at_end(self, line):
        nav = forward_nav(line, s=line.total_length)
        set_velocity_level(nav, 4)
        step(nav, line, 1.0)
        assert nav.s_mm == line.total_length

    def test_clamp_at_start(self, line):
        nav = forward_nav(line, s=0.0)
        nav.facing = -line.tangent_at(0.0)
        set_velocity_level(nav, 4)
        step(nav, line, 1.0)
        assert nav.s_mm == 0.0

    def test_knife_edge_keeps_previous_sign(self, line):
        nav = forward_nav(line, s=10.0)
        set_velocity_level(nav, 2)
        step(nav, line, 0.1)  # establishes sign +1
        tangent = line.tangent_at(nav.s_mm)
        perp = np.cross(tangent, [0.0, 0.0, 1.0])
        perp /= np.linalg.norm(perp)
        nav.facing = perp  # dot exactly ~0
        s_before = nav.s_mm
        step(nav, line, 0.1)
        assert nav.s_mm > s_before  # kept moving forward

    def test_additive_in_time(self, line):
        nav1 = forward_nav(line, s=5.0)
        set_velocity_level(nav1, 2)
        step(nav1, line, 0.3)
        step(nav1, line, 0.7)
        nav2 = forward_nav(line, s=5.0)
        set_velocity_level(nav2, 2)
        step(nav2, line, 1.0)
        assert abs(nav1.s_mm - nav2.s_mm) <= 1e-9

    def test_marks_visited_interval(self, line):
        nav = forward_nav(line, s=0.0)
        set_velocity_level(nav, 4)
        step(nav, line, 0.5)  # 20 mm
        assert line.visited[:20].all()
        assert not line.visited[25:].any()

    def test_negative_dt_rejected(self, line):
        nav = forward_nav(line)
        with pytest.raises(ValueError):
            step(nav, line, -0.1)

    def test_full_traversal_visits_everything(self, line):
        nav = forward_nav(line, s=0.0)
        set_velocity_level(nav, 4)
        for _ in range(int(line.total_length / (40 / 72)) + 10):
            step(nav, line, 1 / 72)
        assert nav.s_mm == line.total_length
        assert line.visited_fraction() == 1.0


class TestHeadPose:
    def test_eye_on_centerline_zero_offset(self, line):
        nav = forward_nav(line, s=10.0)
        apply_head_pose(nav, line.point_at(10.0), line.tangent_at(10.0), line)
        assert np.allclose(nav.head_offset_mm, 0.0)

    def test_oversized_offset_clamped(self, line):
        nav = forward_nav(line, s=10.0)
        r = line.radius_at(10.0)
        eye = line.point_at(10.0) + np.array([0.0, 2.0 * r, 0.0])
        apply_head_pose(nav, eye, line.tangent_at(10.0), line)
        norm = np.linalg.norm(nav.head_offset_mm)
        assert norm == pytest.approx(HEAD_OFFSET_RADIUS_FRACTION * r, rel=1e-9)
        direction = nav.head_offset_mm / norm
        assert np.allclose(direction, (0.0, 1.0, 0.0))

    def test_facing_alone_changes_no_position(self, line):
        nav = forward_nav(line, s=10.0)
        eye_before = nav.eye_position(line).copy()
        apply_head_pose(nav, eye_before, -line.tangent_at(10.0), line)
        assert np.allclose(nav.eye_position(line), eye_before)

    def test_reversed_facing_flips_next_step(self, line):
        nav = forward_nav(line, s=10.0)
        set_velocity_level(nav, 2)
        apply_head_pose(nav, line.point_at(10.0), -line.tangent_at(10.0), line)
        step(nav, line, 0.1)
        assert nav.s_mm < 10.0

    def test_invalid_facing(self, line):
        nav = forward_nav(line)
        with pytest.raises(InvalidDirection):
            apply_head_pose(nav, line.point_at(0.0), np.array([1.0, 1.0, 0.0]), line)


class TestTeleport:
    def test_lands_at_nearest_midline_station(self, line, small_art):
        nav = forward_nav(line, s=0.0)
        origin = line.point_at(5.0)
        direction = np.array([0.0, 1.0, 0.0])  # straight at the side wall
        hit = teleport(nav, line, small_art.ray_index, origin, direction)
        assert hit is not None
        s_expected, _ = line.nearest_point(hit.point)
        assert nav.s_mm == s_expected
        assert np.allclose(nav.head_offset_mm, 0.0)

    def test_wall_hit_near_station(self, line, small_art):
        """Hitting the wall at axial position x teleports near arc length of x."""
        nav = forward_nav(line, s=0.0)
        origin = line.point_at(30.0)
        hit = teleport(nav, line, small_art.ray_index, origin, np.array([0.0, 1.0, 0.0]))
        assert hit is not None
        # straight tube: the radial ray from s=30 hits the wall at the same station
        assert abs(nav.s_mm - 30.0) <= 1.0

    def test_miss_is_noop(self, line, small_art):
        nav = forward_nav(line, s=7.0)
        nav.head_offset_mm = np.array([0.0, 1.0, 0.0])
        outside = np.array([0.0, 500.0, 0.0])
        hit = teleport(nav, line, small_art.ray_index, outside, np.array([0.0, 1.0, 0.0]))
        assert hit is None
        assert nav.s_mm == 7.0
        assert np.allclose(nav.head_offset_mm, (0.0, 1.0, 0.0))

    def test_idempotent(self, line, small_art):
        nav = forward_nav(line, s=0.0)
        origin = line.point_at(20.0)
        direction = np.array([0.0, 0.0, 1.0])
        teleport(nav, line, small_art.ray_index, origin, direction)
        s_first = nav.s_mm
        teleport(nav, line, small_art.ray_index, origin, direction)
        assert nav.s_mm == s_first

    def test_facing_preserved(self, line, small_art):
        nav = forward_nav(line, s=0.0)
        facing_before = nav.facing.copy()
        teleport(nav, line, small_art.ray_index, line.point_at(20.0), np.array([0.0, 1.0, 0.0]))
        assert np.array_equal(nav.facing, facing_before)


class TestEyeInsideInvariant:
    def test_random_event_storm(self, line, small_art, rng):
        nav = forward_nav(line, s=0.0)
        for _ in range(2000):
            action = rng.integers(0, 4)
            if action == 0:
                set_velocity_level(nav, int(rng.integers(0, 5)))
            elif action == 1:
                facing = rng.normal(size=3)
                facing /= np.linalg.norm(facing)
                eye = line.point_at(nav.s_mm) + rng.normal(scale=5.0, size=3)
                apply_head_pose(nav, eye, facing, line)
            elif action == 2:
                step(nav, line, float(rng.uniform(0, 0.1)))
            else:
                origin = line.point_at(float(rng.uniform(0, line.total_length)))
                direction = rng.normal(size=3)
                direction /= np.linalg.norm(direction)
                teleport(nav, line, small_art.ray_index, origin, direction)
            assert 0.0 <= nav.s_mm <= line.total_length
            limit = HEAD_OFFSET_RADIUS_FRACTION * line.radius_at(nav.s_mm)
            assert np.linalg.norm(nav.head_offset_mm) <= limit + 1e-9
