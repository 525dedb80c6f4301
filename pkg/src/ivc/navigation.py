"""Fly-through controller: velocity ladder, tangent-following motion with
look-back inversion, bounded head offset, and ray teleport.

Motion sign comes from the dot of the stored facing with the local mid-line
tangent; looking back (negative dot) inverts travel. On the |dot| < 1e-9
knife edge the previous frame's sign is kept so the camera never jitters
between directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bvh import RayHit, RayIndex, ray_intersect
from .centerline import Centerline
from .errors import InvalidDirection, InvalidLevel

#: mm/s for velocity levels 0..4; level 0 parks the camera.
DEFAULT_SPEEDS_MM_S = (0.0, 5.0, 10.0, 20.0, 40.0)

#: eye must stay within this fraction of the local inscribed radius
HEAD_OFFSET_RADIUS_FRACTION = 0.8

_SIGN_EPSILON = 1e-9
_UNIT_TOLERANCE = 1e-6


@dataclass
class NavState:
    """Mutable camera state along a centerline; single-writer only."""

    s_mm: float = 0.0
    velocity_level: int = 0
    facing: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    head_offset_mm: np.ndarray = field(default_factory=lambda: np.zeros(3))
    speeds_mm_s: tuple[float, ...] = DEFAULT_SPEEDS_MM_S
    motion_sign: float = 1.0  # sign of the previous frame, kept on knife edges

    def eye_position(self, c: Centerline) -> np.ndarray:
        return c.point_at(self.s_mm) + self.head_offset_mm

    def speed(self) -> float:
        return self.speeds_mm_s[self.velocity_level]


def set_velocity_level(nav: NavState, level: int) -> NavState:
    """Select one of the five speeds.

    Raises:
        InvalidLevel: level outside {0..4}.
    """
    if not isinstance(level, (int, np.integer)) or not 0 <= level < len(nav.speeds_mm_s):
        raise InvalidLevel(f"velocity level {level!r} outside 0..{len(nav.speeds_mm_s) - 1}")
    nav.velocity_level = int(level)
    return nav


def _clamp_head_offset(nav: NavState, c: Centerline) -> None:
    limit = HEAD_OFFSET_RADIUS_FRACTION * c.radius_at(nav.s_mm)
    norm = float(np.linalg.norm(nav.head_offset_mm))
    if norm > limit:
        nav.head_offset_mm = nav.head_offset_mm * (limit / norm)


def step(nav: NavState, c: Centerline, dt: float) -> NavState:
    """Advance dt seconds along the mid-line tangent.

    The traversed interval is marked visited on the centerline; arc length
    clamps at both ends instead of erroring.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    tangent = c.tangent_at(nav.s_mm)
    dot = float(nav.facing @ tangent)
    if abs(dot) >= _SIGN_EPSILON:
        nav.motion_sign = 1.0 if dot > 0 else -1.0
    advance = nav.speed() * dt
    if advance == 0.0:
        return nav
    s_new = min(max(nav.s_mm + nav.motion_sign * advance, 0.0), c.total_length)
    if s_new != nav.s_mm:
        c.mark_visited(min(nav.s_mm, s_new), max(nav.s_mm, s_new))
        nav.s_mm = s_new
        _clamp_head_offset(nav, c)
    return nav


def apply_head_pose(nav: NavState, eye_world, facing, c: Centerline) -> NavState:
    """Record the operator's head pose; the offset is clamped into the lumen.

    Raises:
        InvalidDirection: facing not unit length.
    """
    facing = np.asarray(facing, dtype=np.float64)
    if abs(np.linalg.norm(facing) - 1.0) > _UNIT_TOLERANCE:
        raise InvalidDirection(f"facing {facing.tolist()} is not unit length")
    nav.facing = facing
    nav.head_offset_mm = np.asarray(eye_world, dtype=np.float64) - c.point_at(nav.s_mm)
    _clamp_head_offset(nav, c)
    return nav


def teleport(nav: NavState, c: Centerline, idx: RayIndex, origin, direction) -> RayHit | None:
    """Jump to the mid-line point nearest the first ray intersection.

    Returns the hit (None on a miss; misses leave the state untouched).
    Facing is preserved; the head offset resets so the camera lands on the
    mid-line itself.
    """
    hit = ray_intersect(idx, origin, direction)
    if hit is None:
        return None
    s, _ = c.nearest_point(hit.point)
    nav.s_mm = s
    nav.head_offset_mm = np.zeros(3)
    return hit
