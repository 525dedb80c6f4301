"""
Mid-line extraction and the fly-through controller
==================================================

Computes the medial path the reading session follows, then drives the
camera along it: five velocity levels, tangent-following motion, the
look-back rule that inverts travel direction, and ray teleports.
"""

import numpy as np

import ivc
from ivc.navigation import NavState, apply_head_pose, set_velocity_level, step, teleport

# An S-shaped colon this time; radius 8 mm keeps the bends cleanly swept.
spec = ivc.PhantomSpec(preset="s_curve", length_mm=180.0, radius_mm=8.0, spacing_mm=1.0)
phantom = ivc.generate(spec)

mask = ivc.segment_lumen(phantom.volume, phantom.seed_start)
field = ivc.distance_transform(mask)
print(f"distance field: max inscribed radius {field.max():.2f} mm")

# Dijkstra over the lumen voxels with a quadratic wall penalty, then smooth
# and resample at exact 1 mm stations.
line = ivc.extract_centerline(mask, field, phantom.seed_start, phantom.seed_end)
rms, worst = ivc.centerline_error(line, phantom.curve)
print(f"centerline: {len(line)} samples over {line.total_length:.0f} mm, "
      f"rms {rms:.2f} mm / max {worst:.2f} mm off the true sweep curve")

mesh = ivc.extract_isosurface(mask, phantom.volume)
index = ivc.build_ray_index(mesh)

# --- fly forward at level 3 (20 mm/s) for two seconds ------------------------
nav = NavState(s_mm=0.0, facing=line.tangent_at(0.0))
set_velocity_level(nav, 3)
for _ in range(144):  # 2 s of 72 Hz ticks
    step(nav, line, 1 / 72)
print(f"after 2 s at level 3: s = {nav.s_mm:.1f} mm, "
      f"visited {100 * line.visited_fraction():.0f}% of the path")

# --- look back: motion inverts, the spec'd way to return ----------------------
apply_head_pose(nav, nav.eye_position(line), -line.tangent_at(nav.s_mm), line)
for _ in range(72):
    step(nav, line, 1 / 72)
print(f"after 1 s looking back: s = {nav.s_mm:.1f} mm (travel direction inverted)")

# --- teleport by pointing down the tube at a visible wall patch ---------------
origin = line.point_at(nav.s_mm)
target = line.point_at(min(nav.s_mm + 25.0, line.total_length))
direction = target + np.array([0.0, 0.0, 6.0]) - origin  # aim above the path ahead
direction /= np.linalg.norm(direction)
hit = teleport(nav, line, index, origin, direction)
if hit is not None:
    print(f"teleport: ray hit the wall at {hit.point.round(1).tolist()}, "
          f"landed at s = {nav.s_mm:.1f} mm on the mid-line")

# Head offsets stay inside the lumen: try to lean 30 mm sideways.
eye = line.point_at(nav.s_mm) + np.array([0.0, 30.0, 0.0])
apply_head_pose(nav, eye, line.tangent_at(nav.s_mm), line)
print(f"leaning 30 mm sideways clamps to {np.linalg.norm(nav.head_offset_mm):.1f} mm "
      f"(80% of the {line.radius_at(nav.s_mm):.1f} mm local radius)")
