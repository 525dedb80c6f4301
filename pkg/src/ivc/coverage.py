"""Per-vertex observation time from gaze rays and its heatmap rendering.

Each gaze sample casts a small fan of rays around the gaze direction (the
viewport-forward direction when no eye tracker feeds the session). Every hit
deposits its share of the frame time onto the hit triangle's vertices with
barycentric weights, so dwell interpolates smoothly when rendered and the
per-frame deposit never exceeds the frame's dt.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import RayIndex, intersect_batch
from .errors import InvalidDirection, InvalidSaturation
from .surface import Mesh

#: rays per gaze sample form an N x N fan
DEFAULT_GRID = 5
#: the fan spans +- this angle per grid axis
DEFAULT_CONE_HALF_ANGLE_DEG = 10.0
#: dwell at which the heatmap saturates to red
DEFAULT_T_SAT_S = 2.0
#: dwell threshold for counting a vertex as covered
DEFAULT_TAU_S = 0.1

_UNIT_TOLERANCE = 1e-6


@dataclass
class GazeSample:
    """One frame of gaze: eye position, view ray, and the frame duration."""

    origin: np.ndarray
    direction: np.ndarray
    dt: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(self.direction) - 1.0) > _UNIT_TOLERANCE:
            raise InvalidDirection(f"gaze direction {self.direction.tolist()} not unit length")
        if self.dt < 0:
            raise ValueError(f"dt must be >= 0, got {self.dt}")


class CoverageMap:
    """Accumulated dwell seconds per mesh vertex, plus fixed area weights."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.dwell_s = np.zeros(len(mesh.vertices))
        self.total_session_s = 0.0
        areas = mesh.triangle_areas()
        weights = np.zeros(len(mesh.vertices))
        for k in range(3):
            np.add.at(weights, mesh.triangles[:, k], areas / 3.0)
        self.vertex_area_mm2 = weights


def _gaze_basis(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal pair perpendicular to the gaze direction."""
    ref = np.array([0.0, 0.0, 1.0]) if abs(direction[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(direction, ref)
    u /= np.linalg.norm(u)
    v = np.cross(direction, u)
    return u, v


def gaze_ray_fan(
    direction: np.ndarray,
    grid: int = DEFAULT_GRID,
    cone_half_angle_deg: float = DEFAULT_CONE_HALF_ANGLE_DEG,
) -> np.ndarray:
    """(grid*grid, 3) unit directions spanning +-cone_half_angle per axis."""
    u, v = _gaze_basis(direction)
    spread = np.tan(np.radians(cone_half_angle_deg))
    offsets = np.linspace(-1.0, 1.0, grid) if grid > 1 else np.zeros(1)
    rays = np.empty((grid * grid, 3))
    k = 0
    for a in offsets:
        for b in offsets:
            d = direction + spread * (a * u + b * v)
            rays[k] = d / np.linalg.norm(d)
            k += 1
    return rays


def accumulate(
    cm: CoverageMap,
    idx: RayIndex,
    g: GazeSample,
    grid: int = DEFAULT_GRID,
    cone_half_angle_deg: float = DEFAULT_CONE_HALF_ANGLE_DEG,
) -> int:
    """Cast the gaze fan and deposit dwell time; returns the hit count.

    Misses contribute nothing, but the frame's dt always advances
    total_session_s, so the conservation inequality sum(dwell) <=
    total_session_s holds with equality exactly on all-hit frames.
    """
    rays = gaze_ray_fan(g.direction, grid, cone_half_angle_deg)
    n = len(rays)
    origins = np.broadcast_to(g.origin, (n, 3))
    tri, _, u, v = intersect_batch(idx, np.ascontiguousarray(origins), rays)
    hits = tri >= 0
    share = g.dt / n
    triangles = cm.mesh.triangles
    # Deposits applied in ray-grid order keep replay bit-identical.
    for j in np.nonzero(hits)[0]:
        i0, i1, i2 = triangles[tri[j]]
        uj = min(max(u[j], 0.0), 1.0)
        vj = min(max(v[j], 0.0), 1.0)
        w = max(0.0, 1.0 - uj - vj)
        cm.dwell_s[i0] += share * w
        cm.dwell_s[i1] += share * uj
        cm.dwell_s[i2] += share * vj
    cm.total_session_s += g.dt
    return int(hits.sum())


def heatmap_colors(cm: CoverageMap, t_sat: float = DEFAULT_T_SAT_S) -> np.ndarray:
    """Per-vertex RGB (uint8): blue at zero dwell, green at t_sat/2, red at t_sat.

    Raises:
        InvalidSaturation: t_sat <= 0.
    """
    if t_sat <= 0:
        raise InvalidSaturation(f"t_sat must be > 0, got {t_sat}")
    u = np.minimum(cm.dwell_s / t_sat, 1.0)
    rgb = np.zeros((len(u), 3))
    low = u <= 0.5
    rgb[low, 1] = 2.0 * u[low]
    rgb[low, 2] = 1.0 - 2.0 * u[low]
    rgb[~low, 0] = 2.0 * u[~low] - 1.0
    rgb[~low, 1] = 2.0 - 2.0 * u[~low]
    return np.rint(rgb * 255.0).astype(np.uint8)


def coverage_fraction(cm: CoverageMap, tau: float = DEFAULT_TAU_S) -> float:
    """Area-weighted share of the wall with dwell >= tau."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    total = cm.vertex_area_mm2.sum()
    covered = cm.vertex_area_mm2[cm.dwell_s >= tau].sum()
    return float(covered / total)


def heatmap_bytes(cm: CoverageMap, t_sat: float = DEFAULT_T_SAT_S) -> bytes:
    """Raw RGB byte triples, vertex order, for the wire protocol."""
    return heatmap_colors(cm, t_sat).tobytes()


def coverage_to_csv(cm: CoverageMap) -> str:
    buf = io.StringIO()
    buf.write("vertex_id,dwell_s\n")
    for i, d in enumerate(cm.dwell_s):
        buf.write(f"{i},{d:.9f}\n")
    return buf.getvalue()


def coverage_summary(cm: CoverageMap, tau: float = DEFAULT_TAU_S, t_sat: float = DEFAULT_T_SAT_S) -> dict:
    return {
        "total_session_s": cm.total_session_s,
        "coverage_fraction": coverage_fraction(cm, tau),
        "tau": tau,
        "t_sat": t_sat,
    }


def save_coverage(cm: CoverageMap, csv_path: str | Path, summary_path: str | Path,
                  tau: float = DEFAULT_TAU_S, t_sat: float = DEFAULT_T_SAT_S) -> None:
    Path(csv_path).write_text(coverage_to_csv(cm), encoding="utf-8")
    Path(summary_path).write_text(
        json.dumps(coverage_summary(cm, tau, t_sat), indent=2) + "\n", encoding="utf-8"
    )
