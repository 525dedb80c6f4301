"""Mid-line path extraction and queries.

The navigable path is computed in three stages: an exact Euclidean distance
transform of the lumen mask, a shortest voxel path between the two seeds
under wall-penalized edge costs, and a smooth + resample pass that yields an
arc-length parameterized polyline with 1 mm stations.

Edge cost from voxel u to voxel v is ``step_mm * (D_max / D(v))**2``: the
quadratic wall penalty keeps the optimum pinned to the medial axis instead
of cutting corners on tight flexures.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import (
    AllForeground,
    EmptyMask,
    OutOfRange,
    SeedOutsideLumen,
    SeedsCoincident,
    SeedsNotConnected,
)
from .volume import LumenMask, world_to_voxel, voxel_to_world, _trilinear

RESAMPLE_STEP_MM = 1.0
SMOOTH_WINDOW = 5
SMOOTH_ITERATIONS = 3
TANGENT_HALF_WINDOW_MM = 2.0


@dataclass(frozen=True)
class DistanceField:
    """Exact Euclidean distance (mm) from each lumen voxel center to the
    nearest non-lumen voxel center; zero on non-lumen voxels."""

    values: np.ndarray
    spacing_mm: np.ndarray
    origin_mm: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    def max(self) -> float:
        return float(self.values.max())


def distance_transform(mask: LumenMask) -> DistanceField:
    """Exact (non-chamfer) EDT of the mask in mm.

    Raises:
        EmptyMask: no foreground voxel.
        AllForeground: no background voxel to measure against.
    """
    bits = mask.bits
    if not bits.any():
        raise EmptyMask("distance transform needs at least one lumen voxel")
    if bits.all():
        raise AllForeground("distance transform needs at least one background voxel")
    values = ndimage.distance_transform_edt(bits, sampling=tuple(mask.spacing_mm))
    values = np.ascontiguousarray(values, dtype=np.float64)
    values.flags.writeable = False
    return DistanceField(values=values, spacing_mm=mask.spacing_mm, origin_mm=mask.origin_mm)


class Centerline:
    """Arc-length parameterized mid-line with per-sample inscribed radius.

    Samples sit at exact 1 mm stations (cum_length_mm[i] == i), index 0 at
    the start seed. ``visited`` flags are monotone: they are only ever set,
    never cleared, so coverage analysis can trust them across teleports.
    """

    def __init__(self, samples: np.ndarray, radius_mm: np.ndarray, visited: np.ndarray | None = None):
        samples = np.asarray(samples, dtype=np.float64)
        radius_mm = np.asarray(radius_mm, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != 3 or len(samples) < 2:
            raise ValueError("centerline needs at least two (x,y,z) samples")
        if len(radius_mm) != len(samples):
            raise ValueError("radius array length mismatch")
        if not np.all(radius_mm > 0):
            raise ValueError("inscribed radius must be positive at every sample")
        self.samples = samples
        self.cum_length_mm = RESAMPLE_STEP_MM * np.arange(len(samples), dtype=np.float64)
        self.radius_mm = radius_mm
        self.visited = (
            np.zeros(len(samples), dtype=bool) if visited is None else np.asarray(visited, dtype=bool).copy()
        )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def total_length(self) -> float:
        return float(self.cum_length_mm[-1])

    def _check_range(self, s: float) -> float:
        if not 0.0 <= s <= self.total_length:
            raise OutOfRange(f"arc length {s} outside [0, {self.total_length}]")
        return float(s)

    def _locate(self, s: float) -> tuple[int, float]:
        i = min(int(s // RESAMPLE_STEP_MM), len(self.samples) - 2)
        return i, s - self.cum_length_mm[i]

    def point_at(self, s: float) -> np.ndarray:
        s = self._check_range(s)
        i, f = self._locate(s)
        return self.samples[i] * (1.0 - f) + self.samples[i + 1] * f

    def radius_at(self, s: float) -> float:
        s = self._check_range(s)
        i, f = self._locate(s)
        return float(self.radius_mm[i] * (1.0 - f) + self.radius_mm[i + 1] * f)

    def tangent_at(self, s: float) -> np.ndarray:
        """Central-difference direction over +-2 mm, one-sided at the ends."""
        s = self._check_range(s)
        lo = max(0.0, s - TANGENT_HALF_WINDOW_MM)
        hi = min(self.total_length, s + TANGENT_HALF_WINDOW_MM)
        d = self.point_at(hi) - self.point_at(lo)
        n = np.linalg.norm(d)
        if n == 0.0:
            raise OutOfRange("degenerate tangent window")
        return d / n

    def nearest_point(self, p) -> tuple[float, np.ndarray]:
        """Closest polyline point (segment interiors included) to ``p``.

        Returns (arc length, point); exact ties go to the smaller arc length.
        """
        p = np.asarray(p, dtype=np.float64)
        a = self.samples[:-1]
        ab = self.samples[1:] - a
        denom = np.einsum("ij,ij->i", ab, ab)
        t = np.einsum("ij,ij->i", p - a, ab) / denom
        t = np.clip(t, 0.0, 1.0)
        foot = a + t[:, None] * ab
        d2 = np.einsum("ij,ij->i", p - foot, p - foot)
        i = int(np.argmin(d2))  # first minimum = smallest s on ties
        s = float(self.cum_length_mm[i] + t[i] * RESAMPLE_STEP_MM)
        return s, foot[i]

    def mark_visited(self, s_lo: float, s_hi: float) -> "Centerline":
        """Flag every station in [s_lo, s_hi]; flags never unset."""
        if not (0.0 <= s_lo <= s_hi <= self.total_length):
            raise OutOfRange(f"[{s_lo}, {s_hi}] outside [0, {self.total_length}]")
        self.visited |= (self.cum_length_mm >= s_lo) & (self.cum_length_mm <= s_hi)
        return self

    def visited_fraction(self) -> float:
        return float(self.visited.mean())


# --- extraction --------------------------------------------------------------

def _neighbor_offsets() -> np.ndarray:
    offs = [
        (dx, dy, dz)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
        if (dx, dy, dz) != (0, 0, 0)
    ]
    return np.array(offs, dtype=np.int64)


_OFFSETS_26 = _neighbor_offsets()


def _seed_voxel(mask: LumenMask, seed, name: str) -> tuple[int, int, int]:
    vox = np.rint(world_to_voxel(mask, seed)).astype(np.int64)
    dims = np.asarray(mask.dims)
    if np.any(vox < 0) or np.any(vox >= dims):
        raise SeedOutsideLumen(f"{name} seed {np.asarray(seed).tolist()} outside the grid")
    if not mask.bits[tuple(vox)]:
        raise SeedOutsideLumen(f"{name} seed {np.asarray(seed).tolist()} not on a lumen voxel")
    return tuple(vox)


def _shortest_voxel_path(mask: LumenMask, df: DistanceField, start, end) -> np.ndarray:
    """Min-cost 26-connected voxel path (as an (N,3) index array), start first."""
    bits = mask.bits
    dims = bits.shape
    node_id = np.full(dims, -1, dtype=np.int64)
    lumen_idx = np.argwhere(bits)
    node_id[bits] = np.arange(len(lumen_idx))

    d_max = df.max()
    spacing = mask.spacing_mm
    rows, cols, weights = [], [], []
    for off in _OFFSETS_26:
        src_lo = np.maximum(0, -off)
        src_hi = dims - np.maximum(0, off)
        src = tuple(slice(lo, hi) for lo, hi in zip(src_lo, src_hi))
        dst = tuple(slice(lo + o, hi + o) for lo, hi, o in zip(src_lo, src_hi, off))
        valid = bits[src] & bits[dst]
        u = node_id[src][valid]
        v = node_id[dst][valid]
        step_mm = float(np.linalg.norm(off * spacing))
        # Penalty uses the *target* voxel's clearance.
        penalty = (d_max / df.values[dst][valid]) ** 2
        rows.append(u)
        cols.append(v)
        weights.append(step_mm * penalty)
    n = len(lumen_idx)
    graph = sparse.coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()

    start_id = int(node_id[start])
    end_id = int(node_id[end])
    dist, pred = _csgraph_dijkstra(
        graph, directed=True, indices=start_id, return_predecessors=True
    )
    if not np.isfinite(dist[end_id]):
        raise SeedsNotConnected("no lumen path between the seeds")
    path = [end_id]
    while path[-1] != start_id:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return lumen_idx[np.array(path)]


def _smooth_polyline(points: np.ndarray) -> np.ndarray:
    """Moving-average smoothing with pinned endpoints."""
    pts = points.copy()
    for _ in range(SMOOTH_ITERATIONS):
        sm = ndimage.uniform_filter1d(pts, size=SMOOTH_WINDOW, axis=0, mode="nearest")
        sm[0] = points[0]
        sm[-1] = points[-1]
        pts = sm
    return pts


def _resample_polyline(points: np.ndarray, step: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    stations = np.arange(0.0, total + 1e-9, step)
    out = np.empty((len(stations), 3))
    for axis in range(3):
        out[:, axis] = np.interp(stations, cum, points[:, axis])
    return out


def extract_centerline(mask: LumenMask, df: DistanceField, seed_start, seed_end) -> Centerline:
    """Compute the mid-line from the start seed (rectum end) to the end seed.

    Raises:
        SeedOutsideLumen: a seed misses the lumen component.
        SeedsCoincident: seeds resolve to the same voxel, or the path is
            shorter than one resample step.
        SeedsNotConnected: seeds sit in disjoint lumen components.
    """
    start = _seed_voxel(mask, seed_start, "start")
    end = _seed_voxel(mask, seed_end, "end")
    if start == end:
        raise SeedsCoincident("start and end seeds resolve to the same voxel")

    voxel_path = _shortest_voxel_path(mask, df, start, end)
    world_path = voxel_to_world(mask, voxel_path.astype(np.float64))
    smoothed = _smooth_polyline(world_path)
    samples = _resample_polyline(smoothed, RESAMPLE_STEP_MM)
    if len(samples) < 2:
        raise SeedsCoincident("smoothed path shorter than one resample step")

    vox = (samples - df.origin_mm) / df.spacing_mm
    radius = np.array([_trilinear(df.values, v) for v in vox])
    nearest = np.rint(vox).astype(np.int64)
    if not np.all(radius > 0) or not mask.bits[tuple(nearest.T)].all():
        raise RuntimeError("internal: resampled centerline left the lumen")
    return Centerline(samples=samples, radius_mm=radius)


# --- CSV export/import --------------------------------------------------------

CSV_HEADER = "s_mm,x,y,z,radius_mm,visited"


def centerline_to_csv(c: Centerline) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for s, p, r, vis in zip(c.cum_length_mm, c.samples, c.radius_mm, c.visited):
        buf.write(f"{s:.6f},{p[0]:.9f},{p[1]:.9f},{p[2]:.9f},{r:.9f},{int(vis)}\n")
    return buf.getvalue()


def save_centerline_csv(c: Centerline, path: str | Path) -> None:
    Path(path).write_text(centerline_to_csv(c), encoding="utf-8")


def load_centerline_csv(path: str | Path) -> Centerline:
    rows = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return Centerline(samples=rows[:, 1:4], radius_mm=rows[:, 4], visited=rows[:, 5] > 0.5)
