"""Synthetic ground-truth colons for testing and calibration.

A phantom is a flat-capped tube of air swept along a known curve inside a
solid body block, optionally deformed by hemispherical polyp bumps that
protrude into the lumen. The sweep curve doubles as the analytic centerline
oracle, and each polyp's apex and base diameter are reported exactly, so
every downstream stage (segmentation, meshing, centerline, measurement) can
be scored against closed-form truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import UnresolvablePolyp
from .volume import Volume

AIR_HU = -1000
BODY_HU = 40

S_CURVE_AMPLITUDE_MM = 60.0
S_CURVE_PERIOD_MM = 150.0

#: body voxels guaranteed between the lumen and every grid face
BOUNDARY_MARGIN_VOXELS = 2


@dataclass(frozen=True)
class PolypSpec:
    """A hemispherical sessile bump: ball of ``radius_mm`` centered on the wall."""

    s_mm: float
    azimuth_deg: float
    radius_mm: float


@dataclass(frozen=True)
class PhantomSpec:
    preset: str = "straight"  # "straight" | "s_curve"
    length_mm: float = 200.0
    radius_mm: float = 12.5
    spacing_mm: float = 1.0
    polyps: tuple[PolypSpec, ...] = ()

    def __post_init__(self):
        if self.preset not in ("straight", "s_curve"):
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.length_mm <= 0 or self.radius_mm <= 0 or self.spacing_mm <= 0:
            raise ValueError("length, radius, and spacing must be positive")
        for p in self.polyps:
            if p.radius_mm >= self.radius_mm:
                raise ValueError(
                    f"polyp radius {p.radius_mm} must be smaller than tube radius {self.radius_mm}"
                )
            if not 0.0 <= p.s_mm <= self.length_mm:
                raise ValueError(f"polyp station {p.s_mm} outside [0, {self.length_mm}]")


class AnalyticCurve:
    """Arc-length parameterized sweep curve, densely sampled for queries.

    The dense polyline step is 0.05 mm, which keeps interpolation and
    nearest-point errors around 1e-5 mm for the curvatures used here --
    far below every tolerance in the test suite.
    """

    STEP_MM = 0.05

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=np.float64)
        seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
        self.points = points
        self.cum_s = np.concatenate([[0.0], np.cumsum(seg)])
        self.total_length = float(self.cum_s[-1])
        self._tree: cKDTree | None = None

    def point_at(self, s) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.total_length)
        x = np.interp(s, self.cum_s, self.points[:, 0])
        y = np.interp(s, self.cum_s, self.points[:, 1])
        z = np.interp(s, self.cum_s, self.points[:, 2])
        return np.stack([x, y, z], axis=-1)

    def tangent_at(self, s) -> np.ndarray:
        s = float(np.clip(s, 0.0, self.total_length))
        h = 0.5
        lo, hi = max(0.0, s - h), min(self.total_length, s + h)
        d = self.point_at(hi) - self.point_at(lo)
        return d / np.linalg.norm(d)

    def distance_to(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Distance from each query point to the curve, plus the foot's arc length.

        KD-tree lookup on the dense samples, refined by projecting onto the
        two segments adjacent to the nearest sample.
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self._tree is None:
            self._tree = cKDTree(self.points)
        _, nearest = self._tree.query(points)
        best_d2 = np.full(len(points), np.inf)
        best_s = np.zeros(len(points))
        n_pts = len(self.points)
        for lo_off in (-1, 0):
            a_idx = np.clip(nearest + lo_off, 0, n_pts - 2)
            a = self.points[a_idx]
            b = self.points[a_idx + 1]
            ab = b - a
            denom = np.einsum("ij,ij->i", ab, ab)
            t = np.einsum("ij,ij->i", points - a, ab) / np.maximum(denom, 1e-30)
            t = np.clip(t, 0.0, 1.0)
            foot = a + t[:, None] * ab
            d2 = np.einsum("ij,ij->i", points - foot, points - foot)
            better = d2 < best_d2
            best_d2 = np.where(better, d2, best_d2)
            s_here = self.cum_s[a_idx] + t * np.sqrt(denom)
            best_s = np.where(better, s_here, best_s)
        return np.sqrt(best_d2), best_s


@dataclass(frozen=True)
class PolypGroundTruth:
    apex_mm: np.ndarray
    base_diameter_mm: float
    s_mm: float
    wall_point_mm: np.ndarray  # center of the polyp ball, on the undeformed wall
    inward_mm: np.ndarray  # unit vector from wall point toward the tube axis


@dataclass(frozen=True)
class Phantom:
    volume: Volume
    curve: AnalyticCurve
    polyps: tuple[PolypGroundTruth, ...]
    spec: PhantomSpec

    def _seed_inset(self) -> float:
        # 1.5 voxels in from the cap keeps the rounded seed voxel strictly
        # inside the lumen (voxel-center snap can move a point by up to half
        # a voxel diagonal, ~0.87 spacing).
        return min(1.5 * self.spec.spacing_mm, 0.25 * self.curve.total_length)

    @property
    def seed_start(self) -> np.ndarray:
        return self.curve.point_at(self._seed_inset())

    @property
    def seed_end(self) -> np.ndarray:
        return self.curve.point_at(self.curve.total_length - self._seed_inset())


def _sweep_curve(spec: PhantomSpec) -> AnalyticCurve:
    step = AnalyticCurve.STEP_MM
    if spec.preset == "straight":
        n = int(math.ceil(spec.length_mm / step)) + 1
        s = np.linspace(0.0, spec.length_mm, n)
        pts = np.stack([s, np.zeros(n), np.zeros(n)], axis=1)
        return AnalyticCurve(pts)
    # s_curve: planar sine y = A sin(2*pi*x/T); find the x extent whose arc
    # length equals length_mm, then sample uniformly in x (the curve object
    # re-parameterizes by arc length internally).
    a, t = S_CURVE_AMPLITUDE_MM, S_CURVE_PERIOD_MM
    x_fine = np.arange(0.0, 4.0 * spec.length_mm, step / 4.0)
    y_fine = a * np.sin(2.0 * np.pi * x_fine / t)
    seg = np.hypot(np.diff(x_fine), np.diff(y_fine))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] < spec.length_mm:
        raise ValueError("internal: sine table too short for requested length")
    x_end = float(np.interp(spec.length_mm, arc, x_fine))
    n = int(math.ceil(x_end / (step / 2.0))) + 1
    x = np.linspace(0.0, x_end, n)
    pts = np.stack([x, a * np.sin(2.0 * np.pi * x / t), np.zeros(n)], axis=1)
    return AnalyticCurve(pts)


def _polyp_frame(curve: AnalyticCurve, s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tangent / in-plane normal / binormal at station s (planar presets)."""
    t = curve.tangent_at(s)
    n = np.array([-t[1], t[0], 0.0])
    n /= np.linalg.norm(n)
    b = np.cross(t, n)
    return t, n, b


def generate(spec: PhantomSpec) -> Phantom:
    """Voxelize the phantom and return it with its analytic ground truth.

    Raises:
        UnresolvablePolyp: spacing too coarse to put 4 voxels across the
            smallest polyp's base diameter.
    """
    for p in spec.polyps:
        if 2.0 * p.radius_mm / spec.spacing_mm < 4.0:
            raise UnresolvablePolyp(
                f"polyp diameter {2 * p.radius_mm} mm spans fewer than 4 voxels "
                f"at {spec.spacing_mm} mm spacing"
            )

    curve = _sweep_curve(spec)
    sp = spec.spacing_mm
    pad = spec.radius_mm + BOUNDARY_MARGIN_VOXELS * sp
    lo = curve.points.min(axis=0) - pad
    hi = curve.points.max(axis=0) + pad
    # Snap the origin to the spacing lattice so the curve's own coordinates
    # land on voxel centers where possible (keeps the axis row on-grid).
    origin = np.floor(lo / sp) * sp
    dims = np.ceil((hi - origin) / sp).astype(np.int64) + 1

    xs = origin[0] + sp * np.arange(dims[0])
    ys = origin[1] + sp * np.arange(dims[1])
    zs = origin[2] + sp * np.arange(dims[2])
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    centers = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    dist, s_foot = curve.distance_to(centers)
    inside = dist <= spec.radius_mm
    # Flat caps: clip with the tangent half-planes at both ends.
    t0 = curve.tangent_at(0.0)
    t1 = curve.tangent_at(curve.total_length)
    c0 = curve.point_at(0.0)
    c1 = curve.point_at(curve.total_length)
    inside &= (centers - c0) @ t0 >= 0.0
    inside &= (centers - c1) @ t1 <= 0.0

    hu = np.full(len(centers), BODY_HU, dtype=np.int16)
    hu[inside] = AIR_HU

    truths = []
    for p in spec.polyps:
        _, n, b = _polyp_frame(curve, p.s_mm)
        theta = math.radians(p.azimuth_deg)
        d = math.cos(theta) * n + math.sin(theta) * b
        wall = curve.point_at(p.s_mm) + spec.radius_mm * d
        ball = np.einsum("ij,ij->i", centers - wall, centers - wall) <= p.radius_mm**2
        hu[ball] = BODY_HU
        truths.append(
            PolypGroundTruth(
                apex_mm=wall - p.radius_mm * d,
                base_diameter_mm=2.0 * p.radius_mm,
                s_mm=p.s_mm,
                wall_point_mm=wall,
                inward_mm=-d,
            )
        )

    volume = Volume(
        data=hu.reshape(tuple(dims)),
        spacing_mm=np.full(3, sp),
        origin_mm=origin,
    )
    return Phantom(volume=volume, curve=curve, polyps=tuple(truths), spec=spec)


def centerline_error(computed, curve: AnalyticCurve) -> tuple[float, float]:
    """(rms_mm, max_mm) of computed centerline samples against the true curve.

    ``computed`` is anything with a ``samples`` (N,3) attribute, or a bare
    (N,3) array.
    """
    samples = getattr(computed, "samples", computed)
    d, _ = curve.distance_to(np.asarray(samples, dtype=np.float64))
    return float(np.sqrt(np.mean(d**2))), float(d.max())


def write_ground_truth(phantom: Phantom, path: str | Path, centerline_step_mm: float = 1.0) -> None:
    """Dump the analytic centerline and polyp truth as JSON next to the volume."""
    s = np.arange(0.0, phantom.curve.total_length + 1e-9, centerline_step_mm)
    pts = phantom.curve.point_at(s)
    payload = {
        "length_mm": phantom.curve.total_length,
        "radius_mm": phantom.spec.radius_mm,
        "spacing_mm": phantom.spec.spacing_mm,
        "preset": phantom.spec.preset,
        "seed_start": phantom.seed_start.tolist(),
        "seed_end": phantom.seed_end.tolist(),
        "centerline": [[float(si), *map(float, p)] for si, p in zip(s, pts)],
        "polyps": [
            {
                "apex": t.apex_mm.tolist(),
                "base_diameter_mm": t.base_diameter_mm,
                "s_mm": t.s_mm,
                "wall_point": t.wall_point_mm.tolist(),
                "inward": t.inward_mm.tolist(),
            }
            for t in phantom.polyps
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_ground_truth(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
