"""Bookmarks with anomaly classification and two-point 3D measurement.

Bookmarks and measurements are identified by strictly increasing integer
ids and kept in creation order; the session engine is the only writer.
Measurement is a straight 3D chord between two wall hits, not a geodesic
and not an in-plane projection.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bvh import RayIndex, ray_intersect
from .centerline import Centerline
from .errors import RayMiss, StaleBookmark
from .navigation import NavState


class AnomalyClass(Enum):
    """Polyp taxonomy used to categorize bookmarked findings."""

    ADENOMATOUS = "Adenomatous"
    SERRATED = "Serrated"
    HYPERPLASTIC = "Hyperplastic"
    INFLAMMATORY = "Inflammatory"
    VILLOUS_ADENOMA = "VillousAdenoma"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class Bookmark:
    id: int
    surface_point: np.ndarray
    s_mm: float
    anomaly_class: AnomalyClass
    note: str
    created_at: float  # session seconds


@dataclass(frozen=True)
class Measurement:
    id: int
    point_a: np.ndarray
    point_b: np.ndarray
    distance_mm: float


class AnnotationStore:
    """Append-only lists of bookmarks and measurements with id counters."""

    def __init__(self):
        self.bookmarks: list[Bookmark] = []
        self.measurements: list[Measurement] = []
        self._next_bookmark_id = 1
        self._next_measurement_id = 1

    def add_bookmark(
        self,
        idx: RayIndex,
        c: Centerline,
        origin,
        direction,
        anomaly_class: AnomalyClass = AnomalyClass.UNCLASSIFIED,
        note: str = "",
        created_at: float = 0.0,
    ) -> Bookmark:
        """Bookmark the wall point the ray hits.

        Raises:
            RayMiss: the ray does not intersect the mesh.
        """
        hit = ray_intersect(idx, origin, direction)
        if hit is None:
            raise RayMiss("bookmark ray missed the mesh")
        s, _ = c.nearest_point(hit.point)
        bookmark = Bookmark(
            id=self._next_bookmark_id,
            surface_point=hit.point,
            s_mm=s,
            anomaly_class=anomaly_class,
            note=note,
            created_at=created_at,
        )
        self._next_bookmark_id += 1
        self.bookmarks.append(bookmark)
        return bookmark

    def find_bookmark(self, bookmark_id: int) -> Bookmark:
        for b in self.bookmarks:
            if b.id == bookmark_id:
                return b
        raise StaleBookmark(f"no bookmark with id {bookmark_id}")

    def measure(self, idx: RayIndex, ray_a, ray_b) -> Measurement:
        """Euclidean distance between the hit points of two rays.

        Each ray is an (origin, direction) pair. Raises RayMiss naming the
        ray ('a' or 'b') that failed to hit.
        """
        hit_a = ray_intersect(idx, *ray_a)
        if hit_a is None:
            raise RayMiss("measurement ray 'a' missed the mesh", which="a")
        hit_b = ray_intersect(idx, *ray_b)
        if hit_b is None:
            raise RayMiss("measurement ray 'b' missed the mesh", which="b")
        m = Measurement(
            id=self._next_measurement_id,
            point_a=hit_a.point,
            point_b=hit_b.point,
            distance_mm=float(np.linalg.norm(hit_a.point - hit_b.point)),
        )
        self._next_measurement_id += 1
        self.measurements.append(m)
        return m


def goto_bookmark(nav: NavState, c: Centerline, b: Bookmark) -> NavState:
    """Teleport to a bookmark's mid-line station (same semantics as teleport).

    Raises:
        StaleBookmark: the stored arc length is outside this centerline.
    """
    if not 0.0 <= b.s_mm <= c.total_length:
        raise StaleBookmark(
            f"bookmark s={b.s_mm} mm outside centerline length {c.total_length} mm"
        )
    nav.s_mm = float(b.s_mm)
    nav.head_offset_mm = np.zeros(3)
    return nav


def bookmarks_to_csv(store: AnnotationStore) -> str:
    buf = io.StringIO()
    buf.write("id,s_mm,x,y,z,class,note\n")
    for b in store.bookmarks:
        p = b.surface_point
        note = b.note.replace('"', "'")
        buf.write(
            f'{b.id},{b.s_mm:.6f},{p[0]:.6f},{p[1]:.6f},{p[2]:.6f},{b.anomaly_class.value},"{note}"\n'
        )
    return buf.getvalue()


def measurements_to_csv(store: AnnotationStore) -> str:
    buf = io.StringIO()
    buf.write("id,ax,ay,az,bx,by,bz,distance_mm\n")
    for m in store.measurements:
        a, b = m.point_a, m.point_b
        buf.write(
            f"{m.id},{a[0]:.6f},{a[1]:.6f},{a[2]:.6f},"
            f"{b[0]:.6f},{b[1]:.6f},{b[2]:.6f},{m.distance_mm:.9f}\n"
        )
    return buf.getvalue()
