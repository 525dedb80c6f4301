import numpy as np
import pytest

from ivc.annotations import (
    AnnotationStore,
    AnomalyClass,
    bookmarks_to_csv,
    goto_bookmark,
    measurements_to_csv,
)
from ivc.bvh import build_ray_index
from ivc.errors import RayMiss, StaleBookmark
from ivc.navigation import NavState
from ivc.surface import Mesh


def axis_ray_to(point, origin):
    d = np.asarray(point, dtype=float) - origin
    return origin, d / np.linalg.norm(d)


def plane_pair_mesh():
    """Two tiny triangles whose first hits are exactly (0,0,0) and (3,4,0)."""
    vertices = np.array(
        [
            [-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 2.0, 0.0],  # contains origin
            [2.0, 3.0, 0.0], [4.0, 3.0, 0.0], [3.0, 6.0, 0.0],  # contains (3,4,0)
        ]
    )
    triangles = np.array([[0, 1, 2], [3, 4, 5]], dtype=np.int32)
    normals = np.tile([0.0, 0.0, 1.0], (6, 1))
    return Mesh(vertices=vertices, triangles=triangles, normals=normals)


class TestBookmarks:
    def test_polyp_apex_bookmark(self, polyp_tube, polyp_art):
        truth = polyp_tube.polyps[0]
        store = AnnotationStore()
        eye = polyp_art.centerline.point_at(
            min(truth.s_mm, polyp_art.centerline.total_length)
        )
        origin, direction = axis_ray_to(truth.apex_mm, eye)
        b = store.add_bookmark(
            polyp_art.ray_index,
            polyp_art.centerline,
            origin,
            direction,
            AnomalyClass.VILLOUS_ADENOMA,
            note="sessile candidate",
        )
        # the hit lands on the bump surface near the analytic apex, and its
        # stored station matches the apex's own station on this centerline
        assert np.linalg.norm(b.surface_point - truth.apex_mm) <= 2.0
        apex_s, _ = polyp_art.centerline.nearest_point(truth.apex_mm)
        assert abs(b.s_mm - apex_s) <= 2.0
        assert b.anomaly_class is AnomalyClass.VILLOUS_ADENOMA

    def test_miss_raises(self, small_art):
        store = AnnotationStore()
        with pytest.raises(RayMiss):
            store.add_bookmark(
                small_art.ray_index,
                small_art.centerline,
                np.array([0.0, 500.0, 0.0]),
                np.array([0.0, 1.0, 0.0]),
            )

    def test_ids_increase_in_creation_order(self, small_art):
        store = AnnotationStore()
        line = small_art.centerline
        for s in (10.0, 20.0, 30.0):
            store.add_bookmark(
                small_art.ray_index, line, line.point_at(s), np.array([0.0, 1.0, 0.0])
            )
        ids = [b.id for b in store.bookmarks]
        assert ids == sorted(ids)
        assert len(set(ids)) == 3
        assert [round(b.s_mm) for b in store.bookmarks] == [10, 20, 30]

    def test_bookmark_on_mesh(self, small_art):
        store = AnnotationStore()
        line = small_art.centerline
        b = store.add_bookmark(
            small_art.ray_index, line, line.point_at(15.0), np.array([0.0, 0.0, 1.0])
        )
        d = np.linalg.norm(small_art.mesh.vertices - b.surface_point, axis=1)
        assert d.min() < 0.5


class TestGoto:
    def test_exact_station_and_idempotent(self, small_art):
        store = AnnotationStore()
        line = small_art.centerline
        b = store.add_bookmark(
            small_art.ray_index, line, line.point_at(25.0), np.array([0.0, 1.0, 0.0])
        )
        nav = NavState(s_mm=0.0)
        goto_bookmark(nav, line, b)
        assert nav.s_mm == b.s_mm
        first = nav.s_mm
        goto_bookmark(nav, line, b)
        assert nav.s_mm == first
        assert np.allclose(nav.head_offset_mm, 0.0)

    def test_lands_near_wall_station(self, small_art):
        store = AnnotationStore()
        line = small_art.centerline
        b = store.add_bookmark(
            small_art.ray_index, line, line.point_at(25.0), np.array([0.0, 1.0, 0.0])
        )
        nav = NavState(s_mm=0.0)
        goto_bookmark(nav, line, b)
        eye = nav.eye_position(line)
        s_wall, _ = line.nearest_point(b.surface_point)
        assert np.linalg.norm(eye - line.point_at(s_wall)) <= 0.5 * line.radius_at(s_wall)

    def test_stale_bookmark(self, small_art):
        from ivc.annotations import Bookmark

        stale = Bookmark(
            id=99,
            surface_point=np.zeros(3),
            s_mm=small_art.centerline.total_length + 50.0,
            anomaly_class=AnomalyClass.UNCLASSIFIED,
            note="",
            created_at=0.0,
        )
        nav = NavState()
        with pytest.raises(StaleBookmark):
            goto_bookmark(nav, small_art.centerline, stale)


class TestMeasure:
    def test_three_four_five(self):
        mesh = plane_pair_mesh()
        idx = build_ray_index(mesh)
        store = AnnotationStore()
        ray_a = (np.array([0.0, 0.0, 5.0]), np.array([0.0, 0.0, -1.0]))
        ray_b = (np.array([3.0, 4.0, 5.0]), np.array([0.0, 0.0, -1.0]))
        m = store.measure(idx, ray_a, ray_b)
        assert m.distance_mm == pytest.approx(5.0, abs=1e-12)

    def test_same_point_zero(self):
        mesh = plane_pair_mesh()
        idx = build_ray_index(mesh)
        store = AnnotationStore()
        ray = (np.array([0.0, 0.0, 5.0]), np.array([0.0, 0.0, -1.0]))
        m = store.measure(idx, ray, ray)
        assert m.distance_mm == 0.0

    def test_symmetry_exact(self, small_art):
        store = AnnotationStore()
        line = small_art.centerline
        ray_a = (line.point_at(10.0), np.array([0.0, 1.0, 0.0]))
        ray_b = (line.point_at(40.0), np.array([0.0, 0.0, 1.0]))
        m_ab = store.measure(small_art.ray_index, ray_a, ray_b)
        m_ba = store.measure(small_art.ray_index, ray_b, ray_a)
        assert m_ab.distance_mm == m_ba.distance_mm

    def test_triangle_inequality(self, small_art, rng):
        store = AnnotationStore()
        line = small_art.centerline
        rays = []
        for _ in range(3):
            s = float(rng.uniform(5, line.total_length - 5))
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            rays.append((line.point_at(s), d))
        try:
            ab = store.measure(small_art.ray_index, rays[0], rays[1]).distance_mm
            bc = store.measure(small_art.ray_index, rays[1], rays[2]).distance_mm
            ac = store.measure(small_art.ray_index, rays[0], rays[2]).distance_mm
        except RayMiss:
            pytest.skip("random ray missed (eye inside closed tube should not happen)")
        assert ac <= ab + bc + 1e-9

    def test_miss_identifies_ray(self, small_art):
        store = AnnotationStore()
        line = small_art.centerline
        good = (line.point_at(10.0), np.array([0.0, 1.0, 0.0]))
        bad = (np.array([0.0, 500.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        with pytest.raises(RayMiss) as exc_info:
            store.measure(small_art.ray_index, bad, good)
        assert exc_info.value.which == "a"
        with pytest.raises(RayMiss) as exc_info:
            store.measure(small_art.ray_index, good, bad)
        assert exc_info.value.which == "b"

    def test_polyp_base_diameter(self, polyp_tube, polyp_art):
        """Antipodal base points across a planted polyp measure ~2r."""
        truth = polyp_tube.polyps[0]
        spacing = polyp_tube.spec.spacing_mm
        r = truth.base_diameter_mm / 2.0
        line = polyp_art.centerline
        tangent = np.array([1.0, 0.0, 0.0])
        base_a = truth.wall_point_mm - r * tangent
        base_b = truth.wall_point_mm + r * tangent
        store = AnnotationStore()
        m = store.measure(
            polyp_art.ray_index,
            axis_ray_to(base_a, line.point_at(truth.s_mm - r)),
            axis_ray_to(base_b, line.point_at(min(truth.s_mm + r, line.total_length))),
        )
        assert abs(m.distance_mm - truth.base_diameter_mm) <= 2.0 * spacing


class TestCsv:
    def test_export_shapes(self, small_art):
        store = AnnotationStore()
        line = small_art.centerline
        store.add_bookmark(
            small_art.ray_index,
            line,
            line.point_at(12.0),
            np.array([0.0, 1.0, 0.0]),
            AnomalyClass.SERRATED,
            note="flat, upper wall",
        )
        store.measure(
            small_art.ray_index,
            (line.point_at(10.0), np.array([0.0, 1.0, 0.0])),
            (line.point_at(20.0), np.array([0.0, 1.0, 0.0])),
        )
        bcsv = bookmarks_to_csv(store)
        assert bcsv.splitlines()[0] == "id,s_mm,x,y,z,class,note"
        assert "Serrated" in bcsv
        mcsv = measurements_to_csv(store)
        assert mcsv.splitlines()[0] == "id,ax,ay,az,bx,by,bz,distance_mm"
        assert len(mcsv.splitlines()) == 2
