import numpy as np
import pytest

import ivc
from ivc.errors import UnresolvablePolyp
from ivc.phantom import AIR_HU, BODY_HU, load_ground_truth, write_ground_truth


class TestGenerate:
    def test_deterministic(self):
        spec = ivc.PhantomSpec(preset="straight", length_mm=40.0, radius_mm=6.0, spacing_mm=1.0)
        a = ivc.generate(spec)
        b = ivc.generate(spec)
        assert np.array_equal(a.volume.data, b.volume.data)
        assert np.array_equal(a.volume.origin_mm, b.volume.origin_mm)

    def test_straight_dims_and_axis_air(self):
        spec = ivc.PhantomSpec(preset="straight", length_mm=200.0, radius_mm=12.5, spacing_mm=1.0)
        ph = ivc.generate(spec)
        nx, ny, nz = ph.volume.dims
        assert 200 < nx <= 240
        assert 25 < ny <= 36
        assert 25 < nz <= 36
        # every voxel on the axis row between the caps is air
        vox = np.rint(ivc.world_to_voxel(ph.volume, np.array([[x, 0.0, 0.0] for x in range(0, 201)]))).astype(int)
        assert (ph.volume.data[vox[:, 0], vox[:, 1], vox[:, 2]] == AIR_HU).all()

    def test_body_margin_on_boundary(self):
        spec = ivc.PhantomSpec(preset="straight", length_mm=30.0, radius_mm=6.0, spacing_mm=1.0)
        ph = ivc.generate(spec)
        d = ph.volume.data
        assert (d[0] == BODY_HU).all() and (d[-1] == BODY_HU).all()
        assert (d[:, 0] == BODY_HU).all() and (d[:, -1] == BODY_HU).all()
        assert (d[:, :, 0] == BODY_HU).all() and (d[:, :, -1] == BODY_HU).all()

    def test_polyp_ground_truth_diameter(self):
        spec = ivc.PhantomSpec(
            preset="straight",
            length_mm=60.0,
            radius_mm=10.0,
            polyps=(ivc.PolypSpec(s_mm=30.0, azimuth_deg=0.0, radius_mm=4.0),),
        )
        ph = ivc.generate(spec)
        assert ph.polyps[0].base_diameter_mm == 8.0
        assert ph.polyps[0].s_mm == 30.0
        # apex sits radius - polyp_radius from the axis
        assert np.linalg.norm(ph.polyps[0].apex_mm - np.array([30.0, 0.0, 0.0])) == pytest.approx(6.0)

    def test_polyp_displaces_air(self):
        spec = ivc.PhantomSpec(
            preset="straight",
            length_mm=60.0,
            radius_mm=10.0,
            polyps=(ivc.PolypSpec(s_mm=30.0, azimuth_deg=0.0, radius_mm=4.0),),
        )
        ph = ivc.generate(spec)
        wall = ph.polyps[0].wall_point_mm
        vox = tuple(np.rint(ivc.world_to_voxel(ph.volume, wall * 0.999 + 0.001)).astype(int))
        assert ph.volume.data[vox] == BODY_HU

    def test_unresolvable_polyp(self):
        spec = ivc.PhantomSpec(
            preset="straight",
            length_mm=60.0,
            radius_mm=10.0,
            spacing_mm=3.0,
            polyps=(ivc.PolypSpec(s_mm=30.0, azimuth_deg=0.0, radius_mm=4.0),),
        )
        with pytest.raises(UnresolvablePolyp):
            ivc.generate(spec)

    def test_polyp_larger_than_tube_rejected(self):
        with pytest.raises(ValueError):
            ivc.PhantomSpec(
                preset="straight",
                radius_mm=5.0,
                polyps=(ivc.PolypSpec(s_mm=10.0, azimuth_deg=0.0, radius_mm=5.0),),
            )

    def test_polyp_station_outside_rejected(self):
        with pytest.raises(ValueError):
            ivc.PhantomSpec(
                preset="straight",
                length_mm=50.0,
                polyps=(ivc.PolypSpec(s_mm=60.0, azimuth_deg=0.0, radius_mm=3.0),),
            )

    def test_s_curve_arc_length(self):
        spec = ivc.PhantomSpec(preset="s_curve", length_mm=120.0, radius_mm=8.0, spacing_mm=1.0)
        ph = ivc.generate(spec)
        assert ph.curve.total_length == pytest.approx(120.0, abs=0.1)

    def test_mesh_vertex_near_each_apex(self, polyp_tube, polyp_art):
        for truth in polyp_tube.polyps:
            d = np.linalg.norm(polyp_art.mesh.vertices - truth.apex_mm, axis=1)
            assert d.min() <= 1.0  # within one voxel of the analytic apex


class TestCenterlineError:
    def test_zero_for_analytic_samples(self, small_tube):
        s = np.arange(0.0, small_tube.curve.total_length, 1.0)
        pts = small_tube.curve.point_at(s)
        rms, mx = ivc.centerline_error(pts, small_tube.curve)
        assert rms < 1e-9 and mx < 1e-9

    def test_uniform_offset(self, small_tube):
        s = np.arange(5.0, 50.0, 1.0)
        pts = small_tube.curve.point_at(s) + np.array([0.0, 1.0, 0.0])
        rms, mx = ivc.centerline_error(pts, small_tube.curve)
        assert rms == pytest.approx(1.0, abs=1e-6)
        assert mx == pytest.approx(1.0, abs=1e-6)


class TestGroundTruthFile:
    def test_round_trip(self, tmp_path, polyp_tube):
        write_ground_truth(polyp_tube, tmp_path / "gt.json")
        gt = load_ground_truth(tmp_path / "gt.json")
        assert gt["preset"] == "straight"
        assert len(gt["polyps"]) == 1
        assert gt["polyps"][0]["base_diameter_mm"] == 8.0
        assert len(gt["centerline"]) == int(polyp_tube.curve.total_length) + 1
        seed = np.asarray(gt["seed_start"])
        assert np.allclose(seed, polyp_tube.seed_start)
