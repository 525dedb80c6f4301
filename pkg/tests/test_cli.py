import json

import pytest

from ivc.cli import main


@pytest.fixture(scope="module")
def phantom_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("phantom")
    rc = main(
        [
            "phantom",
            "--preset", "straight",
            "--length", "40",
            "--radius", "6",
            "--spacing", "1",
            "--polyps", str(_polyp_spec(out)),
            "--out", str(out),
        ]
    )
    assert rc == 0
    return out


def _polyp_spec(directory):
    path = directory / "polyps.json"
    path.write_text(json.dumps([{"s_mm": 20.0, "azimuth_deg": 45.0, "radius_mm": 3.0}]))
    return path


def test_phantom_outputs(phantom_dir):
    assert (phantom_dir / "volume.json").exists()
    assert (phantom_dir / "volume.raw").exists()
    gt = json.loads((phantom_dir / "ground_truth.json").read_text())
    assert len(gt["polyps"]) == 1


def test_ingest_and_centerline(phantom_dir, tmp_path, capsys):
    gt = json.loads((phantom_dir / "ground_truth.json").read_text())
    seed = ",".join(str(x) for x in gt["seed_start"])
    end = ",".join(str(x) for x in gt["seed_end"])
    mask_path = tmp_path / "mask.json"
    rc = main(
        [
            "ingest", str(phantom_dir / "volume.json"),
            "--seed", seed,
            "--out", str(mask_path),
            "--mesh", str(tmp_path / "lumen.obj"),
        ]
    )
    assert rc == 0
    assert mask_path.exists()
    assert (tmp_path / "lumen.obj").read_text().startswith("v ")

    csv_path = tmp_path / "line.csv"
    rc = main(
        ["centerline", str(mask_path), "--start", seed, "--end", end, "--out", str(csv_path)]
    )
    assert rc == 0
    assert csv_path.read_text().startswith("s_mm,x,y,z,radius_mm,visited")


def test_simulate_and_replay(phantom_dir, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    log_path = tmp_path / "events.jsonl"
    rc = main(
        [
            "simulate",
            "--dir", str(phantom_dir),
            "--protocol", "one_run",
            "--level", "4",
            "--gaze", "forward",
            "--report", str(report_path),
            "--log", str(log_path),
        ]
    )
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["visited_fraction"] == 1.0
    assert "time_consumed_s" in report and "coverage_fraction" in report
    out = capsys.readouterr().out
    assert "hash" in out
    live_hash = out.rsplit("hash ", 1)[1].strip().split()[0]

    rc = main(["replay", str(log_path), "--dir", str(phantom_dir)])
    assert rc == 0
    replay_out = capsys.readouterr().out
    assert live_hash in replay_out


def test_ingest_seed_in_body_fails_cleanly(phantom_dir, capsys):
    rc = main(
        [
            "ingest", str(phantom_dir / "volume.json"),
            "--seed", "0,-7.5,-7.5",
            "--out", "/tmp/never-written-mask.json",
        ]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err
