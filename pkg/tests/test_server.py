import base64
import socket
import struct
import threading

import numpy as np
import pytest

import ivc
from ivc.errors import BindFailure
from ivc.server import recv_frame, send_frame, serve
from ivc.session import SessionEngine
from ivc.surface import load_obj


class Client:
    """Minimal blocking protocol client for tests."""

    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=30)
        self.sock.settimeout(30)

    def send(self, kind, payload=None):
        send_frame(self.sock, {"kind": kind, "payload": payload or {}})

    def send_raw(self, data: bytes):
        self.sock.sendall(struct.pack(">I", len(data)) + data)

    def recv(self):
        return recv_frame(self.sock)

    def recv_until(self, kind, limit=20000):
        for _ in range(limit):
            msg = self.recv()
            if msg is None:
                raise AssertionError(f"connection closed while waiting for {kind!r}")
            if msg["kind"] == kind:
                return msg
        raise AssertionError(f"no {kind!r} frame within {limit} frames")

    def close(self):
        self.sock.close()


@pytest.fixture
def live_session(small_art):
    """Serving engine on an ephemeral port; yields (client, thread, result)."""
    engine = SessionEngine(
        small_art.volume, small_art.mesh, small_art.ray_index, small_art.fresh_centerline()
    )
    port_box = {}
    ready = threading.Event()

    def _ready(port):
        port_box["port"] = port
        ready.set()

    result = {}

    def _run():
        try:
            result["engine"] = serve(engine, 0, realtime=False, ready_callback=_ready,
                                     max_ticks=100000)
        except Exception as exc:  # surface failures in the test thread
            result["error"] = exc
            ready.set()

    thread = threading.Thread(target=_run, daemon=True)
    thread.start()
    assert ready.wait(30)
    assert "error" not in result
    client = Client(port_box["port"])
    yield client, thread, result
    client.close()
    thread.join(timeout=30)


class TestHandshake:
    def test_hello_carries_scene(self, live_session, small_art):
        client, _, _ = live_session
        hello = client.recv_until("hello")
        mesh = load_obj(hello["mesh_obj"])
        assert mesh.triangle_count == small_art.mesh.triangle_count
        lines = hello["centerline_csv"].splitlines()
        assert lines[0] == "s_mm,x,y,z,radius_mm,visited"
        assert len(lines) == len(small_art.centerline) + 1
        assert hello["tick_hz"] == 72
        assert "wim" in hello


class TestEventEcho:
    def test_velocity_reflected_in_snapshot(self, live_session):
        client, _, _ = live_session
        client.recv_until("hello")
        client.send("velocity", {"level": 3})
        for _ in range(500):
            snap = client.recv_until("snapshot")
            if snap["velocity_level"] == 3:
                break
        else:
            raise AssertionError("velocity level never reflected")
        assert snap["velocity_level"] == 3

    def test_slice_message_crosshair(self, live_session, small_art):
        client, _, _ = live_session
        client.recv_until("hello")
        line = small_art.centerline
        origin = line.point_at(20.0)
        client.send("start_at", {"s_mm": 0.0})
        client.send(
            "point_slice",
            {"origin": origin.tolist(), "direction": [0.0, 1.0, 0.0], "plane": "axial"},
        )
        msg = client.recv_until("slice")
        hit = ivc.ray_intersect(small_art.ray_index, origin, np.array([0.0, 1.0, 0.0]))
        expected = ivc.extract_slice(small_art.volume, hit.point, "axial")
        assert msg["index"] == expected.index
        assert tuple(msg["crosshair"]) == expected.crosshair
        pixels = np.frombuffer(base64.b64decode(msg["pixels"]), dtype=np.uint8)
        assert pixels.shape[0] == msg["shape"][0] * msg["shape"][1]
        expected_bytes = np.rint(expected.pixels * 255.0).astype(np.uint8).tobytes()
        assert pixels.tobytes() == expected_bytes

    def test_heatmap_toggle_sends_colors(self, live_session, small_art):
        client, _, _ = live_session
        client.recv_until("hello")
        client.send("toggle_heatmap")
        msg = client.recv_until("heatmap")
        colors = base64.b64decode(msg["colors"])
        n_vertices = len(small_art.mesh.vertices)
        assert len(colors) == 3 * n_vertices
        # no gaze yet: every vertex is cold blue
        assert colors == bytes([0, 0, 255]) * n_vertices

    def test_bookmark_list_sent(self, live_session, small_art):
        client, _, _ = live_session
        client.recv_until("hello")
        line = small_art.centerline
        client.send(
            "point_bookmark",
            {
                "origin": line.point_at(12.0).tolist(),
                "direction": [0.0, 1.0, 0.0],
                "class": "Hyperplastic",
                "note": "from the wire",
            },
        )
        msg = client.recv_until("bookmarks")
        assert len(msg["items"]) == 1
        assert msg["items"][0]["class"] == "Hyperplastic"
        assert msg["items"][0]["note"] == "from the wire"

    def test_rejected_event_reports_error_and_continues(self, live_session):
        client, _, _ = live_session
        client.recv_until("hello")
        client.send("velocity", {"level": 42})
        msg = client.recv_until("error")
        assert not msg["fatal"]
        # connection still alive: snapshots keep flowing
        client.recv_until("snapshot")


class TestMalformed:
    def test_bad_json_closes_with_error(self, live_session):
        client, thread, _ = live_session
        client.recv_until("hello")
        client.send_raw(b"this is not json")
        msg = client.recv_until("error")
        assert msg["fatal"]
        thread.join(timeout=30)
        assert not thread.is_alive()


class TestLifecycle:
    def test_disconnect_ends_session_and_log_replays(self, small_art, tmp_path):
        engine = SessionEngine(
            small_art.volume, small_art.mesh, small_art.ray_index, small_art.fresh_centerline()
        )
        log_path = tmp_path / "live.jsonl"
        port_box = {}
        ready = threading.Event()
        result = {}

        def _run():
            result["engine"] = serve(
                engine, 0, realtime=False,
                ready_callback=lambda p: (port_box.update(port=p), ready.set()),
                log_path=log_path,
            )

        thread = threading.Thread(target=_run, daemon=True)
        thread.start()
        assert ready.wait(30)
        client = Client(port_box["port"])
        client.recv_until("hello")
        client.send("start_at", {"s_mm": 0.0})
        client.send("velocity", {"level": 4})
        for _ in range(30):
            client.recv_until("snapshot")
        client.close()
        thread.join(timeout=30)
        assert not thread.is_alive()
        live = result["engine"]
        _, digest = ivc.replay(
            log_path, small_art.volume, small_art.mesh, small_art.ray_index,
            small_art.fresh_centerline,
        )
        assert digest == live.state_hash()

    def test_bind_failure(self, small_art):
        engine = SessionEngine(
            small_art.volume, small_art.mesh, small_art.ray_index, small_art.fresh_centerline()
        )
        blocker = socket.create_server(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        try:
            with pytest.raises(BindFailure):
                serve(engine, port)
        finally:
            blocker.close()
