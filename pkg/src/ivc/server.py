"""Length-prefixed JSON wire protocol for one live operator.

Framing: 4-byte big-endian payload length, then UTF-8 JSON. The handshake
frame carries the mesh as OBJ text and the centerline as CSV so the viewer
can build its scene before the first snapshot. Client frames mirror session
event kinds; the server stamps arrival time (the engine clock is the only
clock). Each tick emits a snapshot plus any on-demand payloads that became
ready (heatmap colors, slice images, WIM transform, bookmark list).

A malformed frame is answered with an error frame and the connection is
closed; module-level rejections (e.g. a stale bookmark id) only produce an
error frame and the session continues.
"""

from __future__ import annotations

import base64
import json
import queue
import socket
import struct
import threading
import time
from pathlib import Path

import numpy as np

from .centerline import centerline_to_csv
from .errors import BindFailure, ProtocolViolation
from .session import SessionEngine, SessionEvent
from .surface import mesh_to_obj

_HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 64 * 1024 * 1024


def send_frame(sock: socket.socket, message: dict) -> None:
    data = json.dumps(message, separators=(",", ":")).encode("utf-8")
    sock.sendall(_HEADER.pack(len(data)) + data)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def recv_frame(sock: socket.socket) -> dict | None:
    """One decoded frame, or None on orderly close.

    Raises:
        ProtocolViolation: oversized frame or invalid JSON.
    """
    header = _recv_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolViolation(f"frame of {length} bytes exceeds limit")
    body = _recv_exact(sock, length)
    if body is None:
        return None
    try:
        message = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolation(f"undecodable frame: {exc}") from exc
    if not isinstance(message, dict) or "kind" not in message:
        raise ProtocolViolation("frame must be an object with a 'kind' field")
    return message


def _reader(sock: socket.socket, inbox: queue.Queue) -> None:
    try:
        while True:
            frame = recv_frame(sock)
            if frame is None:
                inbox.put(("closed", None))
                return
            inbox.put(("frame", frame))
    except ProtocolViolation as exc:
        inbox.put(("violation", str(exc)))
    except OSError:
        inbox.put(("closed", None))


def _slice_message(engine: SessionEngine) -> dict:
    s = engine.last_slice
    gray = np.rint(s.pixels * 255.0).astype(np.uint8)
    return {
        "kind": "slice",
        "plane": s.plane,
        "index": s.index,
        "shape": list(gray.shape),
        "pixels": base64.b64encode(gray.tobytes()).decode("ascii"),
        "crosshair": list(s.crosshair),
        "window_center_hu": s.window_center_hu,
        "window_width_hu": s.window_width_hu,
    }


def _bookmarks_message(engine: SessionEngine) -> dict:
    return {
        "kind": "bookmarks",
        "items": [
            {
                "id": b.id,
                "s_mm": b.s_mm,
                "point": b.surface_point.tolist(),
                "class": b.anomaly_class.value,
                "note": b.note,
                "created_at": b.created_at,
            }
            for b in engine.store.bookmarks
        ],
    }


def serve(
    engine: SessionEngine,
    port: int,
    host: str = "127.0.0.1",
    realtime: bool = True,
    log_path: str | Path | None = None,
    ready_callback=None,
    max_ticks: int | None = None,
) -> SessionEngine:
    """Run the session loop for a single operator connection.

    ``realtime=False`` removes wall-clock pacing (the simulated tick stays
    1/72 s) for scripted clients and tests. Returns the engine after the
    client disconnects so callers can inspect or persist the session.

    Raises:
        BindFailure: the port could not be bound.
    """
    from . import coverage as cov

    try:
        listener = socket.create_server((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc

    with listener:
        if ready_callback is not None:
            ready_callback(listener.getsockname()[1])
        conn, _ = listener.accept()

    with conn:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        inbox: queue.Queue = queue.Queue()
        reader = threading.Thread(target=_reader, args=(conn, inbox), daemon=True)
        reader.start()

        send_frame(
            conn,
            {
                "kind": "hello",
                "mesh_obj": mesh_to_obj(engine.mesh),
                "centerline_csv": centerline_to_csv(engine.centerline),
                "tick_hz": engine.config.tick_hz,
                "speeds_mm_s": list(engine.config.speeds_mm_s),
                "wim": engine.wim_transform(),
            },
        )

        tick_period = 1.0 / engine.config.tick_hz
        next_deadline = time.monotonic() + tick_period
        sent_slice_serial = 0
        sent_bookmark_count = 0
        running = True
        try:
            while running:
                heatmap_was = engine.heatmap_visible
                wim_was = engine.wim_visible
                # Drain client frames; the engine clock stamps arrivals.
                while True:
                    try:
                        tag, value = inbox.get_nowait()
                    except queue.Empty:
                        break
                    if tag == "closed":
                        running = False
                        break
                    if tag == "violation":
                        send_frame(conn, {"kind": "error", "message": value, "fatal": True})
                        running = False
                        break
                    event = SessionEvent(t=engine.now, kind=str(value["kind"]),
                                         payload=value.get("payload", {}))
                    entry = engine.apply_event(event, strict=False)
                    if entry.rejected:
                        send_frame(
                            conn,
                            {"kind": "error", "message": entry.reason, "fatal": False},
                        )
                if not running:
                    break

                engine.advance_ticks(1)
                send_frame(conn, engine.snapshot())
                if engine.slice_serial > sent_slice_serial:
                    send_frame(conn, _slice_message(engine))
                    sent_slice_serial = engine.slice_serial
                if len(engine.store.bookmarks) != sent_bookmark_count:
                    send_frame(conn, _bookmarks_message(engine))
                    sent_bookmark_count = len(engine.store.bookmarks)
                if engine.heatmap_visible and not heatmap_was:
                    colors = cov.heatmap_bytes(engine.coverage, engine.config.t_sat_s)
                    send_frame(
                        conn,
                        {
                            "kind": "heatmap",
                            "colors": base64.b64encode(colors).decode("ascii"),
                            "t_sat_s": engine.config.t_sat_s,
                        },
                    )
                if engine.wim_visible and not wim_was:
                    send_frame(conn, {"kind": "wim", **engine.wim_transform()})

                if max_ticks is not None and engine.tick >= max_ticks:
                    running = False
                if realtime:
                    now = time.monotonic()
                    if now < next_deadline:
                        time.sleep(next_deadline - now)
                    next_deadline += tick_period
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass

    # Final pose event pins the session's end tick into the log so replays
    # advance the clock to exactly this state.
    engine.apply_event(
        SessionEvent(
            t=engine.now,
            kind="head_pose",
            payload={
                "eye": engine.nav.eye_position(engine.centerline).tolist(),
                "facing": engine.nav.facing.tolist(),
            },
        ),
        strict=False,
    )
    if log_path is not None:
        engine.write_log(log_path)
    return engine
