"""Deterministic single-writer session engine.

All mutable state (camera, coverage, annotations, toggles) is owned by one
SessionEngine and advances on a fixed 72 Hz tick. Every mutation enters
through a SessionEvent whose timestamp is quantized to ticks; events are
appended to the log before application, and rejected ones stay in the log
flagged with a reason. Replaying a log against the same artifacts must
reproduce the exact final state, which the FNV-1a state hash certifies
bit-for-bit.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import annotations as ann
from . import coverage as cov
from . import navigation as nav_mod
from .bvh import RayIndex, ray_intersect
from .centerline import Centerline
from .errors import CorruptLog, IvcError, OutOfOrderEvent, ProtocolViolation
from .surface import Mesh
from .volume import Volume, extract_slice

TICK_HZ = 72

EVENT_KINDS = (
    "velocity",
    "head_pose",
    "gaze",
    "point_teleport",
    "point_bookmark",
    "point_measure_a",
    "point_measure_b",
    "point_slice",
    "toggle_wim",
    "toggle_heatmap",
    "goto_bookmark",
    "start_at",
)

#: WIM fits the whole colon into a box of this size
WIM_BOX_MM = 300.0


@dataclass(frozen=True)
class SessionConfig:
    speeds_mm_s: tuple[float, ...] = nav_mod.DEFAULT_SPEEDS_MM_S
    tick_hz: int = TICK_HZ
    gaze_grid: int = cov.DEFAULT_GRID
    gaze_cone_deg: float = cov.DEFAULT_CONE_HALF_ANGLE_DEG
    t_sat_s: float = cov.DEFAULT_T_SAT_S
    tau_s: float = cov.DEFAULT_TAU_S
    window_center_hu: float = 40.0
    window_width_hu: float = 400.0


@dataclass(frozen=True)
class SessionEvent:
    t: float
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class LogEntry:
    event: SessionEvent
    rejected: bool = False
    reason: str | None = None
    # True when the rejection happened before the clock advanced (unknown
    # kind / out-of-order): such entries changed nothing and are skipped on
    # replay. Dispatch-stage rejections advanced the clock first and are
    # re-applied, failing identically.
    pre: bool = False

    def to_json_line(self) -> str:
        record = {"t": self.event.t, "kind": self.event.kind, "payload": self.event.payload}
        if self.rejected:
            record["rejected"] = True
            record["reason"] = self.reason
            if self.pre:
                record["pre"] = True
        return json.dumps(record, separators=(",", ":"))


# --- state hashing ------------------------------------------------------------

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


class _Canonical:
    """Accumulates state fields in declaration order as raw bytes."""

    def __init__(self):
        self.parts: list[bytes] = []

    def u64(self, value: int):
        self.parts.append(struct.pack("<Q", int(value)))

    def f64(self, value: float):
        self.parts.append(struct.pack("<d", float(value)))

    def f64s(self, values):
        arr = np.ascontiguousarray(values, dtype="<f8")
        self.parts.append(arr.tobytes())

    def raw(self, data: bytes):
        self.parts.append(data)

    def text(self, s: str):
        data = s.encode("utf-8")
        self.u64(len(data))
        self.raw(data)

    def digest(self) -> int:
        return fnv1a_64(b"".join(self.parts))


def _vec(payload: dict, key: str) -> np.ndarray:
    try:
        v = np.asarray(payload[key], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolViolation(f"payload field {key!r} missing or not a number triple") from exc
    if v.shape != (3,):
        raise ProtocolViolation(f"payload field {key!r} must have 3 components")
    return v


def _num(payload: dict, key: str, default: float) -> float:
    try:
        return float(payload.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ProtocolViolation(f"payload field {key!r} must be a number") from exc


class SessionEngine:
    """Owns all mutable session state; advance only through apply_event/ticks."""

    def __init__(
        self,
        volume: Volume,
        mesh: Mesh,
        ray_index: RayIndex,
        centerline: Centerline,
        config: SessionConfig | None = None,
    ):
        self.volume = volume
        self.mesh = mesh
        self.ray_index = ray_index
        self.centerline = centerline
        self.config = config or SessionConfig()
        self.tick = 0
        self.nav = nav_mod.NavState(speeds_mm_s=self.config.speeds_mm_s)
        self.coverage = cov.CoverageMap(mesh)
        self.store = ann.AnnotationStore()
        self.wim_visible = False
        self.heatmap_visible = False
        self.pending_measure: tuple[np.ndarray, np.ndarray] | None = None
        self.last_slice = None
        self.slice_serial = 0
        self.log: list[LogEntry] = []
        self.started = False

    # --- time ---------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.tick / self.config.tick_hz

    @property
    def dt(self) -> float:
        return 1.0 / self.config.tick_hz

    def tick_once(self) -> None:
        self.tick += 1
        nav_mod.step(self.nav, self.centerline, self.dt)

    def advance_ticks(self, n: int) -> None:
        for _ in range(n):
            self.tick_once()

    def _tick_of(self, t: float) -> int:
        return int(round(t * self.config.tick_hz))

    # --- events ---------------------------------------------------------------

    def apply_event(self, event: SessionEvent, strict: bool = True) -> LogEntry:
        """Advance to the event's tick, log it, then apply it.

        Module errors mark the entry rejected; with strict=True they also
        propagate after logging (headless drivers want the traceback, the
        live server wants to keep running).
        """
        entry = LogEntry(event=event)
        self.log.append(entry)
        try:
            if event.kind not in EVENT_KINDS:
                entry.pre = True
                raise ProtocolViolation(f"unknown event kind {event.kind!r}")
            target = self._tick_of(event.t)
            if target < self.tick:
                entry.pre = True
                raise OutOfOrderEvent(
                    f"event at t={event.t} precedes current tick time {self.now}"
                )
            while self.tick < target:
                self.tick_once()
            self._dispatch(event)
        except IvcError as exc:
            entry.rejected = True
            entry.reason = str(exc)
            if strict:
                raise
        return entry

    def _dispatch(self, event: SessionEvent) -> None:
        kind = event.kind
        payload = event.payload
        if kind == "velocity":
            level = payload.get("level")
            if isinstance(level, bool) or not isinstance(level, int):
                raise ProtocolViolation("velocity payload needs integer 'level'")
            nav_mod.set_velocity_level(self.nav, level)
        elif kind == "head_pose":
            nav_mod.apply_head_pose(
                self.nav, _vec(payload, "eye"), _vec(payload, "facing"), self.centerline
            )
        elif kind == "gaze":
            dt = _num(payload, "dt", self.dt)
            if dt < 0:
                raise ProtocolViolation(f"gaze dt must be >= 0, got {dt}")
            sample = cov.GazeSample(
                origin=_vec(payload, "origin"),
                direction=_vec(payload, "direction"),
                dt=dt,
            )
            cov.accumulate(
                self.coverage,
                self.ray_index,
                sample,
                grid=self.config.gaze_grid,
                cone_half_angle_deg=self.config.gaze_cone_deg,
            )
        elif kind == "point_teleport":
            nav_mod.teleport(
                self.nav,
                self.centerline,
                self.ray_index,
                _vec(payload, "origin"),
                _vec(payload, "direction"),
            )
        elif kind == "point_bookmark":
            try:
                cls = ann.AnomalyClass(payload.get("class", "Unclassified"))
            except ValueError as exc:
                raise ProtocolViolation(f"unknown anomaly class {payload.get('class')!r}") from exc
            self.store.add_bookmark(
                self.ray_index,
                self.centerline,
                _vec(payload, "origin"),
                _vec(payload, "direction"),
                anomaly_class=cls,
                note=str(payload.get("note", "")),
                created_at=self.now,
            )
        elif kind == "point_measure_a":
            self.pending_measure = (_vec(payload, "origin"), _vec(payload, "direction"))
        elif kind == "point_measure_b":
            if self.pending_measure is None:
                raise ProtocolViolation("point_measure_b without a pending point_measure_a")
            ray_a = self.pending_measure
            self.pending_measure = None
            self.store.measure(
                self.ray_index,
                ray_a,
                (_vec(payload, "origin"), _vec(payload, "direction")),
            )
        elif kind == "point_slice":
            hit = ray_intersect(self.ray_index, _vec(payload, "origin"), _vec(payload, "direction"))
            if hit is not None:
                self.last_slice = extract_slice(
                    self.volume,
                    hit.point,
                    plane=str(payload.get("plane", "axial")),
                    window_center_hu=_num(payload, "window_center_hu", self.config.window_center_hu),
                    window_width_hu=_num(payload, "window_width_hu", self.config.window_width_hu),
                )
                self.slice_serial += 1
        elif kind == "toggle_wim":
            self.wim_visible = not self.wim_visible
        elif kind == "toggle_heatmap":
            self.heatmap_visible = not self.heatmap_visible
        elif kind == "goto_bookmark":
            try:
                bookmark_id = int(payload.get("id", -1))
            except (TypeError, ValueError) as exc:
                raise ProtocolViolation("goto_bookmark payload needs integer 'id'") from exc
            bookmark = self.store.find_bookmark(bookmark_id)
            ann.goto_bookmark(self.nav, self.centerline, bookmark)
        elif kind == "start_at":
            if "s_mm" in payload:
                s = _num(payload, "s_mm", 0.0)
                if not 0.0 <= s <= self.centerline.total_length:
                    raise ProtocolViolation(f"start_at s={s} outside the centerline")
                self.nav.s_mm = s
                self.nav.head_offset_mm = np.zeros(3)
            else:
                hit = ray_intersect(
                    self.ray_index, _vec(payload, "origin"), _vec(payload, "direction")
                )
                if hit is None:
                    return  # miss: stay outside, no state change
                s, _ = self.centerline.nearest_point(hit.point)
                self.nav.s_mm = s
                self.nav.head_offset_mm = np.zeros(3)
            self.nav.facing = self.centerline.tangent_at(self.nav.s_mm)
            self.started = True

    # --- derived payloads -------------------------------------------------------

    def snapshot(self) -> dict:
        # visited flags ride along (packed bits) so the viewer can paint the
        # mid-line correctly even after teleports leave gaps
        packed = np.packbits(self.centerline.visited)
        return {
            "kind": "snapshot",
            "t": self.now,
            "s_mm": self.nav.s_mm,
            "eye": self.nav.eye_position(self.centerline).tolist(),
            "facing": self.nav.facing.tolist(),
            "velocity_level": self.nav.velocity_level,
            "visited_fraction": self.centerline.visited_fraction(),
            "visited": base64.b64encode(packed.tobytes()).decode("ascii"),
            "visited_count": len(self.centerline.visited),
            "wim_visible": self.wim_visible,
            "heatmap_visible": self.heatmap_visible,
            "started": self.started,
        }

    def wim_transform(self) -> dict:
        lo = self.mesh.vertices.min(axis=0)
        hi = self.mesh.vertices.max(axis=0)
        extent = float((hi - lo).max())
        return {
            "scale": WIM_BOX_MM / extent if extent > 0 else 1.0,
            "center": ((lo + hi) / 2.0).tolist(),
        }

    # --- hashing -----------------------------------------------------------------

    def state_hash(self) -> int:
        """FNV-1a 64 over the canonical state serialization."""
        c = _Canonical()
        c.u64(self.tick)
        c.f64(self.nav.s_mm)
        c.u64(self.nav.velocity_level)
        c.f64s(self.nav.facing)
        c.f64s(self.nav.head_offset_mm)
        c.f64(self.nav.motion_sign)
        visited = np.packbits(self.centerline.visited)
        c.u64(len(self.centerline.visited))
        c.raw(visited.tobytes())
        c.f64s(self.coverage.dwell_s)
        c.f64(self.coverage.total_session_s)
        c.u64(1 if self.wim_visible else 0)
        c.u64(1 if self.heatmap_visible else 0)
        if self.pending_measure is None:
            c.u64(0)
        else:
            c.u64(1)
            c.f64s(self.pending_measure[0])
            c.f64s(self.pending_measure[1])
        if self.last_slice is None:
            c.u64(0)
        else:
            s = self.last_slice
            c.u64(1)
            c.text(s.plane)
            c.u64(s.index)
            c.u64(s.crosshair[0])
            c.u64(s.crosshair[1])
            c.f64(s.window_center_hu)
            c.f64(s.window_width_hu)
        c.u64(len(self.store.bookmarks))
        for b in self.store.bookmarks:
            c.u64(b.id)
            c.f64s(b.surface_point)
            c.f64(b.s_mm)
            c.text(b.anomaly_class.value)
            c.text(b.note)
            c.f64(b.created_at)
        c.u64(len(self.store.measurements))
        for m in self.store.measurements:
            c.u64(m.id)
            c.f64s(m.point_a)
            c.f64s(m.point_b)
            c.f64(m.distance_mm)
        return c.digest()

    # --- log I/O -------------------------------------------------------------------

    def log_lines(self) -> list[str]:
        return [entry.to_json_line() for entry in self.log]

    def write_log(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.log_lines()) + "\n", encoding="utf-8")


def parse_log_line(line: str, line_number: int) -> tuple[SessionEvent, bool, bool]:
    """(event, rejected, pre_rejected) from one JSON Lines record.

    Raises:
        CorruptLog: parse failure, carrying the 1-based line number.
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptLog(f"invalid JSON: {exc.msg}", line_number) from exc
    if not isinstance(record, dict) or "t" not in record or "kind" not in record:
        raise CorruptLog("record needs 't' and 'kind' fields", line_number)
    try:
        t = float(record["t"])
    except (TypeError, ValueError):
        raise CorruptLog(f"non-numeric t {record['t']!r}", line_number) from None
    payload = record.get("payload", {})
    if not isinstance(payload, dict):
        raise CorruptLog("payload must be an object", line_number)
    event = SessionEvent(t=t, kind=str(record["kind"]), payload=payload)
    return event, bool(record.get("rejected", False)), bool(record.get("pre", False))


def replay(
    log: str | Path | list[str],
    volume: Volume,
    mesh: Mesh,
    ray_index: RayIndex,
    centerline_factory,
    config: SessionConfig | None = None,
) -> tuple[SessionEngine, int]:
    """Re-run a log against fresh artifacts; returns (engine, state hash).

    ``centerline_factory`` must produce a *fresh* Centerline per call because
    visited flags are part of the replayed state. Dispatch-stage rejections
    are re-applied (they advanced the clock before failing and fail again
    identically); validation-stage rejections changed nothing live, and the
    replay clock may disagree with the live clock about them, so they are
    skipped.
    """
    if isinstance(log, (str, Path)) and "\n" not in str(log):
        lines = Path(log).read_text(encoding="utf-8").splitlines()
    elif isinstance(log, str):
        lines = log.splitlines()
    else:
        lines = list(log)
    engine = SessionEngine(volume, mesh, ray_index, centerline_factory(), config)
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        event, rejected, pre = parse_log_line(line, number)
        if rejected and pre:
            continue
        engine.apply_event(event, strict=False)
    return engine, engine.state_hash()
