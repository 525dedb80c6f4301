"""Scripted reading protocols and their metrics report.

Simulates the two evaluation regimes headlessly: a single rectum-to-cecum
pass, or the out-and-back double pass. The return leg reuses the engine's
own look-back rule: the script simply turns the head around at the far end
and motion inverts. Gaze either stays view-forward or sweeps +-30 degrees
around forward at 0.5 Hz so the walls receive off-axis rays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coverage as cov
from .annotations import AnomalyClass
from .bvh import RayIndex
from .centerline import Centerline
from .session import SessionConfig, SessionEngine, SessionEvent
from .surface import Mesh
from .volume import Volume

PROTOCOLS = ("one_run", "two_run")
GAZE_MODES = ("forward", "sweep")

SWEEP_AMPLITUDE_DEG = 30.0
SWEEP_FREQUENCY_HZ = 0.5

#: classes assigned to scripted findings, in polyp order
CLASS_CYCLE = (
    AnomalyClass.ADENOMATOUS,
    AnomalyClass.SERRATED,
    AnomalyClass.VILLOUS_ADENOMA,
    AnomalyClass.HYPERPLASTIC,
    AnomalyClass.INFLAMMATORY,
)


@dataclass
class MetricsReport:
    """What the protocol comparison looks at: coverage, time, and findings."""

    runs: str
    time_consumed_s: float
    coverage_fraction: float
    area_covered_mm2: float
    total_area_mm2: float
    visited_fraction: float
    bookmarks: list[dict] = field(default_factory=list)
    measurements_mm: list[float] = field(default_factory=list)
    tau_s: float = cov.DEFAULT_TAU_S
    t_sat_s: float = cov.DEFAULT_T_SAT_S
    velocity_level: int = 0
    gaze_mode: str = "forward"

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "time_consumed_s": self.time_consumed_s,
            "coverage_fraction": self.coverage_fraction,
            "area_covered_mm2": self.area_covered_mm2,
            "total_area_mm2": self.total_area_mm2,
            "visited_fraction": self.visited_fraction,
            "bookmarks": self.bookmarks,
            "measurements_mm": self.measurements_mm,
            "tau_s": self.tau_s,
            "t_sat_s": self.t_sat_s,
            "velocity_level": self.velocity_level,
            "gaze_mode": self.gaze_mode,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _rotate(vector: np.ndarray, axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation of ``vector`` about unit ``axis``."""
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return (
        vector * c
        + np.cross(axis, vector) * s
        + axis * (axis @ vector) * (1.0 - c)
    )


def _sweep_axis(tangent: np.ndarray) -> np.ndarray:
    z = np.array([0.0, 0.0, 1.0])
    if abs(float(tangent @ z)) < 0.9:
        return z
    return np.array([0.0, 1.0, 0.0])


def _facing(base: np.ndarray, tangent: np.ndarray, t: float, gaze_mode: str) -> np.ndarray:
    if gaze_mode == "forward":
        return base
    angle = math.radians(SWEEP_AMPLITUDE_DEG) * math.sin(
        2.0 * math.pi * SWEEP_FREQUENCY_HZ * t
    )
    swept = _rotate(base, _sweep_axis(tangent), angle)
    return swept / np.linalg.norm(swept)


def _polyp_truth(p) -> tuple[np.ndarray, float]:
    """(apex point, station) from a PolypGroundTruth or a ground-truth dict."""
    if isinstance(p, dict):
        return np.asarray(p["apex"], dtype=np.float64), float(p["s_mm"])
    return np.asarray(p.apex_mm, dtype=np.float64), float(p.s_mm)


def run_protocol(
    volume: Volume,
    mesh: Mesh,
    ray_index: RayIndex,
    centerline: Centerline,
    protocol: str = "one_run",
    level: int = 4,
    gaze_mode: str = "forward",
    polyps=(),
    config: SessionConfig | None = None,
) -> tuple[MetricsReport, SessionEngine]:
    """Drive a scripted traversal and return its metrics plus the engine.

    The engine (with its event log) is returned so callers can persist or
    replay the session; polyp ground truths, when given, are bookmarked as
    the camera first passes their station.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    if gaze_mode not in GAZE_MODES:
        raise ValueError(f"gaze_mode must be one of {GAZE_MODES}, got {gaze_mode!r}")
    if not 1 <= level <= 4:
        raise ValueError(f"velocity level must be in 1..4 for a traversal, got {level}")

    engine = SessionEngine(volume, mesh, ray_index, centerline, config)
    cfg = engine.config
    total = centerline.total_length
    speed = cfg.speeds_mm_s[level]
    legs = 1 if protocol == "one_run" else 2
    max_ticks = int(10 * legs * total / speed * cfg.tick_hz) + 10 * cfg.tick_hz

    engine.apply_event(SessionEvent(0.0, "start_at", {"s_mm": 0.0}))
    engine.apply_event(SessionEvent(0.0, "velocity", {"level": level}))

    direction_sign = 1.0
    bookmarked: set[int] = set()
    while engine.tick < max_ticks:
        t_now = engine.now
        s_prev = engine.nav.s_mm
        tangent = centerline.tangent_at(s_prev)
        base = direction_sign * tangent
        facing = _facing(base, tangent, t_now, gaze_mode)
        eye = centerline.point_at(s_prev)
        engine.apply_event(
            SessionEvent(t_now, "head_pose", {"eye": eye.tolist(), "facing": facing.tolist()})
        )
        engine.apply_event(
            SessionEvent(t_now, "gaze", {"origin": eye.tolist(), "direction": facing.tolist()})
        )
        engine.advance_ticks(1)
        s_now = engine.nav.s_mm

        lo, hi = min(s_prev, s_now), max(s_prev, s_now)
        for i, p in enumerate(polyps):
            apex, station = _polyp_truth(p)
            if i in bookmarked or not lo <= station <= hi:
                continue
            eye_now = centerline.point_at(s_now)
            ray_dir = apex - eye_now
            ray_dir = ray_dir / np.linalg.norm(ray_dir)
            engine.apply_event(
                SessionEvent(
                    engine.now,
                    "point_bookmark",
                    {
                        "origin": eye_now.tolist(),
                        "direction": ray_dir.tolist(),
                        "class": CLASS_CYCLE[i % len(CLASS_CYCLE)].value,
                        "note": f"finding {i + 1}",
                    },
                )
            )
            bookmarked.add(i)

        if direction_sign > 0 and s_now >= total:
            if protocol == "one_run":
                break
            direction_sign = -1.0
        elif direction_sign < 0 and s_now <= 0.0:
            break
    else:
        raise RuntimeError("protocol script did not terminate; check velocity/centerline")

    # Close the session with a pose event at the final tick so a replay of
    # the log advances the clock all the way to this state.
    engine.apply_event(
        SessionEvent(
            engine.now,
            "head_pose",
            {
                "eye": engine.nav.eye_position(centerline).tolist(),
                "facing": engine.nav.facing.tolist(),
            },
        )
    )

    report = MetricsReport(
        runs=protocol,
        time_consumed_s=engine.now,
        coverage_fraction=cov.coverage_fraction(engine.coverage, cfg.tau_s),
        area_covered_mm2=float(
            engine.coverage.vertex_area_mm2[engine.coverage.dwell_s >= cfg.tau_s].sum()
        ),
        total_area_mm2=float(engine.coverage.vertex_area_mm2.sum()),
        visited_fraction=centerline.visited_fraction(),
        bookmarks=[
            {"s_mm": b.s_mm, "class": b.anomaly_class.value} for b in engine.store.bookmarks
        ],
        measurements_mm=[m.distance_mm for m in engine.store.measurements],
        tau_s=cfg.tau_s,
        t_sat_s=cfg.t_sat_s,
        velocity_level=level,
        gaze_mode=gaze_mode,
    )
    return report, engine
