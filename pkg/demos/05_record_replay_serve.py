"""
Action recording, deterministic replay, and the live server
===========================================================

Every operator action is an event in an append-only JSON Lines log. The
engine runs a fixed 72 Hz tick, so feeding the same log to the same
artifacts reproduces the exact same final state, certified by a 64-bit
state hash. That is what makes reading-pattern analysis trustworthy.
"""

from pathlib import Path

import ivc
from ivc.protocol import run_protocol
from ivc.session import replay

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

spec = ivc.PhantomSpec(preset="straight", length_mm=100.0, radius_mm=10.0, spacing_mm=1.0)
phantom = ivc.generate(spec)
art = ivc.build_artifacts(phantom.volume, phantom.seed_start, phantom.seed_end)

# Record: a scripted one-run reading with sweeping gaze.
report, engine = run_protocol(
    art.volume, art.mesh, art.ray_index, art.fresh_centerline(),
    protocol="one_run", level=3, gaze_mode="sweep",
)
log_path = out_dir / "session.jsonl"
engine.write_log(log_path)
live_hash = engine.state_hash()
print(f"recorded {len(engine.log)} events over {report.time_consumed_s:.1f} s "
      f"to {log_path}")
print(f"live state hash:   {live_hash:016x}")

# Replay twice against freshly built state: hashes must match bit-for-bit.
_, first = replay(log_path, art.volume, art.mesh, art.ray_index, art.fresh_centerline)
_, second = replay(log_path, art.volume, art.mesh, art.ray_index, art.fresh_centerline)
print(f"replay hash (1st): {first:016x}")
print(f"replay hash (2nd): {second:016x}")
assert first == second == live_hash
print("deterministic: live session and both replays agree")

# A tampered log diverges loudly.
lines = log_path.read_text().splitlines()
tampered = [ln.replace('"level":3', '"level":2', 1) for ln in lines]
_, tampered_hash = replay(tampered, art.volume, art.mesh, art.ray_index, art.fresh_centerline)
print(f"tampered log hash: {tampered_hash:016x} (differs: {tampered_hash != live_hash})")

print()
print("to drive a session live from the viewer, generate a phantom directory")
print("and start the TCP server:")
print("    ivc phantom --preset s_curve --length 180 --radius 8 --out demo_colon/")
print("    ivc serve --dir demo_colon/ --port 4700")
print("then connect the frontend/ viewer to 127.0.0.1:4700.")
