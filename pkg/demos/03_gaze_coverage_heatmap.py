"""
Gaze dwell time, coverage, and the one-run vs two-run comparison
================================================================

Every frame, a small fan of rays is cast around the gaze direction and the
frame time is deposited on the wall vertices it hits. This script runs the
two scripted reading protocols on the same S-curve colon and compares what
they saw, then renders the dwell heatmap to a PNG (side projection).
"""

from pathlib import Path

import numpy as np

import ivc
from ivc.coverage import heatmap_colors
from ivc.protocol import run_protocol

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

spec = ivc.PhantomSpec(
    preset="s_curve",
    length_mm=180.0,
    radius_mm=8.0,
    spacing_mm=1.0,
    polyps=(
        ivc.PolypSpec(s_mm=40.0, azimuth_deg=0.0, radius_mm=2.0),
        ivc.PolypSpec(s_mm=90.0, azimuth_deg=120.0, radius_mm=3.0),
        ivc.PolypSpec(s_mm=140.0, azimuth_deg=240.0, radius_mm=4.0),
    ),
)
phantom = ivc.generate(spec)
art = ivc.build_artifacts(phantom.volume, phantom.seed_start, phantom.seed_end)

# Sweep gaze +-30 degrees around forward at 0.5 Hz while flying at level 2
# (10 mm/s); bookmark each planted polyp as the camera passes its station.
reports = {}
engines = {}
for protocol in ("one_run", "two_run"):
    reports[protocol], engines[protocol] = run_protocol(
        art.volume, art.mesh, art.ray_index, art.fresh_centerline(),
        protocol=protocol, level=2, gaze_mode="sweep", polyps=phantom.polyps,
    )

for protocol, report in reports.items():
    dwell = engines[protocol].coverage.dwell_s
    print(f"{protocol}: {report.time_consumed_s:.1f} s, "
          f"visited {report.visited_fraction:.2f}, "
          f"dwell on walls {dwell.sum():.1f} s over {np.count_nonzero(dwell)} vertices, "
          f"{len(report.bookmarks)} bookmarks")

one, two = reports["one_run"], reports["two_run"]
assert two.coverage_fraction >= one.coverage_fraction
print("the second pass only adds dwell: two_run coverage >= one_run coverage")

report_path = out_dir / "two_run_report.json"
reports["two_run"].write_json(report_path)
print(f"metrics report written to {report_path}")

# --- render the two-run heatmap to a PNG --------------------------------------
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

mesh = art.mesh
colors = heatmap_colors(engines["two_run"].coverage, t_sat=0.02) / 255.0
fig, ax = plt.subplots(figsize=(10, 7))
order = np.argsort(mesh.vertices[:, 2])  # paint far side first
ax.scatter(
    mesh.vertices[order, 0], mesh.vertices[order, 1],
    c=colors[order], s=2.0, linewidths=0,
)
line = art.centerline
ax.plot(line.samples[:, 0], line.samples[:, 1], "w--", linewidth=1, label="mid-line")
for truth in phantom.polyps:
    ax.annotate("polyp", truth.apex_mm[:2], color="black", fontsize=8,
                xytext=(truth.apex_mm[0], truth.apex_mm[1] + 14),
                arrowprops={"arrowstyle": "->"})
ax.set_aspect("equal")
ax.set_xlabel("x (mm)")
ax.set_ylabel("y (mm)")
ax.set_title("dwell-time heatmap after the two-run protocol (blue=unseen, red=long dwell)")
ax.legend(loc="lower right")
fig.tight_layout()
fig.savefig(out_dir / "heatmap.png", dpi=130)
print(f"heatmap rendered to {out_dir / 'heatmap.png'}")
