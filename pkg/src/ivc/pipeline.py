"""Convenience assembly of the full artifact chain.

Glue used by the CLI, demos, and tests: volume -> lumen mask -> distance
field -> centerline -> mesh -> ray index, bundled in one object.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import RayIndex, build_ray_index
from .centerline import Centerline, DistanceField, distance_transform, extract_centerline
from .phantom import load_ground_truth
from .surface import Mesh, extract_isosurface
from .volume import (
    DEFAULT_AIR_THRESHOLD_HU,
    LumenMask,
    Volume,
    load_volume,
    segment_lumen,
)


@dataclass
class Artifacts:
    volume: Volume
    mask: LumenMask
    distance_field: DistanceField
    centerline: Centerline
    mesh: Mesh
    ray_index: RayIndex
    ground_truth: dict | None = None

    def fresh_centerline(self) -> Centerline:
        """Copy with cleared visited flags, for replay runs."""
        return Centerline(
            samples=self.centerline.samples,
            radius_mm=self.centerline.radius_mm,
        )


def build_artifacts(
    volume: Volume,
    seed_start,
    seed_end,
    air_threshold_hu: float = DEFAULT_AIR_THRESHOLD_HU,
    ground_truth: dict | None = None,
) -> Artifacts:
    mask = segment_lumen(volume, seed_start, air_threshold_hu)
    df = distance_transform(mask)
    line = extract_centerline(mask, df, seed_start, seed_end)
    mesh = extract_isosurface(mask, volume)
    index = build_ray_index(mesh)
    return Artifacts(
        volume=volume,
        mask=mask,
        distance_field=df,
        centerline=line,
        mesh=mesh,
        ray_index=index,
        ground_truth=ground_truth,
    )


def build_from_phantom_dir(directory: str | Path) -> Artifacts:
    """Load a directory produced by ``ivc phantom`` and build everything.

    Expects volume.json (+raw) and ground_truth.json; seeds come from the
    analytic curve endpoints.
    """
    directory = Path(directory)
    volume = load_volume(directory / "volume.json")
    truth = load_ground_truth(directory / "ground_truth.json")
    return build_artifacts(
        volume,
        np.asarray(truth["seed_start"], dtype=np.float64),
        np.asarray(truth["seed_end"], dtype=np.float64),
        ground_truth=truth,
    )
