"""Immersive virtual colonoscopy engine.

Pipeline modules, in dependency order: volume (CT I/O, slices,
segmentation), phantom (synthetic ground truth), centerline (distance
transform + mid-line), surface (lumen meshing), bvh (ray index),
navigation (fly-through), coverage (gaze dwell heatmap), annotations
(bookmarks/measurement), session + protocol (deterministic engine,
metrics), and server (live wire protocol).
"""

from . import errors
from .annotations import AnnotationStore, AnomalyClass, Bookmark, Measurement, goto_bookmark
from .bvh import RayHit, RayIndex, brute_force_intersect, build_ray_index, ray_intersect
from .centerline import (
    Centerline,
    DistanceField,
    distance_transform,
    extract_centerline,
    load_centerline_csv,
    save_centerline_csv,
)
from .coverage import (
    CoverageMap,
    GazeSample,
    accumulate,
    coverage_fraction,
    heatmap_colors,
)
from .navigation import (
    DEFAULT_SPEEDS_MM_S,
    NavState,
    apply_head_pose,
    set_velocity_level,
    step,
    teleport,
)
from .phantom import (
    AnalyticCurve,
    Phantom,
    PhantomSpec,
    PolypSpec,
    centerline_error,
    generate,
)
from .pipeline import Artifacts, build_artifacts, build_from_phantom_dir
from .protocol import MetricsReport, run_protocol
from .server import serve
from .session import SessionConfig, SessionEngine, SessionEvent, fnv1a_64, replay
from .surface import Mesh, extract_isosurface, load_obj, mesh_to_obj, save_obj
from .volume import (
    LumenMask,
    SliceImage,
    Volume,
    extract_slice,
    load_mask,
    load_volume,
    sample_hu,
    segment_lumen,
    voxel_to_world,
    world_to_voxel,
    write_mask,
    write_volume,
)

__version__ = "0.1.0"
