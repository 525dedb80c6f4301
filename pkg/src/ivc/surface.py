"""Lumen wall meshing and OBJ export.

The isosurface is the 0.5-level of a 3x3x3 box-filtered mask indicator with
a per-voxel classification clamp: foreground voxel centers are floored to
0.5 + 1/54 and background centers capped at 0.5 - 1/54. The box filter
removes the voxel staircase (digitized-ball surface area lands within ~1.5%
of analytic at 1 mm spacing); the clamp only fires at sub-voxel features,
where it keeps single-voxel details alive (a plain box filter erases
anything one voxel thick) and guarantees thin walls are never bridged: the
surface always separates exactly the mask's voxel centers.

Triangles are wound counter-clockwise as seen from inside the lumen, i.e.
vertex normals point into the air column the camera flies through.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage import measure

from .errors import EmptyMask, MaskTouchesBoundary
from .volume import LumenMask, Volume


@dataclass(frozen=True)
class Mesh:
    """Indexed triangle surface in world mm with interior-facing vertex normals."""

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32, CCW seen from the lumen interior
    normals: np.ndarray  # (V, 3) float64, unit, pointing into the lumen

    def __post_init__(self):
        for name in ("vertices", "triangles", "normals"):
            getattr(self, name).flags.writeable = False

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        cross = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def surface_area(self) -> float:
        return float(self.triangle_areas().sum())

    def enclosed_volume(self) -> float:
        """Volume bounded by the (closed) mesh, independent of winding sign."""
        v = self.vertices
        t = self.triangles
        signed = np.einsum(
            "ij,ij->i", v[t[:, 0]], np.cross(v[t[:, 1]], v[t[:, 2]])
        ).sum() / 6.0
        return float(abs(signed))


def _signed_volume(vertices: np.ndarray, triangles: np.ndarray) -> float:
    v = vertices
    t = triangles
    return float(
        np.einsum("ij,ij->i", v[t[:, 0]], np.cross(v[t[:, 1]], v[t[:, 2]])).sum() / 6.0
    )


def _vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted average of incident face normals, normalized."""
    face_n = np.cross(
        vertices[triangles[:, 1]] - vertices[triangles[:, 0]],
        vertices[triangles[:, 2]] - vertices[triangles[:, 0]],
    )
    normals = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(normals, triangles[:, k], face_n)
    lengths = np.linalg.norm(normals, axis=1)
    lengths[lengths == 0.0] = 1.0
    return normals / lengths[:, None]


def extract_isosurface(mask: LumenMask, v: Volume | None = None) -> Mesh:
    """Marching-cubes mesh of the lumen wall in world mm.

    ``v`` only supplies grid geometry and may be omitted because the mask
    carries its own; when given, it must share the mask's dims.

    Raises:
        EmptyMask: nothing to mesh.
        MaskTouchesBoundary: foreground on the grid face, surface would be open.
    """
    bits = mask.bits
    if v is not None and v.dims != mask.dims:
        raise ValueError(f"volume dims {v.dims} != mask dims {mask.dims}")
    if not bits.any():
        raise EmptyMask("cannot mesh an empty mask")
    if (
        bits[0, :, :].any()
        or bits[-1, :, :].any()
        or bits[:, 0, :].any()
        or bits[:, -1, :].any()
        or bits[:, :, 0].any()
        or bits[:, :, -1].any()
    ):
        raise MaskTouchesBoundary("mask reaches the grid boundary; surface would be open")

    indicator = bits.astype(np.float64)
    field = ndimage.uniform_filter(indicator, size=3, mode="constant")
    # Classification clamp: every foreground center ends strictly above the
    # level, every background center strictly below (and never exactly 0.5,
    # so no degenerate edge intersections).
    np.maximum(field, 0.5 + 1.0 / 54.0, out=field, where=bits)
    np.minimum(field, 0.5 - 1.0 / 54.0, out=field, where=~bits)
    verts, faces, _, _ = measure.marching_cubes(
        field, level=0.5, spacing=tuple(mask.spacing_mm)
    )
    verts = verts.astype(np.float64) + mask.origin_mm
    faces = np.ascontiguousarray(faces, dtype=np.int32)

    # Enforce interior-facing orientation: with outward normals the signed
    # volume is positive, so flip when we see that sign.
    if _signed_volume(verts, faces) > 0:
        faces = np.ascontiguousarray(faces[:, [0, 2, 1]])
    normals = _vertex_normals(verts, faces)
    return Mesh(vertices=verts, triangles=faces, normals=normals)


def edge_use_counts(mesh: Mesh) -> np.ndarray:
    """Times each undirected edge appears across triangles (2 everywhere on a
    watertight mesh)."""
    t = mesh.triangles.astype(np.int64)
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges.sort(axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return counts


def euler_characteristic(mesh: Mesh) -> int:
    t = mesh.triangles.astype(np.int64)
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges.sort(axis=1)
    n_edges = len(np.unique(edges, axis=0))
    return len(mesh.vertices) - n_edges + len(mesh.triangles)


# --- OBJ --------------------------------------------------------------------

def mesh_to_obj(mesh: Mesh) -> str:
    """ASCII OBJ with v/vn/f records (1-based indices)."""
    lines = []
    for p in mesh.vertices:
        lines.append(f"v {p[0]:.8f} {p[1]:.8f} {p[2]:.8f}")
    for n in mesh.normals:
        lines.append(f"vn {n[0]:.8f} {n[1]:.8f} {n[2]:.8f}")
    for a, b, c in mesh.triangles + 1:
        lines.append(f"f {a}//{a} {b}//{b} {c}//{c}")
    return "\n".join(lines) + "\n"


def save_obj(mesh: Mesh, path: str | Path) -> None:
    Path(path).write_text(mesh_to_obj(mesh), encoding="utf-8")


def load_obj(path_or_text: str | Path) -> Mesh:
    """Parse the subset of OBJ this package writes (v/vn/f with //)."""
    text = path_or_text if isinstance(path_or_text, str) and "\n" in path_or_text else Path(path_or_text).read_text()
    verts, norms, faces = [], [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "vn":
            norms.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    vertices = np.asarray(verts, dtype=np.float64)
    triangles = np.asarray(faces, dtype=np.int32)
    normals = (
        np.asarray(norms, dtype=np.float64)
        if len(norms) == len(verts)
        else _vertex_normals(vertices, triangles)
    )
    return Mesh(vertices=vertices, triangles=triangles, normals=normals)
