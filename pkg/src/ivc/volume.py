"""CT volume handling: file I/O, coordinate transforms, density sampling,
windowed slice extraction, and lumen segmentation.

Volumes live on disk as a JSON header next to a raw little-endian data file:

    {"dims": [nx, ny, nz], "spacing_mm": [sx, sy, sz],
     "origin_mm": [ox, oy, oz], "dtype": "int16-le", "data_file": "vol.raw"}

The raw file stores voxels x-fastest, then y, then z, two bytes each, no
padding. Lumen masks use the same header with ``"dtype": "uint8"`` and 0/1
bytes. ``origin_mm`` is the world position of the *center* of voxel (0,0,0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    InvalidWindow,
    IoFailure,
    MalformedHeader,
    OutOfBounds,
    SeedNotInLumen,
    SizeMismatch,
)

HU_MIN = -1024
HU_MAX = 3071

#: Standard soft-tissue window; both values are plain defaults, not clinical advice.
DEFAULT_WINDOW_CENTER_HU = 40.0
DEFAULT_WINDOW_WIDTH_HU = 400.0

#: Voxels strictly below this HU count as lumen air during segmentation.
DEFAULT_AIR_THRESHOLD_HU = -700.0

SLICE_PLANES = ("axial", "coronal", "sagittal")
_PLANE_AXIS = {"axial": 2, "coronal": 1, "sagittal": 0}


@dataclass(frozen=True)
class Volume:
    """Immutable 3D grid of Hounsfield values.

    Attributes:
        data: int16 array of shape (nx, ny, nz); index 0 is x (fastest on disk).
        spacing_mm: positive voxel edge lengths (sx, sy, sz).
        origin_mm: world position of the center of voxel (0, 0, 0).
    """

    data: np.ndarray
    spacing_mm: np.ndarray
    origin_mm: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.int16)
        spacing = np.asarray(self.spacing_mm, dtype=np.float64)
        origin = np.asarray(self.origin_mm, dtype=np.float64)
        if data.ndim != 3:
            raise MalformedHeader(f"volume data must be 3D, got shape {data.shape}")
        if spacing.shape != (3,) or origin.shape != (3,):
            raise MalformedHeader("spacing_mm and origin_mm must be length-3")
        if not np.all(spacing > 0):
            raise MalformedHeader(f"spacing must be positive, got {spacing.tolist()}")
        if data.size and (data.min() < HU_MIN or data.max() > HU_MAX):
            raise MalformedHeader(
                f"voxel values outside Hounsfield range [{HU_MIN}, {HU_MAX}]"
            )
        data.flags.writeable = False
        spacing.flags.writeable = False
        origin.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing_mm", spacing)
        object.__setattr__(self, "origin_mm", origin)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class LumenMask:
    """Boolean air mask over a volume grid (true = lumen air).

    Carries the parent grid geometry so it is usable standalone (the CLI
    writes masks to disk and later feeds them to centerline extraction).
    """

    bits: np.ndarray
    spacing_mm: np.ndarray
    origin_mm: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        spacing = np.asarray(self.spacing_mm, dtype=np.float64)
        origin = np.asarray(self.origin_mm, dtype=np.float64)
        if bits.ndim != 3:
            raise MalformedHeader(f"mask must be 3D, got shape {bits.shape}")
        if not np.all(spacing > 0):
            raise MalformedHeader(f"spacing must be positive, got {spacing.tolist()}")
        bits.flags.writeable = False
        spacing.flags.writeable = False
        origin.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "spacing_mm", spacing)
        object.__setattr__(self, "origin_mm", origin)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.bits.shape

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass
class SliceImage:
    """Windowed 2D slice with the probed point marked.

    ``pixels[i, j]`` follows the volume's in-plane axis order: axial slices
    are indexed (x, y), coronal (x, z), sagittal (y, z).
    """

    plane: str
    index: int
    pixels: np.ndarray
    crosshair: tuple[int, int]
    window_center_hu: float
    window_width_hu: float


# --- file I/O ---------------------------------------------------------------

_REQUIRED_HEADER_FIELDS = ("dims", "spacing_mm", "origin_mm", "dtype", "data_file")


def _read_header(header_path: str | Path) -> dict:
    path = Path(header_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read header {path}: {exc}") from exc
    try:
        header = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"{path}: invalid JSON: {exc}") from exc
    for key in _REQUIRED_HEADER_FIELDS:
        if key not in header:
            raise MalformedHeader(f"{path}: missing field '{key}'")
    dims = header["dims"]
    spacing = header["spacing_mm"]
    if len(dims) != 3 or any(int(d) <= 0 for d in dims):
        raise MalformedHeader(f"{path}: dims must be 3 positive integers, got {dims}")
    if len(spacing) != 3 or any(float(s) <= 0 for s in spacing):
        raise MalformedHeader(f"{path}: spacing must be positive, got {spacing}")
    return header


def _read_raw(header_path: Path, header: dict, dtype: np.dtype, item_size: int) -> np.ndarray:
    nx, ny, nz = (int(d) for d in header["dims"])
    raw_path = header_path.parent / header["data_file"]
    try:
        raw = raw_path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read raw data {raw_path}: {exc}") from exc
    expected = item_size * nx * ny * nz
    if len(raw) != expected:
        raise SizeMismatch(
            f"{raw_path}: expected {expected} bytes for dims {(nx, ny, nz)}, got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype=dtype)
    # order='F' puts x fastest, matching the on-disk layout.
    return flat.reshape((nx, ny, nz), order="F")


def load_volume(header_path: str | Path) -> Volume:
    """Load a volume from its JSON header.

    Raises:
        MalformedHeader: missing field, bad dims/spacing, or wrong dtype tag.
        SizeMismatch: raw byte count does not equal 2*nx*ny*nz.
        IoFailure: header or raw file unreadable.
    """
    path = Path(header_path)
    header = _read_header(path)
    if header["dtype"] != "int16-le":
        raise MalformedHeader(f"{path}: expected dtype 'int16-le', got {header['dtype']!r}")
    data = _read_raw(path, header, np.dtype("<i2"), 2)
    return Volume(
        data=data,
        spacing_mm=np.asarray(header["spacing_mm"], dtype=np.float64),
        origin_mm=np.asarray(header["origin_mm"], dtype=np.float64),
    )


def write_volume(v: Volume, header_path: str | Path, data_file: str | None = None) -> None:
    """Write the header/raw pair; round-trips bit-identically through load_volume."""
    path = Path(header_path)
    if data_file is None:
        data_file = path.stem + ".raw"
    header = {
        "dims": [int(d) for d in v.dims],
        "spacing_mm": [float(s) for s in v.spacing_mm],
        "origin_mm": [float(o) for o in v.origin_mm],
        "dtype": "int16-le",
        "data_file": data_file,
    }
    try:
        path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
        raw = np.ascontiguousarray(v.data.ravel(order="F"), dtype="<i2")
        (path.parent / data_file).write_bytes(raw.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write volume {path}: {exc}") from exc


def load_mask(header_path: str | Path) -> LumenMask:
    """Load a lumen mask (same header format as volumes, dtype uint8)."""
    path = Path(header_path)
    header = _read_header(path)
    if header["dtype"] != "uint8":
        raise MalformedHeader(f"{path}: expected dtype 'uint8', got {header['dtype']!r}")
    bits = _read_raw(path, header, np.dtype("u1"), 1)
    return LumenMask(
        bits=bits != 0,
        spacing_mm=np.asarray(header["spacing_mm"], dtype=np.float64),
        origin_mm=np.asarray(header["origin_mm"], dtype=np.float64),
    )


def write_mask(mask: LumenMask, header_path: str | Path, data_file: str | None = None) -> None:
    path = Path(header_path)
    if data_file is None:
        data_file = path.stem + ".raw"
    header = {
        "dims": [int(d) for d in mask.dims],
        "spacing_mm": [float(s) for s in mask.spacing_mm],
        "origin_mm": [float(o) for o in mask.origin_mm],
        "dtype": "uint8",
        "data_file": data_file,
    }
    try:
        path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
        raw = np.ascontiguousarray(mask.bits.astype(np.uint8).ravel(order="F"))
        (path.parent / data_file).write_bytes(raw.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write mask {path}: {exc}") from exc


# --- coordinates and sampling ----------------------------------------------

def world_to_voxel(v: Volume | LumenMask, p) -> np.ndarray:
    """Map world mm point(s) to continuous voxel coordinates.

    Out-of-bounds coordinates are legal outputs; no clamping or checks here.
    """
    p = np.asarray(p, dtype=np.float64)
    return (p - v.origin_mm) / v.spacing_mm


def voxel_to_world(v: Volume | LumenMask, ijk) -> np.ndarray:
    """Inverse of world_to_voxel (voxel coordinates may be fractional)."""
    ijk = np.asarray(ijk, dtype=np.float64)
    return v.origin_mm + ijk * v.spacing_mm


def _in_bounds(v: Volume | LumenMask, vox: np.ndarray) -> bool:
    dims = np.asarray(v.dims)
    return bool(np.all(vox >= 0.0) and np.all(vox <= dims - 1))


def sample_hu(v: Volume, p) -> float:
    """Trilinear HU sample at a world point.

    Raises:
        OutOfBounds: the point's voxel coordinate leaves [0, dim-1] on any axis.
    """
    vox = world_to_voxel(v, p)
    if not _in_bounds(v, vox):
        raise OutOfBounds(f"point {np.asarray(p).tolist()} outside volume grid")
    return float(_trilinear(v.data, vox))


def _trilinear(grid: np.ndarray, vox: np.ndarray) -> float:
    """Interpolate one continuous voxel coordinate; caller checks bounds."""
    dims = grid.shape
    i0 = np.minimum(np.floor(vox).astype(np.int64), np.asarray(dims) - 2)
    i0 = np.maximum(i0, 0)
    f = vox - i0
    x0, y0, z0 = i0
    c = grid[x0 : x0 + 2, y0 : y0 + 2, z0 : z0 + 2].astype(np.float64)
    cx = c[0] * (1 - f[0]) + c[1] * f[0]
    cy = cx[0] * (1 - f[1]) + cx[1] * f[1]
    return cy[0] * (1 - f[2]) + cy[1] * f[2]


def apply_window(hu, center: float, width: float):
    """Affine HU -> [0,1] display mapping: clamp((hu-center)/width + 0.5, 0, 1)."""
    u = (np.asarray(hu, dtype=np.float64) - center) / width + 0.5
    return np.clip(u, 0.0, 1.0)


def extract_slice(
    v: Volume,
    p,
    plane: str = "axial",
    window_center_hu: float = DEFAULT_WINDOW_CENTER_HU,
    window_width_hu: float = DEFAULT_WINDOW_WIDTH_HU,
) -> SliceImage:
    """Windowed 2D slice through the voxel containing world point ``p``.

    The crosshair marks p's in-plane pixel; re-calling with a moved point
    yields the updated slice index, so a pointing ray can drive the panel.

    Raises:
        OutOfBounds: p outside the grid.
        InvalidWindow: non-positive window width.
        MalformedHeader: unknown plane name.
    """
    if window_width_hu <= 0:
        raise InvalidWindow(f"window width must be > 0, got {window_width_hu}")
    if plane not in _PLANE_AXIS:
        raise MalformedHeader(f"unknown slice plane {plane!r}; expected one of {SLICE_PLANES}")
    vox = world_to_voxel(v, p)
    if not _in_bounds(v, vox):
        raise OutOfBounds(f"point {np.asarray(p).tolist()} outside volume grid")
    ijk = np.rint(vox).astype(np.int64)
    ijk = np.minimum(np.maximum(ijk, 0), np.asarray(v.dims) - 1)
    axis = _PLANE_AXIS[plane]
    index = int(ijk[axis])
    if axis == 2:  # axial: pixels[i, j] = voxels[i, j, index]
        hu = v.data[:, :, index]
        crosshair = (int(ijk[0]), int(ijk[1]))
    elif axis == 1:  # coronal: pixels[i, j] = voxels[i, index, j]
        hu = v.data[:, index, :]
        crosshair = (int(ijk[0]), int(ijk[2]))
    else:  # sagittal: pixels[i, j] = voxels[index, i, j]
        hu = v.data[index, :, :]
        crosshair = (int(ijk[1]), int(ijk[2]))
    pixels = apply_window(hu, window_center_hu, window_width_hu)
    return SliceImage(
        plane=plane,
        index=index,
        pixels=pixels,
        crosshair=crosshair,
        window_center_hu=float(window_center_hu),
        window_width_hu=float(window_width_hu),
    )


# 6-connectivity: face neighbors only, so diagonal leaks through thin walls
# are impossible.
_STRUCTURE_6 = ndimage.generate_binary_structure(3, 1)


def segment_lumen(
    v: Volume,
    seed,
    air_threshold_hu: float = DEFAULT_AIR_THRESHOLD_HU,
) -> LumenMask:
    """Flood-fill the air component containing ``seed``.

    The mask is the 6-connected component of {HU < threshold} that holds the
    seed voxel, so disjoint air pockets are excluded by construction.

    Raises:
        OutOfBounds: seed outside the grid.
        SeedNotInLumen: seed voxel's HU is not below the threshold.
    """
    vox = world_to_voxel(v, seed)
    if not _in_bounds(v, vox):
        raise OutOfBounds(f"seed {np.asarray(seed).tolist()} outside volume grid")
    ijk = tuple(np.rint(vox).astype(np.int64))
    if not v.data[ijk] < air_threshold_hu:
        raise SeedNotInLumen(
            f"seed voxel HU {int(v.data[ijk])} not below threshold {air_threshold_hu}"
        )
    air = v.data < air_threshold_hu
    labels, _ = ndimage.label(air, structure=_STRUCTURE_6)
    component = labels == labels[ijk]
    return LumenMask(bits=component, spacing_mm=v.spacing_mm, origin_mm=v.origin_mm)
