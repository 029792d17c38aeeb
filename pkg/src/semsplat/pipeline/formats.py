"""Binary and text file formats for scenes, rasters, trajectories and tables.

All multi-byte values are little-endian. Binary rasters carry a 4-byte magic
followed by u32 width and u32 height.
"""

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from PIL import Image

from semsplat.errors import FormatError
from semsplat.render.camera import CameraIntrinsics, Pose
from semsplat.scene.registry import LabelClassTable
from semsplat.scene.scene import GaussianScene
from semsplat.voting.label_map import LabelMap

logger = logging.getLogger(__name__)

SCENE_MAGIC = b"OGS1"
LABEL_MAP_MAGIC = b"OGLM"
CONFIDENCE_MAP_MAGIC = b"OGCM"
DEPTH_MAP_MAGIC = b"OGDM"

SCENE_DTYPE = np.dtype(
    [
        ("position", "<f4", (3,)),
        ("scale", "<f4", (3,)),
        ("rotation", "<f4", (4,)),  # w, x, y, z
        ("opacity", "<f4"),
        ("color", "<f4", (3,)),
        ("label", "<u4"),
    ]
)
BYTES_PER_GAUSSIAN = SCENE_DTYPE.itemsize

_U32 = np.dtype("<u4")


def _read_header(data: bytes, magic: bytes, fields: int, path: Path) -> tuple[int, ...]:
    size = len(magic) + 4 * fields
    if len(data) < size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    if data[: len(magic)] != magic:
        raise FormatError(f"{path}: bad magic {data[:len(magic)]!r}, expected {magic!r}")
    values = np.frombuffer(data, dtype=_U32, count=fields, offset=len(magic))
    return tuple(int(v) for v in values)


def _header(magic: bytes, *values: int) -> bytes:
    return magic + np.asarray(values, dtype=_U32).tobytes()


def scene_to_bytes(scene: GaussianScene) -> bytes:
    """Serialize the scene's Gaussians as OGS1."""
    records = np.zeros(len(scene), dtype=SCENE_DTYPE)
    records["position"] = scene.positions
    records["scale"] = scene.scales
    records["rotation"] = scene.rotations
    records["opacity"] = scene.opacities
    records["color"] = scene.colors
    records["label"] = scene.labels
    return _header(SCENE_MAGIC, len(scene)) + records.tobytes()


def write_scene(path: str | Path, scene: GaussianScene) -> int:
    """Write an OGS1 scene file; returns the number of bytes written."""
    data = scene_to_bytes(scene)
    Path(path).write_bytes(data)
    logger.debug(f"Wrote {len(scene)} Gaussians to {path}")
    return len(data)


def read_scene(path: str | Path, max_labels: int = 2000) -> GaussianScene:
    """Read an OGS1 scene file into a new scene.

    Raises:
        FormatError: on a bad magic, truncated body or trailing bytes.
        GaussianValidationError: if a stored Gaussian violates an invariant.
    """
    path = Path(path)
    data = path.read_bytes()
    (count,) = _read_header(data, SCENE_MAGIC, 1, path)
    body = len(data) - 8
    if body != count * BYTES_PER_GAUSSIAN:
        raise FormatError(
            f"{path}: expected {count * BYTES_PER_GAUSSIAN} body bytes for "
            f"{count} Gaussians, found {body}"
        )
    records = np.frombuffer(data, dtype=SCENE_DTYPE, count=count, offset=8)
    rotations = records["rotation"].astype(np.float64)
    if count:
        rotations /= np.linalg.norm(rotations, axis=1, keepdims=True)
    scene = GaussianScene(max_labels=max_labels)
    scene.add_arrays(
        positions=records["position"].astype(np.float64),
        scales=records["scale"].astype(np.float64),
        rotations=rotations,
        opacities=np.clip(records["opacity"].astype(np.float64), 0.0, 1.0),
        colors=np.clip(records["color"].astype(np.float64), 0.0, 1.0),
        labels=records["label"].astype(np.int64),
    )
    return scene


def _write_raster(path: str | Path, magic: bytes, values: np.ndarray, dtype: str) -> None:
    height, width = values.shape
    payload = np.ascontiguousarray(values, dtype=np.dtype(dtype)).tobytes()
    Path(path).write_bytes(_header(magic, width, height) + payload)


def _read_raster(path: str | Path, magic: bytes, dtype: str) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    width, height = _read_header(data, magic, 2, path)
    expected = width * height * np.dtype(dtype).itemsize
    if len(data) - 12 != expected:
        raise FormatError(f"{path}: expected {expected} pixel bytes, found {len(data) - 12}")
    return np.frombuffer(data, dtype=dtype, offset=12).reshape(height, width)


def write_label_map(path: str | Path, label_map: LabelMap) -> None:
    """Write an OGLM label map."""
    _write_raster(path, LABEL_MAP_MAGIC, label_map.labels, "<u4")


def read_label_map(path: str | Path) -> LabelMap:
    """Read an OGLM label map."""
    return LabelMap(_read_raster(path, LABEL_MAP_MAGIC, "<u4").astype(np.uint32))


def write_confidence_map(path: str | Path, values: np.ndarray) -> None:
    """Write an OGCM confidence or coverage map."""
    _write_raster(path, CONFIDENCE_MAP_MAGIC, values, "<f4")


def read_confidence_map(path: str | Path) -> np.ndarray:
    """Read an OGCM confidence or coverage map."""
    return _read_raster(path, CONFIDENCE_MAP_MAGIC, "<f4").astype(np.float64)


def write_depth(path: str | Path, depth: np.ndarray) -> None:
    """Write an OGDM depth map in meters (0 = invalid)."""
    _write_raster(path, DEPTH_MAP_MAGIC, depth, "<f4")


def read_depth(path: str | Path) -> np.ndarray:
    """Read an OGDM depth map."""
    return _read_raster(path, DEPTH_MAP_MAGIC, "<f4").astype(np.float64)


def write_rgb(path: str | Path, rgb: np.ndarray) -> None:
    """Write a binary PPM (P6, maxval 255) from a [0, 1] float image."""
    pixels = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(pixels).save(Path(path), format="PPM")


def read_rgb(path: str | Path) -> np.ndarray:
    """Read a PPM as a float image in [0, 1]."""
    try:
        with Image.open(Path(path)) as image:
            pixels = np.asarray(image.convert("RGB"), dtype=np.float64)
    except OSError as e:
        raise FormatError(f"{path}: not a readable PPM image: {e}") from e
    return pixels / 255.0


def read_text_table(path: str | Path, names: list[str]) -> pd.DataFrame:
    """Parse a whitespace-separated text file with fixed columns.

    Raises:
        FormatError: if a line has the wrong number of fields.
    """
    path = Path(path)
    if path.stat().st_size == 0:
        return pd.DataFrame(columns=names)
    try:
        frame = pd.read_csv(
            path, sep=r"\s+", header=None, names=names, comment="#", keep_default_na=False
        )
    except (pd.errors.ParserError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from e
    if frame.isna().any().any() or (frame.astype(str) == "").any().any():
        raise FormatError(f"{path}: expected {len(names)} columns per line")
    return frame


def write_trajectory(path: str | Path, poses: Sequence[Pose]) -> None:
    """Write camera-to-world poses as `tx ty tz qx qy qz qw` lines."""
    rows = []
    for pose in poses:
        center, (w, x, y, z) = pose.camera_to_world()
        rows.append([*center, x, y, z, w])
    frame = pd.DataFrame(rows, columns=["tx", "ty", "tz", "qx", "qy", "qz", "qw"])
    frame.to_csv(path, sep=" ", header=False, index=False, float_format="%.9f")


def read_trajectory(path: str | Path) -> list[Pose]:
    """Read camera-to-world poses and return them as world-to-camera poses."""
    frame = read_text_table(path, ["tx", "ty", "tz", "qx", "qy", "qz", "qw"])
    poses = []
    for row in frame.itertuples(index=False):
        quat = np.array([row.qw, row.qx, row.qy, row.qz], dtype=np.float64)
        poses.append(
            Pose.from_camera_to_world(
                np.array([row.tx, row.ty, row.tz], dtype=np.float64),
                quat / np.linalg.norm(quat),
            )
        )
    return poses


def write_intrinsics(path: str | Path, intrinsics: CameraIntrinsics) -> None:
    """Write `fx fy cx cy width height` on one line."""
    i = intrinsics
    Path(path).write_text(f"{i.fx:.9f} {i.fy:.9f} {i.cx:.9f} {i.cy:.9f} {i.width} {i.height}\n")


def read_intrinsics(path: str | Path) -> CameraIntrinsics:
    """Read intrinsics written by write_intrinsics."""
    frame = read_text_table(path, ["fx", "fy", "cx", "cy", "width", "height"])
    if len(frame) != 1:
        raise FormatError(f"{path}: expected one intrinsics line, found {len(frame)}")
    row = frame.iloc[0]
    return CameraIntrinsics(
        fx=float(row.fx),
        fy=float(row.fy),
        cx=float(row.cx),
        cy=float(row.cy),
        width=int(row.width),
        height=int(row.height),
    )


def write_label_table(path: str | Path, table: LabelClassTable) -> None:
    """Write `label_id class_name score` lines."""
    rows = [(label, entry.class_name, entry.score) for label, entry in table.items()]
    frame = pd.DataFrame(rows, columns=["label", "class_name", "score"])
    frame.to_csv(path, sep=" ", header=False, index=False, float_format="%.6f")


def read_label_table(path: str | Path) -> LabelClassTable:
    """Read a Label-Class table text file."""
    frame = read_text_table(path, ["label", "class_name", "score"])
    table = LabelClassTable()
    for row in frame.itertuples(index=False):
        table.set(int(row.label), str(row.class_name), float(row.score))
    return table
