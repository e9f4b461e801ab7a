"""Pinhole projection, depth-tested back-projection, FPS and localization labels.

Camera frame convention: x right, y down, z forward. Extrinsics map world
coordinates to camera coordinates. Pixel ``(u, v)`` is column ``u`` and row
``v``; continuous image coordinates are quantized with round-half-up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DimensionError
from .tensorcore import Tensor, concat, gather, reshape

MIN_DEPTH = 1e-6
DEFAULT_DEPTH_TOL = 0.1


@dataclass
class CameraView:
    """One calibrated view with its feature and depth maps.

    ``feature_map`` is ``(H, W, D_i)`` and may be a graph tensor; ``depth_map``
    is ``(H, W)`` in meters with 0 meaning no return.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    extrinsics: np.ndarray
    width: int
    height: int
    feature_map: Tensor | None = None
    depth_map: np.ndarray | None = None

    def __post_init__(self):
        self.extrinsics = np.asarray(self.extrinsics, dtype=np.float64)
        if self.fx <= 0 or self.fy <= 0:
            raise ArgumentError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ArgumentError("principal point outside the image")
        if self.extrinsics.shape != (4, 4):
            raise DimensionError("extrinsics must be 4x4")
        rot = self.extrinsics[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9) or np.linalg.det(rot) <= 0:
            raise ArgumentError("extrinsics rotation is not a proper rotation")
        if self.depth_map is not None:
            self.depth_map = np.asarray(self.depth_map, dtype=np.float64)
            if self.depth_map.shape != (self.height, self.width):
                raise DimensionError(f"depth map shape {self.depth_map.shape} != ({self.height}, {self.width})")
            if (self.depth_map < 0).any():
                raise ArgumentError("negative depth")
        if self.feature_map is not None and self.feature_map.shape[:2] != (self.height, self.width):
            raise DimensionError(f"feature map shape {self.feature_map.shape} does not match image size")

    @property
    def intrinsics(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def with_maps(self, feature_map: Tensor | None = None, depth_map: np.ndarray | None = None) -> "CameraView":
        return CameraView(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.extrinsics,
            self.width,
            self.height,
            self.feature_map if feature_map is None else feature_map,
            self.depth_map if depth_map is None else depth_map,
        )


@dataclass
class BackProjectionResult:
    features: Tensor  # (N_p, M, D_i), zero where invalid
    valid: np.ndarray  # (N_p, M) bool


def project_points(points: np.ndarray, view: CameraView) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection. Returns ``(u, v, z_cam, ok)``; ``u, v`` are only
    meaningful where ``ok``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rot = view.extrinsics[:3, :3]
    trans = view.extrinsics[:3, 3]
    cam = pts @ rot.T + trans
    z = cam[:, 2]
    front = z > MIN_DEPTH
    safe_z = np.where(front, z, 1.0)
    u = np.floor(view.fx * cam[:, 0] / safe_z + view.cx + 0.5)
    v = np.floor(view.fy * cam[:, 1] / safe_z + view.cy + 0.5)
    ok = front & (u >= 0) & (u < view.width) & (v >= 0) & (v < view.height)
    u = np.where(ok, u, -1).astype(np.int64)
    v = np.where(ok, v, -1).astype(np.int64)
    return u, v, z, ok


def project(point_world, view: CameraView) -> tuple[int, int, float] | None:
    """Pixel ``(u, v)`` and camera depth of one point, or ``None`` when it is
    behind the camera or outside the frame."""
    u, v, z, ok = project_points(np.asarray(point_world, dtype=np.float64)[None, :], view)
    if not ok[0]:
        return None
    return int(u[0]), int(v[0]), float(z[0])


def visibility(points: np.ndarray, views: Sequence[CameraView], depth_tol: float = DEFAULT_DEPTH_TOL):
    """Pixel indices and validity of every point in every view.

    Returns ``(flat_index, valid)``, both ``(N, M)``; ``flat_index`` addresses the
    row ``m * H * W + v * W + u`` of the stacked, flattened feature maps.
    """
    if depth_tol <= 0:
        raise ArgumentError("depth tolerance must be positive")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n, m = len(pts), len(views)
    flat = np.zeros((n, m), dtype=np.int64)
    valid = np.zeros((n, m), dtype=bool)
    offset = 0
    for j, view in enumerate(views):
        if view.depth_map is None:
            raise ArgumentError("view has no depth map")
        u, v, z, ok = project_points(pts, view)
        d = np.where(ok, view.depth_map[np.where(ok, v, 0), np.where(ok, u, 0)], 0.0)
        valid[:, j] = ok & (d > 0) & (np.abs(z - d) <= depth_tol)
        flat[:, j] = offset + np.where(ok, v * view.width + u, 0)
        offset += view.height * view.width
    return flat, valid


def back_project(points, views: Sequence[CameraView], depth_tol: float = DEFAULT_DEPTH_TOL,
                 feature_maps=None) -> BackProjectionResult:
    """Gather each point's pixel feature from every view that sees it.

    Features come from each view's ``feature_map`` unless ``feature_maps`` is
    given: either an ``(M, H, W, D_i)`` tensor or any object with a
    ``gather_pixels(flat_index, valid)`` method over the stacked maps.
    """
    if not views:
        raise ArgumentError("need at least one view")
    pts = points.data if isinstance(points, Tensor) else np.asarray(points, dtype=np.float64)
    if feature_maps is not None and hasattr(feature_maps, "gather_pixels"):
        flat, valid = visibility(pts, views, depth_tol)
        return BackProjectionResult(feature_maps.gather_pixels(flat, valid), valid)
    if feature_maps is not None:
        if feature_maps.ndim != 4 or feature_maps.shape[0] != len(views):
            raise DimensionError(f"expected ({len(views)}, H, W, D) feature maps, got {feature_maps.shape}")
        d_i = feature_maps.shape[-1]
        table = reshape(feature_maps, (-1, d_i))
    else:
        if any(view.feature_map is None for view in views):
            raise ArgumentError("view has no feature map")
        widths = {view.feature_map.shape[-1] for view in views}
        if len(widths) != 1:
            raise DimensionError(f"feature widths differ across views: {sorted(widths)}")
        d_i = widths.pop()
        table = concat([reshape(view.feature_map, (-1, d_i)) for view in views], axis=0)
    flat, valid = visibility(pts, views, depth_tol)
    return BackProjectionResult(gather(table, flat, valid), valid)


def fps(points, k: int, start: int = 0) -> np.ndarray:
    """Greedy farthest point sampling; ties go to the lowest index."""
    pts = points.data if isinstance(points, Tensor) else np.asarray(points, dtype=np.float64)
    n = len(pts)
    if not 1 <= k <= n:
        raise ArgumentError(f"cannot sample {k} of {n} points")
    if not 0 <= start < n:
        raise ArgumentError(f"start index {start} out of range")
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = start
    nearest = np.sum((pts - pts[start]) ** 2, axis=1)
    nearest[start] = -1.0
    for i in range(1, k):
        nxt = int(np.argmax(nearest))
        chosen[i] = nxt
        d = np.sum((pts - pts[nxt]) ** 2, axis=1)
        np.minimum(nearest, d, out=nearest)
        nearest[nxt] = -1.0
    return chosen


def assign_loc_labels(candidates, centers, radius: float = 0.3) -> np.ndarray:
    """True for candidates within ``radius`` (inclusive) of any reference center."""
    if radius <= 0:
        raise ArgumentError("radius must be positive")
    cand = candidates.data if isinstance(candidates, Tensor) else np.asarray(candidates, dtype=np.float64)
    ctr = centers.data if isinstance(centers, Tensor) else np.asarray(centers, dtype=np.float64)
    cand = cand.reshape(-1, 3)
    ctr = ctr.reshape(-1, 3)
    if len(ctr) == 0:
        return np.zeros(len(cand), dtype=bool)
    dist = np.sqrt(np.sum((cand[:, None, :] - ctr[None, :, :]) ** 2, axis=-1))
    return (dist <= radius).any(axis=1)
