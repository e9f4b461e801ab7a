"""Point-splat z-buffer rendering."""

from __future__ import annotations

import numpy as np

from ..geometry import CameraView, project_points


def render_view(points: np.ndarray, labels: np.ndarray, view: CameraView) -> tuple[np.ndarray, np.ndarray]:
    """Depth map and front-most label per pixel.

    Each point lands on the pixel chosen by :func:`project_points`; a pixel keeps
    its nearest point (lowest index on exact depth ties). Empty pixels have
    depth 0 and label -1.
    """
    xyz = np.asarray(points, dtype=np.float64)[:, :3]
    u, v, z, ok = project_points(xyz, view)
    depth = np.zeros(view.height * view.width)
    label_map = np.full(view.height * view.width, -1, dtype=np.int64)
    idx = np.flatnonzero(ok)
    if idx.size:
        pix = v[idx] * view.width + u[idx]
        order = np.lexsort((idx, z[idx], pix))
        pix_sorted = pix[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = pix_sorted[1:] != pix_sorted[:-1]
        winners = idx[order[first]]
        depth[pix_sorted[first]] = z[winners]
        label_map[pix_sorted[first]] = np.asarray(labels)[winners]
    return depth.reshape(view.height, view.width), label_map.reshape(view.height, view.width)


def render_depth(points: np.ndarray, view: CameraView) -> np.ndarray:
    return render_view(points, np.zeros(len(points), dtype=np.int64), view)[0]
