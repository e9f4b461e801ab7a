"""Learnable stand-ins for the pre-trained image, text and point encoders.

Every function here takes the parameters under the ``enc`` scope.
"""

from __future__ import annotations

import numpy as np

from ..config import RunConfig
from ..errors import ArgumentError, DimensionError
from ..geometry import CameraView, fps
from ..tensorcore import ParamSet, Tensor, add, gather, matmul, mlp2
from ..tensorcore.nn import init_mlp2
from ..tensorcore.params import uniform_init
from .vocab import PAD, VOCAB_SIZE


def init_encoder_params(params: ParamSet, config: RunConfig, rng: np.random.Generator, prefix: str = "enc") -> None:
    params.add(f"{prefix}.img.class_emb", uniform_init(rng, (config.n_classes, config.d_i), 1))
    params.add(f"{prefix}.img.color_emb", uniform_init(rng, (config.n_colors, config.d_i), 1))
    params.add(f"{prefix}.txt.tok_emb", uniform_init(rng, (VOCAB_SIZE, config.d_m), 1))
    params.add(f"{prefix}.txt.pos_emb", uniform_init(rng, (config.max_tokens, config.d_m), 1))
    init_mlp2(params, f"{prefix}.pts", (6, config.d_p, config.d_p), rng)


class ImageFeatures:
    """Stub feature maps for ``M`` views: pixel ``(m, v, u)`` carries
    ``class_emb[c] + color_emb[k]`` of the front-most object, zero if empty.

    The maps are kept factorized (object-index maps plus the two tables) so that
    pooling and per-point lookups never touch the full ``M x H x W x D`` array;
    :meth:`materialize` builds it explicitly.
    """

    def __init__(self, pixel_objects: np.ndarray, object_classes, object_colors, params: ParamSet):
        self.pixel_objects = np.asarray(pixel_objects, dtype=np.int64)
        if self.pixel_objects.ndim != 3:
            raise DimensionError("pixel object maps must be (M, H, W)")
        self.object_classes = np.asarray(object_classes, dtype=np.int64)
        self.object_colors = np.asarray(object_colors, dtype=np.int64)
        self.class_emb = params["img.class_emb"]
        self.color_emb = params["img.color_emb"]
        self._counts: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.pixel_objects.shape + (self.class_emb.shape[1],)

    def _lookup(self, objects: np.ndarray, mask: np.ndarray) -> Tensor:
        safe = np.where(mask, objects, 0)
        cls = np.where(mask, self.object_classes[safe], 0)
        col = np.where(mask, self.object_colors[safe], 0)
        return add(gather(self.class_emb, cls, mask), gather(self.color_emb, col, mask))

    def materialize(self) -> Tensor:
        return self._lookup(self.pixel_objects, self.pixel_objects >= 0)

    def view_map(self, m: int) -> Tensor:
        objs = self.pixel_objects[m]
        return self._lookup(objs, objs >= 0)

    def select_views(self, count: int) -> "ImageFeatures":
        out = ImageFeatures.__new__(ImageFeatures)
        out.pixel_objects = self.pixel_objects[:count]
        out.object_classes, out.object_colors = self.object_classes, self.object_colors
        out.class_emb, out.color_emb = self.class_emb, self.color_emb
        out._counts = None
        return out

    def pooled(self) -> Tensor:
        """Mean over pixels per view, ``(M, D_i)``."""
        if self._counts is None:
            m, h, w = self.pixel_objects.shape
            n_cls, n_col = self.class_emb.shape[0], self.color_emb.shape[0]
            cls_counts = np.zeros((m, n_cls))
            col_counts = np.zeros((m, n_col))
            for j in range(m):
                objs = self.pixel_objects[j][self.pixel_objects[j] >= 0]
                cls_counts[j] = np.bincount(self.object_classes[objs], minlength=n_cls)
                col_counts[j] = np.bincount(self.object_colors[objs], minlength=n_col)
            self._counts = (cls_counts / (h * w), col_counts / (h * w))
        cls_frac, col_frac = self._counts
        return matmul(Tensor(cls_frac), self.class_emb) + matmul(Tensor(col_frac), self.color_emb)

    def gather_pixels(self, flat_index: np.ndarray, valid: np.ndarray) -> Tensor:
        """Features at rows ``m * H * W + v * W + u`` of the stacked maps."""
        objs = self.pixel_objects.reshape(-1)[np.where(valid, flat_index, 0)]
        mask = valid & (objs >= 0)
        return self._lookup(objs, mask)


def encode_image_features(sample, view_index: int, params: ParamSet) -> Tensor:
    """Feature map ``(H, W, D_i)`` of one view of ``sample``."""
    return ImageFeatures(sample.pixel_objects, sample.object_classes, sample.object_colors, params).view_map(view_index)


def encode_views(sample, params: ParamSet, count: int | None = None) -> ImageFeatures:
    feats = ImageFeatures(sample.pixel_objects, sample.object_classes, sample.object_colors, params)
    return feats if count is None else feats.select_views(count)


def encode_text(tokens, params: ParamSet, max_tokens: int) -> tuple[Tensor, np.ndarray]:
    """Token + index embeddings, padded to ``max_tokens``; mask is false on padding."""
    ids = np.asarray(tokens, dtype=np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= VOCAB_SIZE):
        raise ArgumentError("unknown token id")
    if ids.size > max_tokens:
        raise ArgumentError(f"{ids.size} tokens exceed max_tokens={max_tokens}")
    pos = params["txt.pos_emb"]
    if max_tokens > pos.shape[0]:
        raise ArgumentError(f"max_tokens={max_tokens} exceeds the {pos.shape[0]} index embeddings")
    padded = np.full(max_tokens, PAD, dtype=np.int64)
    padded[: ids.size] = ids
    mask = padded != PAD
    z_t = gather(params["txt.tok_emb"], padded) + (pos if max_tokens == pos.shape[0] else pos[:max_tokens])
    return z_t, mask


def point_inputs(points: np.ndarray, config: RunConfig) -> np.ndarray:
    """xyz scaled to [-1, 1] over the room, rgb mapped to [-1, 1] (or zeroed)."""
    half = config.room_size / 2
    xyz = points[:, :3] / np.array([half, half, config.room_height / 2]) - np.array([0.0, 0.0, 1.0])
    rgb = points[:, 3:6] * 2.0 - 1.0 if config.point_rgb else np.zeros((len(points), 3))
    return np.concatenate([xyz, rgb], axis=1)


def select_seed_points(points: np.ndarray, n_p: int, training: bool, rng: np.random.Generator | None = None) -> np.ndarray:
    n = len(points)
    if n < n_p:
        raise ArgumentError(f"{n} points cannot supply {n_p} seed points")
    if training:
        if rng is None:
            raise ArgumentError("training-mode sampling needs an rng")
        return np.sort(rng.choice(n, size=n_p, replace=False))
    return fps(points[:, :3], n_p, 0)


def seed_point_features(points: np.ndarray, config: RunConfig, params: ParamSet, training: bool = False,
                        rng: np.random.Generator | None = None, index: np.ndarray | None = None):
    """Returns ``(Z_p, coords, index)`` for ``N_p`` sampled seed points."""
    if index is None:
        index = select_seed_points(points, config.n_p, training, rng)
    inputs = Tensor(point_inputs(points[index], config))
    return mlp2(inputs, params, "pts"), points[index, :3], index


def camera_views(sample, count: int | None = None) -> list[CameraView]:
    return sample.views if count is None else sample.views[:count]

