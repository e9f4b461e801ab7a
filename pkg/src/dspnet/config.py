"""Run configuration: dimensions, ablation toggles, optimizer and dataset settings."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError

TEMPLATES = ("what_color", "how_many", "closest", "is_there")
TASKS = ("vqa", "sqa")
MAX_CLASSES = 8
MAX_COLORS = 8

# disjoint seed ranges per split
SPLIT_OFFSETS = {"train": 0, "val": 1_000_000, "test": 2_000_000}


@dataclass
class RunConfig:
    # feature widths and extents
    d_i: int = 32
    d_p: int = 32
    d_m: int = 64
    d_k: int = 32
    n_p: int = 512
    k: int = 64
    m: int = 4
    layers: int = 2
    heads: int = 0  # 0 -> max(1, d_m // 32)
    n_classes: int = 5
    n_colors: int = 6
    max_count: int = 3
    height: int = 224
    width: int = 224
    n_points: int = 2048
    max_tokens: int = 16

    # ablation toggles; "off" falls back to the plain baselines
    tgmf: bool = True  # off: masked mean over views
    advp: bool = True  # off: gates pinned to 1 (concatenation + projection)
    mcgr: bool = True  # off: no cross-attention sub-layer
    images: bool = True  # off: no multi-view input at all ("w/o 2D")
    point_rgb: bool = True  # feed point colors to the point encoder

    task: str = "vqa"
    lambda1: float = 1.0
    lambda2: float = 1.0
    depth_tol: float = 0.1
    loc_radius: float = 0.3

    # optimizer
    lr_peak: float = 2e-3
    lr_base: float = 2e-4
    warmup_steps: int = 20
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    text_lr_scale: float = 1.0

    # seeds
    seed: int = 0
    data_seed: int = 0

    # synthetic data
    train_scenes: int = 32
    val_scenes: int = 8
    test_scenes: int = 8
    questions_per_scene: int = 4
    templates: tuple[str, ...] = TEMPLATES
    balanced: bool = True
    min_objects: int = 3
    max_objects: int = 7
    room_size: float = 5.0
    room_height: float = 2.5

    # schedule
    epochs: int = 20
    eval_every: int = 1
    stop_at_em1: float | None = None

    def __post_init__(self):
        self.templates = tuple(self.templates)
        self.validate()

    @property
    def n_answers(self) -> int:
        return self.n_colors + self.max_count + 2 + self.n_classes

    @property
    def n_heads(self) -> int:
        return self.heads or max(1, self.d_m // 32)

    def validate(self) -> None:
        extents = ("d_i", "d_p", "d_m", "d_k", "n_p", "k", "m", "layers", "n_classes", "n_colors",
                   "max_count", "height", "width", "n_points", "max_tokens", "batch_size",
                   "questions_per_scene", "min_objects")
        for name in extents:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.k > self.n_p:
            raise ConfigError(f"k={self.k} exceeds n_p={self.n_p}")
        if self.n_p > self.n_points:
            raise ConfigError(f"n_p={self.n_p} exceeds n_points={self.n_points}")
        if self.d_m % self.n_heads:
            raise ConfigError(f"d_m={self.d_m} not divisible by {self.n_heads} heads")
        if self.n_classes > MAX_CLASSES or self.n_colors > MAX_COLORS:
            raise ConfigError("class/color vocabulary too large")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        unknown = set(self.templates) - set(TEMPLATES)
        if unknown or not self.templates:
            raise ConfigError(f"bad templates {sorted(unknown) or '(none)'}")
        if self.max_objects < self.min_objects:
            raise ConfigError("max_objects < min_objects")
        if self.max_objects > self.n_classes * self.n_colors:
            raise ConfigError("more objects than distinct class/color pairs")
        if self.depth_tol <= 0 or self.loc_radius <= 0:
            raise ConfigError("tolerances must be positive")
        for name in ("train_scenes", "val_scenes", "test_scenes", "epochs", "warmup_steps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return RunConfig.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["templates"] = list(self.templates)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def model_signature(self) -> dict[str, Any]:
        """Fields that fix parameter shapes; must agree between checkpoint and run."""
        keys = ("d_i", "d_p", "d_m", "d_k", "layers", "n_classes", "n_colors", "max_count", "max_tokens")
        return {k: getattr(self, k) for k in keys}


def smoke_config(**changes) -> RunConfig:
    """Tiny dimensions for fast end-to-end checks."""
    base = dict(d_i=8, d_p=8, d_m=8, d_k=4, n_p=48, k=8, m=3, layers=1, heads=1, height=16, width=16,
                n_points=96, train_scenes=2, val_scenes=1, test_scenes=1, questions_per_scene=2, epochs=1)
    base.update(changes)
    return RunConfig(**base)

