"""One-file-per-sample binary scene format and the split manifest.

Every number is 64-bit little-endian (``<u8`` counts, ``<i8`` integers and
booleans, ``<f8`` reals). Layout::

    b"DSPS"  magic, then u64 format version (1)
    u64 n + n bytes       UTF-8 JSON config echo
    i64 seed, i64 question_index, i64 answer
    u64 n + n bytes       UTF-8 template name
    f64 room_size, f64 room_height
    u64 n_objects, then per object: i64 class, i64 color, f64[3] center, f64[3] size
    u64 N, u64 C, f64[N*C] points, i64[N] owning object per point
    u64 M, then per view: f64 fx, fy, cx, cy, f64[16] extrinsics (row-major),
        u64 width, u64 height, f64[H*W] depth, i64[H*W] front-most object (-1 empty)
    u64 n, i64[n] question token ids
    i64 has_situation (0/1), then u64 n, i64[n] situation token ids when present
    u64 n, i64[n] answer labels (0/1)
    u64 n, i64[n] object-class labels (0/1)
    u64 G, f64[G*3] reference centers

Reading a file and writing the result reproduces it byte for byte.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..config import RunConfig
from ..errors import FormatError
from ..geometry import CameraView
from .scene import SceneObject, SceneSample, SceneSpec

MAGIC = b"DSPS"
VERSION = 1
SUFFIX = ".dsps"


class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def u64(self, *values: int) -> None:
        self.buf.write(np.array(values, dtype="<u8").tobytes())

    def i64(self, values) -> None:
        self.buf.write(np.ascontiguousarray(values, dtype="<i8").tobytes())

    def f64(self, values) -> None:
        self.buf.write(np.ascontiguousarray(values, dtype="<f8").tobytes())

    def text(self, s: str) -> None:
        raw = s.encode("utf-8")
        self.u64(len(raw))
        self.buf.write(raw)

    def ints(self, values) -> None:
        arr = np.asarray(values, dtype=np.int64).reshape(-1)
        self.u64(arr.size)
        self.i64(arr)


class _Reader:
    def __init__(self, data: bytes):
        self.view = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.view):
            raise FormatError("scene file truncated")
        out = bytes(self.view[self.pos : self.pos + n])
        self.pos += n
        return out

    def u64(self, count: int = 1):
        arr = np.frombuffer(self.take(8 * count), dtype="<u8")
        return int(arr[0]) if count == 1 else [int(v) for v in arr]

    def i64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<i8").astype(np.int64)

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    def text(self) -> str:
        return self.take(self.u64()).decode("utf-8")

    def ints(self) -> np.ndarray:
        return self.i64(self.u64())


def dumps(sample: SceneSample, config: RunConfig | dict[str, Any] | None = None) -> bytes:
    w = _Writer()
    w.buf.write(MAGIC)
    w.u64(VERSION)
    cfg = config.to_dict() if isinstance(config, RunConfig) else (config or {})
    w.text(json.dumps(cfg, sort_keys=True))
    w.i64([sample.seed, sample.question_index, sample.answer])
    w.text(sample.template)
    spec = sample.spec
    w.f64([spec.room_size, spec.room_height])
    w.u64(len(spec.objects))
    for obj in spec.objects:
        w.i64([obj.class_id, obj.color_id])
        w.f64(obj.center)
        w.f64(obj.size)
    pts = np.asarray(sample.points, dtype=np.float64)
    w.u64(*pts.shape)
    w.f64(pts)
    w.i64(sample.point_objects)
    w.u64(len(sample.views))
    for j, view in enumerate(sample.views):
        w.f64([view.fx, view.fy, view.cx, view.cy])
        w.f64(view.extrinsics)
        w.u64(view.width, view.height)
        w.f64(view.depth_map)
        w.i64(sample.pixel_objects[j])
    w.ints(sample.question)
    if sample.situation is None:
        w.i64([0])
    else:
        w.i64([1])
        w.ints(sample.situation)
    w.ints(sample.answer_labels)
    w.ints(sample.class_labels)
    centers = np.asarray(sample.reference_centers, dtype=np.float64).reshape(-1, 3)
    w.u64(len(centers))
    w.f64(centers)
    return w.buf.getvalue()


def loads(data: bytes) -> tuple[SceneSample, dict[str, Any]]:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("bad scene file magic")
    version = r.u64()
    if version != VERSION:
        raise FormatError(f"unsupported scene file version {version}")
    config = json.loads(r.text())
    seed, question_index, answer = (int(v) for v in r.i64(3))
    template = r.text()
    room_size, room_height = r.f64(2)
    objects = []
    for _ in range(r.u64()):
        class_id, color_id = (int(v) for v in r.i64(2))
        objects.append(SceneObject(class_id, color_id, r.f64(3), r.f64(3)))
    spec = SceneSpec(float(room_size), float(room_height), objects, seed)
    n, c = r.u64(2)
    points = r.f64(n * c).reshape(n, c)
    point_objects = r.i64(n)
    views = []
    pixel_maps = []
    for _ in range(r.u64()):
        fx, fy, cx, cy = (float(v) for v in r.f64(4))
        ext = r.f64(16).reshape(4, 4)
        width, height = r.u64(2)
        depth = r.f64(width * height).reshape(height, width)
        pixel_maps.append(r.i64(width * height).reshape(height, width))
        views.append(CameraView(fx, fy, cx, cy, ext, width, height, depth_map=depth))
    question = r.ints()
    situation = r.ints() if int(r.i64(1)[0]) else None
    answer_labels = r.ints().astype(bool)
    class_labels = r.ints().astype(bool)
    centers = r.f64(3 * r.u64()).reshape(-1, 3)
    if r.pos != len(r.view):
        raise FormatError("trailing bytes after scene sample")
    pixel_objects = np.stack(pixel_maps) if pixel_maps else np.zeros((0, 0, 0), dtype=np.int64)
    sample = SceneSample(points, point_objects, views, pixel_objects, spec, question, template, answer,
                         answer_labels, class_labels, centers, situation, seed, question_index)
    return sample, config


def sample_filename(sample: SceneSample) -> str:
    return f"scene{sample.seed:08d}_q{sample.question_index}{SUFFIX}"


def save_sample(path: str | Path, sample: SceneSample, config: RunConfig | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(sample, config))
    return path


def load_sample(path: str | Path) -> tuple[SceneSample, dict[str, Any]]:
    return loads(Path(path).read_bytes())


def write_dataset(out_dir: str | Path, config: RunConfig, splits: dict[str, Iterable[SceneSample]]) -> Path:
    """One file per sample under ``out_dir/<split>/`` plus ``manifest.json``."""
    out = Path(out_dir)
    manifest: dict[str, Any] = {"format": "dsps", "version": VERSION, "config": config.to_dict(), "splits": {}}
    for split, samples in splits.items():
        entries = []
        for sample in samples:
            rel = Path(split) / sample_filename(sample)
            save_sample(out / rel, sample, config)
            entries.append({"file": rel.as_posix(), "seed": sample.seed, "question_index": sample.question_index,
                            "template": sample.template})
        manifest["splits"][split] = entries
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def read_dataset(manifest_path: str | Path) -> tuple[dict[str, list[SceneSample]], RunConfig]:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    splits = {}
    for split, entries in manifest["splits"].items():
        samples = [load_sample(root / e["file"])[0] for e in entries]
        # questions of one scene share derived caches, as when freshly generated
        caches: dict[int, dict] = {}
        for s in samples:
            s.cache = caches.setdefault(s.seed, {})
        splits[split] = samples
    return splits, RunConfig.from_dict(manifest["config"])
