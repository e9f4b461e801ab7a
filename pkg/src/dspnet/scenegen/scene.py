"""Deterministic box-world scenes with templated questions.

A scene is a square room holding axis-aligned boxes, each with a class and a
color; (class, color) pairs are unique within a scene. Points are sampled on
the visible box faces, cameras sit on a ring looking inward, and every
question's answer follows exactly from the object list.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..config import SPLIT_OFFSETS, RunConfig
from ..errors import ArgumentError
from ..geometry import CameraView
from .render import render_view
from .vocab import CLASS_NAMES, CLASS_SIZES, COLOR_NAMES, COLOR_RGB, GRID_BINS, AnswerVocab, tokenize

MAX_LAYOUT_ATTEMPTS = 5000
PLACEMENT_GAP = 0.15
WALL_MARGIN = 0.1
CAMERA_RING_RADIUS = 6.0
CAMERA_HEIGHT = 3.0
CAMERA_TARGET = np.array([0.0, 0.0, 0.4])
FIELD_OF_VIEW_DEG = 56.0
COLOR_NOISE = 0.02


@dataclass
class SceneObject:
    class_id: int
    color_id: int
    center: np.ndarray
    size: np.ndarray

    @property
    def class_name(self) -> str:
        return CLASS_NAMES[self.class_id]

    @property
    def color_name(self) -> str:
        return COLOR_NAMES[self.color_id]


@dataclass
class SceneSpec:
    room_size: float
    room_height: float
    objects: list[SceneObject]
    seed: int

    def class_counts(self, n_classes: int) -> np.ndarray:
        return np.bincount([o.class_id for o in self.objects], minlength=n_classes)


@dataclass
class Question:
    template: str
    words: tuple[str, ...]
    answer: str
    refs: tuple[int, ...]  # indices into SceneSpec.objects
    ref_class: int | None


@dataclass
class SceneSample:
    points: np.ndarray  # (N, 6) xyz + rgb
    point_objects: np.ndarray  # (N,) object index per point
    views: list[CameraView]  # depth maps filled, no feature maps
    pixel_objects: np.ndarray  # (M, H, W) front-most object index, -1 empty
    spec: SceneSpec
    question: np.ndarray  # token ids
    template: str
    answer: int
    answer_labels: np.ndarray  # (N_a,) bool
    class_labels: np.ndarray  # (N_cls,) bool, all false when no reference
    reference_centers: np.ndarray  # (G, 3)
    situation: np.ndarray | None = None
    seed: int = 0
    question_index: int = 0
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def tokens(self) -> np.ndarray:
        if self.situation is None:
            return self.question
        return np.concatenate([self.situation, self.question])

    @property
    def object_classes(self) -> np.ndarray:
        return np.array([o.class_id for o in self.spec.objects], dtype=np.int64)

    @property
    def object_colors(self) -> np.ndarray:
        return np.array([o.color_id for o in self.spec.objects], dtype=np.int64)

    @property
    def gold(self) -> set[int]:
        return set(np.flatnonzero(self.answer_labels).tolist())

    @property
    def key(self) -> tuple[int, int]:
        return self.seed, self.question_index


# -- layout ---------------------------------------------------------------------


def _overlaps(center, size, placed) -> bool:
    for c, s in placed:
        if (abs(center[0] - c[0]) < (size[0] + s[0]) / 2 + PLACEMENT_GAP
                and abs(center[1] - c[1]) < (size[1] + s[1]) / 2 + PLACEMENT_GAP):
            return True
    return False


def sample_layout(rng: np.random.Generator, config: RunConfig, seed: int) -> SceneSpec | None:
    """One attempt at a non-overlapping layout; ``None`` when placement fails."""
    half = config.room_size / 2
    n = int(rng.integers(config.min_objects, config.max_objects + 1))
    used: set[tuple[int, int]] = set()
    objects: list[SceneObject] = []
    placed: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(n):
        while True:
            pair = (int(rng.integers(config.n_classes)), int(rng.integers(config.n_colors)))
            if pair not in used:
                used.add(pair)
                break
        size = np.array(CLASS_SIZES[CLASS_NAMES[pair[0]]]) * rng.uniform(0.85, 1.15, size=3)
        if rng.random() < 0.5:
            size[[0, 1]] = size[[1, 0]]
        size = np.minimum(size, [config.room_size - 2 * WALL_MARGIN] * 2 + [config.room_height])
        for _ in range(50):
            lo = -half + WALL_MARGIN + size[:2] / 2
            xy = rng.uniform(lo, -lo)
            center = np.array([xy[0], xy[1], size[2] / 2])
            if not _overlaps(center, size, placed):
                break
        else:
            return None
        placed.append((center, size))
        objects.append(SceneObject(pair[0], pair[1], center, size))
    return SceneSpec(config.room_size, config.room_height, objects, seed)


# -- questions -------------------------------------------------------------------


def candidate_questions(spec: SceneSpec, vocab: AnswerVocab, templates: Sequence[str]) -> list[Question]:
    """Every answerable question of the allowed templates for this scene."""
    n_classes = len(vocab.classes)
    counts = spec.class_counts(n_classes)
    objs = spec.objects
    out: list[Question] = []
    if "what_color" in templates:
        for c in np.flatnonzero(counts == 1):
            i = next(j for j, o in enumerate(objs) if o.class_id == c)
            out.append(Question("what_color", ("what", "color", "is", "the", CLASS_NAMES[c]),
                                objs[i].color_name, (i,), int(c)))
    if "how_many" in templates:
        for c in np.flatnonzero((counts >= 1) & (counts <= vocab.max_count)):
            refs = tuple(j for j, o in enumerate(objs) if o.class_id == c)
            out.append(Question("how_many", ("how", "many", CLASS_NAMES[c], "are", "there"),
                                str(int(counts[c])), refs, int(c)))
    if "closest" in templates and len(objs) > 1:
        centers = np.array([o.center for o in objs])
        for c in np.flatnonzero(counts == 1):
            i = next(j for j, o in enumerate(objs) if o.class_id == c)
            dist = np.linalg.norm(centers - centers[i], axis=1)
            dist[i] = np.inf
            order = np.argsort(dist, kind="stable")
            if len(objs) > 2 and dist[order[1]] - dist[order[0]] < 1e-6:
                continue
            j = int(order[0])
            out.append(Question("closest", ("which", "object", "is", "closest", "to", "the", CLASS_NAMES[c]),
                                objs[j].class_name, (j,), objs[j].class_id))
    if "is_there" in templates:
        for c in range(n_classes):
            for col in range(len(vocab.colors)):
                refs = tuple(j for j, o in enumerate(objs) if o.class_id == c and o.color_id == col)
                out.append(Question("is_there", ("is", "there", "a", COLOR_NAMES[col], CLASS_NAMES[c]),
                                    "yes" if refs else "no", refs, c if refs else None))
    return out


def allowed_answers(vocab: AnswerVocab, templates: Sequence[str]) -> list[str]:
    allowed = set()
    for t in templates:
        allowed.update(vocab.for_template(t))
    return [a for a in vocab.answers if a in allowed]


def _situation_words(spec: SceneSpec, rng: np.random.Generator) -> tuple[str, ...]:
    xb, yb = rng.integers(GRID_BINS, size=2)
    target = spec.objects[int(rng.integers(len(spec.objects)))]
    return ("standing", "at", f"x{xb}", f"y{yb}", "facing", "the", target.class_name)


# -- geometry of the scene --------------------------------------------------------


def _faces(obj: SceneObject):
    """Top and four side faces as (origin, edge_a, edge_b)."""
    c, s = obj.center, obj.size
    lo = c - s / 2
    ex, ey, ez = np.diag(s)
    return [
        (lo + ez, ex, ey),
        (lo, ex, ez),
        (lo + ey, ex, ez),
        (lo, ey, ez),
        (lo + ex, ey, ez),
    ]


def sample_points(spec: SceneSpec, n_points: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    faces = []
    owners = []
    for i, obj in enumerate(spec.objects):
        for face in _faces(obj):
            faces.append(face)
            owners.append(i)
    areas = np.array([np.linalg.norm(a) * np.linalg.norm(b) for _, a, b in faces])
    which = rng.choice(len(faces), size=n_points, p=areas / areas.sum())
    st = rng.random((n_points, 2))
    origin = np.array([f[0] for f in faces])[which]
    edge_a = np.array([f[1] for f in faces])[which]
    edge_b = np.array([f[2] for f in faces])[which]
    xyz = origin + st[:, :1] * edge_a + st[:, 1:] * edge_b
    owner = np.array(owners, dtype=np.int64)[which]
    base = np.array([COLOR_RGB[spec.objects[i].color_name] for i in range(len(spec.objects))])[owner]
    rgb = np.clip(base + rng.normal(0.0, COLOR_NOISE, size=base.shape), 0.0, 1.0)
    return np.concatenate([xyz, rgb], axis=1), owner


def look_at(eye: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World-to-camera transform, x right / y down / z forward."""
    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, [0.0, 0.0, 1.0])
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    ext = np.eye(4)
    ext[:3, :3] = rot
    ext[:3, 3] = -rot @ eye
    return ext


def camera_ring(m: int, width: int, height: int, radius: float = CAMERA_RING_RADIUS) -> list[CameraView]:
    f = (width / 2) / np.tan(np.radians(FIELD_OF_VIEW_DEG) / 2)
    views = []
    for j in range(m):
        angle = 2 * np.pi * j / m + np.pi / 4
        eye = np.array([radius * np.cos(angle), radius * np.sin(angle), CAMERA_HEIGHT])
        views.append(CameraView(f, f, width / 2, height / 2, look_at(eye, CAMERA_TARGET), width, height))
    return views


# -- assembly ----------------------------------------------------------------------


def _choose_questions(spec, vocab, config, rng, targets):
    cands = candidate_questions(spec, vocab, config.templates)
    if targets is None:
        by_template: dict[str, list[Question]] = {}
        for q in cands:
            by_template.setdefault(q.template, []).append(q)
        if not by_template:
            return None
        names = sorted(by_template)
        chosen = []
        for _ in range(config.questions_per_scene):
            pool = by_template[names[int(rng.integers(len(names)))]]
            chosen.append(pool[int(rng.integers(len(pool)))])
        return chosen
    by_answer: dict[str, list[Question]] = {}
    for q in cands:
        by_answer.setdefault(q.answer, []).append(q)
    if any(t not in by_answer for t in targets):
        return None
    chosen = []
    for t in targets:
        pool = [q for q in by_answer[t] if q not in chosen] or by_answer[t]
        chosen.append(pool[int(rng.integers(len(pool)))])
    return chosen


def _scene_layout(seed: int, config: RunConfig):
    rng = np.random.default_rng([config.data_seed, seed])
    vocab = AnswerVocab(config.n_classes, config.n_colors, config.max_count)
    targets = None
    if config.balanced:
        allowed = allowed_answers(vocab, config.templates)
        targets = [allowed[int(i)] for i in rng.integers(len(allowed), size=config.questions_per_scene)]
    for _ in range(MAX_LAYOUT_ATTEMPTS):
        spec = sample_layout(rng, config, seed)
        if spec is None:
            continue
        questions = _choose_questions(spec, vocab, config, rng, targets)
        if questions is not None:
            return spec, questions, vocab, rng
    raise ArgumentError(f"no layout satisfies the configuration for seed {seed}")


def generate_scene_samples(seed: int, config: RunConfig) -> list[SceneSample]:
    """All ``questions_per_scene`` samples of one scene; pure in (seed, config)."""
    spec, questions, vocab, rng = _scene_layout(seed, config)
    points, owners = sample_points(spec, config.n_points, rng)
    views = camera_ring(config.m, config.width, config.height)
    pixel_objects = np.empty((config.m, config.height, config.width), dtype=np.int64)
    rendered = []
    for j, view in enumerate(views):
        depth, labels = render_view(points, owners, view)
        pixel_objects[j] = labels
        rendered.append(view.with_maps(depth_map=depth))

    samples = []
    cache: dict = {}  # derived data that depends only on the scene, shared by its questions
    for qi, q in enumerate(questions):
        situation = None
        class_labels = np.zeros(config.n_classes, dtype=bool)
        centers = np.zeros((0, 3))
        if config.task == "sqa":
            situation = tokenize(_situation_words(spec, rng))
        else:
            if q.ref_class is not None:
                class_labels[q.ref_class] = True
            centers = np.array([spec.objects[i].center for i in q.refs]).reshape(-1, 3)
        answer = vocab.index[q.answer]
        labels = np.zeros(len(vocab), dtype=bool)
        labels[answer] = True
        samples.append(SceneSample(
            points=points,
            point_objects=owners,
            views=rendered,
            pixel_objects=pixel_objects,
            spec=spec,
            question=tokenize(q.words),
            template=q.template,
            answer=answer,
            answer_labels=labels,
            class_labels=class_labels,
            reference_centers=centers,
            situation=situation,
            seed=seed,
            question_index=qi,
            cache=cache,
        ))
        if len(samples[-1].tokens) > config.max_tokens:
            raise ArgumentError(f"question needs {len(samples[-1].tokens)} tokens, max_tokens={config.max_tokens}")
    return samples


def generate_scene(seed: int, config: RunConfig, question_index: int = 0) -> SceneSample:
    if not 0 <= question_index < config.questions_per_scene:
        raise ArgumentError(f"question index {question_index} out of range")
    return generate_scene_samples(seed, config)[question_index]


def split_seeds(config: RunConfig, split: str, count: int | None = None) -> list[int]:
    if split not in SPLIT_OFFSETS:
        raise ArgumentError(f"unknown split {split!r}")
    if count is None:
        count = getattr(config, f"{split}_scenes")
    return [SPLIT_OFFSETS[split] + i for i in range(count)]


def generate_split(config: RunConfig, split: str, count: int | None = None) -> list[SceneSample]:
    samples: list[SceneSample] = []
    for seed in split_seeds(config, split, count):
        samples.extend(generate_scene_samples(seed, config))
    return samples
