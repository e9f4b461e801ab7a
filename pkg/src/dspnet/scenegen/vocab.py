"""Closed vocabularies for the box-world scenes."""

from __future__ import annotations

import numpy as np

CLASS_NAMES = ("chair", "table", "bed", "sofa", "cabinet", "desk", "lamp", "shelf")

# nominal (x, y, z) extents in meters
CLASS_SIZES = {
    "chair": (0.5, 0.5, 0.9),
    "table": (1.0, 0.7, 0.75),
    "bed": (1.3, 0.9, 0.5),
    "sofa": (1.1, 0.6, 0.8),
    "cabinet": (0.6, 0.5, 1.2),
    "desk": (0.9, 0.6, 0.75),
    "lamp": (0.3, 0.3, 1.4),
    "shelf": (0.8, 0.35, 1.5),
}

COLOR_NAMES = ("red", "green", "blue", "yellow", "white", "black", "orange", "purple")
COLOR_RGB = {
    "red": (0.85, 0.1, 0.1),
    "green": (0.1, 0.7, 0.2),
    "blue": (0.1, 0.2, 0.85),
    "yellow": (0.9, 0.85, 0.1),
    "white": (0.95, 0.95, 0.95),
    "black": (0.05, 0.05, 0.05),
    "orange": (0.95, 0.5, 0.05),
    "purple": (0.55, 0.1, 0.7),
}

GRID_BINS = 4
WORDS = (
    "what", "color", "is", "the", "how", "many", "are", "there", "which", "object",
    "closest", "to", "a", "standing", "at", "facing",
)
PAD = 0
TOKENS = ("<pad>",) + WORDS + tuple(f"x{i}" for i in range(GRID_BINS)) + tuple(f"y{i}" for i in range(GRID_BINS)) \
    + CLASS_NAMES + COLOR_NAMES
TOKEN_ID = {t: i for i, t in enumerate(TOKENS)}
VOCAB_SIZE = len(TOKENS)

# question template -> question-type group used in metric breakdowns
TEMPLATE_TYPES = {"what_color": "What", "how_many": "How", "closest": "Which", "is_there": "Is"}


def tokenize(words) -> np.ndarray:
    return np.array([TOKEN_ID[w] for w in words], dtype=np.int64)


def detokenize(ids) -> list[str]:
    return [TOKENS[int(i)] for i in ids if int(i) != PAD]


class AnswerVocab:
    """Answer list: colors, counts ``1..max_count``, yes/no, classes."""

    def __init__(self, n_classes: int, n_colors: int, max_count: int):
        self.classes = CLASS_NAMES[:n_classes]
        self.colors = COLOR_NAMES[:n_colors]
        self.max_count = max_count
        self.answers = self.colors + tuple(str(i) for i in range(1, max_count + 1)) + ("yes", "no") + self.classes
        self.index = {a: i for i, a in enumerate(self.answers)}

    def __len__(self) -> int:
        return len(self.answers)

    def for_template(self, template: str) -> tuple[str, ...]:
        if template == "what_color":
            return self.colors
        if template == "how_many":
            return tuple(str(i) for i in range(1, self.max_count + 1))
        if template == "is_there":
            return ("yes", "no")
        if template == "closest":
            return self.classes
        raise KeyError(template)
