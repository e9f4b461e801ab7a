"""Synthetic box-world scenes, questions and encoder stand-ins."""

from .encoders import ImageFeatures, encode_image_features, encode_text, seed_point_features
from .render import render_depth, render_view
from .scene import (
    SceneSample,
    SceneSpec,
    generate_scene,
    generate_scene_samples,
    generate_split,
    split_seeds,
)
from .vocab import AnswerVocab

__all__ = [
    "AnswerVocab",
    "ImageFeatures",
    "SceneSample",
    "SceneSpec",
    "encode_image_features",
    "encode_text",
    "generate_scene",
    "generate_scene_samples",
    "generate_split",
    "render_depth",
    "render_view",
    "seed_point_features",
    "split_seeds",
]
