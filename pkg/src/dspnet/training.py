"""Training loop, evaluation, view-weight inspection and latency benchmark."""

from __future__ import annotations

import gc
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import RunConfig
from .errors import ConfigError, NumericError
from .heads import em_at_k
from .model import check_compatible, forward, init_params, view_weights
from .scenegen.scene import SceneSample, generate_scene_samples, generate_split
from .scenegen.vocab import TEMPLATE_TYPES
from .tensorcore import AdamW, ParamSet, Tensor, WarmupCosine, checkpoint

DEFAULT_KS = (1, 10)
LOSS_KEYS = ("answer", "obj_class", "loc", "total")


class TrainingDiverged(NumericError):
    """Non-finite loss or gradient during training."""


@dataclass
class TrainResult:
    params: ParamSet
    metrics: list[dict] = field(default_factory=list)
    checkpoint: Path | None = None


def save_checkpoint(path: str | Path, params: ParamSet, config: RunConfig) -> Path:
    return checkpoint.save(path, params.state(), config.to_dict())


def load_checkpoint(path: str | Path, config: RunConfig | None = None) -> tuple[ParamSet, RunConfig]:
    """Parameters and configuration from ``path``.

    With ``config`` given, its parameter shapes must agree with the stored ones
    (ConfigError otherwise) and it is returned in place of the stored config.
    """
    state, stored = checkpoint.load(path)
    saved = RunConfig.from_dict(stored) if stored else None
    run = config or saved
    if run is None:
        raise ConfigError("checkpoint carries no configuration; pass one explicitly")
    params = ParamSet({k: _leaf(v) for k, v in state.items()})
    check_compatible(params, run)
    return params, run


def _leaf(arr: np.ndarray) -> Tensor:
    return Tensor(arr, requires_grad=True)


def _text_scale(config: RunConfig) -> Callable[[str], float]:
    return lambda name: config.text_lr_scale if name.startswith("enc.txt.") else 1.0


def evaluate(params: ParamSet, config: RunConfig, samples: Sequence[SceneSample], ks: Sequence[int] = DEFAULT_KS) -> dict:
    """EM@k, mean loss components and per-question-type EM@1 in inference mode."""
    ks = [k for k in ks if k <= config.n_answers] or [1]
    hits = {k: 0 for k in ks}
    losses = {key: 0.0 for key in LOSS_KEYS}
    per_type: dict[str, list[int]] = {}
    for sample in samples:
        out = forward(params, sample, config)
        gold = sample.gold
        for k in ks:
            hits[k] += em_at_k(out.outputs.answer_logits, gold, k)
        terms = out.losses
        for key in LOSS_KEYS:
            losses[key] += getattr(terms, key).item()
        group = per_type.setdefault(TEMPLATE_TYPES[sample.template], [0, 0])
        group[0] += 1
        group[1] += em_at_k(out.outputs.answer_logits, gold, 1)
    n = len(samples)
    return {
        "n": n,
        "em": {f"em@{k}": hits[k] / n if n else 0.0 for k in ks},
        "loss": {key: losses[key] / n if n else 0.0 for key in LOSS_KEYS},
        "per_type": {t: {"n": c, "em@1": h / c} for t, (c, h) in sorted(per_type.items())},
    }


def train(config: RunConfig, out_dir: str | Path | None = None, samples: Sequence[SceneSample] | None = None,
          log: Callable[[dict], None] | None = None) -> TrainResult:
    """Deterministic training run on the train split (or ``samples``).

    After each evaluated epoch the model is scored on the training samples in
    inference mode; ``stop_at_em1`` ends the run once train EM@1 reaches it.
    Writes ``checkpoint.dspn`` and ``metrics.json`` into ``out_dir`` when given.
    """
    if samples is None:
        samples = generate_split(config, "train")
    params = init_params(config)
    result = TrainResult(params)
    n = len(samples)
    steps_per_epoch = math.ceil(n / config.batch_size) if n else 0
    schedule = WarmupCosine(config.lr_base, config.lr_peak, config.warmup_steps, config.epochs * steps_per_epoch)
    opt = AdamW(params, schedule, (config.beta1, config.beta2), config.adam_eps, config.weight_decay,
                _text_scale(config))
    rng = np.random.default_rng([config.seed, 1])

    for epoch in range(config.epochs if n else 0):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            lr = opt.current_lr()
            params.zero_grad()
            for i in batch:
                try:
                    out = forward(params, samples[i], config, training=True, rng=rng)
                    (out.losses.total * (1.0 / len(batch))).backward()
                except NumericError as exc:
                    raise TrainingDiverged(f"epoch {epoch} step {opt.step_count}: {exc}") from exc
                epoch_loss += out.losses.total.item()
            for name in params:
                g = params[name].grad
                if g is not None and not np.isfinite(g).all():
                    raise TrainingDiverged(f"epoch {epoch} step {opt.step_count}: non-finite gradient in {name}")
            opt.step()
        record = {"epoch": epoch + 1, "lr": lr, "train_loss": epoch_loss / n}
        last = epoch + 1 == config.epochs
        if last or (epoch + 1) % max(config.eval_every, 1) == 0 or config.stop_at_em1 is not None:
            record["train"] = evaluate(params, config, samples)
        result.metrics.append(record)
        if log:
            log(record)
        if config.stop_at_em1 is not None and "train" in record and record["train"]["em"]["em@1"] >= config.stop_at_em1:
            break

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.checkpoint = save_checkpoint(out / "checkpoint.dspn", params, config)
        (out / "metrics.json").write_text(json.dumps({"config": config.to_dict(), "epochs": result.metrics},
                                                     indent=2, sort_keys=True) + "\n")
    return result


def inspect_views(params: ParamSet, config: RunConfig, sample: SceneSample) -> dict:
    """View logits, their softmax, the top view and per-point validity counts."""
    if not (config.images and config.tgmf):
        raise ConfigError("view inspection needs images and text-guided fusion enabled")
    out = forward(params, sample, config)
    weights = view_weights(out.h_s)
    valid = out.view_valid
    return {
        "h_s": out.h_s.data.tolist(),
        "weights": weights.tolist(),
        "argmax_view": int(np.argmax(weights)),
        "valid_points_per_view": valid.sum(axis=0).tolist(),
        "points_by_valid_view_count": np.bincount(valid.sum(axis=1), minlength=valid.shape[1] + 1).tolist(),
        "n_points": int(valid.shape[0]),
    }


def bench_latency(params: ParamSet, config: RunConfig, view_counts: Sequence[int], repetitions: int = 5,
                  seed: int = 0, sample: SceneSample | None = None) -> dict:
    """Mean and standard deviation of inference wall time per sample for each view count.

    One scene is rendered with ``max(view_counts)`` cameras; each count uses the
    first views of it. Counts are timed round-robin so drift affects all alike.
    """
    counts = [int(c) for c in view_counts]
    if not counts or min(counts) < 1:
        raise ConfigError("view counts must be positive")
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if sample is None:
        sample = generate_scene_samples(seed, config.replace(m=max(counts), questions_per_scene=1))[0]
    elif max(counts) > len(sample.views):
        raise ConfigError(f"sample has only {len(sample.views)} views")
    times: dict[int, list[float]] = {c: [] for c in counts}
    for c in counts:  # warm-up, also fills the seed-point cache
        forward(params, sample, config, view_count=c)
    enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repetitions):
            for c in counts:
                t0 = time.perf_counter()
                forward(params, sample, config, view_count=c)
                times[c].append(time.perf_counter() - t0)
    finally:
        if enabled:
            gc.enable()
    rows = []
    for c in counts:
        arr = np.array(times[c]) * 1e3
        rows.append({"views": c, "mean_ms": float(arr.mean()), "std_ms": float(arr.std()), "repetitions": repetitions})
    return {"results": rows, "monotone": all(a["mean_ms"] <= b["mean_ms"] for a, b in zip(rows, rows[1:]))}
