"""Command-line entry point.

Every command prints one JSON record to stdout and a short plain-text summary
to stderr. Configuration flags mirror :class:`RunConfig` fields
(``--d-m 64``, ``--no-tgmf``, ``--templates what_color,is_there``); they are
applied on top of ``--config FILE`` (or the checkpoint's stored config).
"""

from __future__ import annotations

import argparse
import json
import sys
import typing
from dataclasses import fields
from pathlib import Path

from .config import RunConfig
from .errors import ArgumentError, DSPNetError
from .gradsuite import CASES, run_suite
from .scenegen.fileio import read_dataset, write_dataset
from .scenegen.scene import generate_split
from .training import bench_latency, evaluate, inspect_views, load_checkpoint, train

SPLITS = ("train", "val", "test")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", type=Path, help="JSON config file applied before individual flags")
    hints = typing.get_type_hints(RunConfig)
    for f in fields(RunConfig):
        hint = hints[f.name]
        if hint is bool:
            group.add_argument(_flag(f.name), dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif f.name == "templates":
            group.add_argument(_flag(f.name), dest=f.name, default=None,
                               type=lambda s: tuple(t for t in s.split(",") if t), help="comma-separated")
        else:
            kind = int if hint is int else float if hint in (float, typing.Optional[float]) else str
            group.add_argument(_flag(f.name), dest=f.name, type=kind, default=None)


def config_from_args(args: argparse.Namespace, base: RunConfig | None = None) -> RunConfig:
    config = base or RunConfig()
    if getattr(args, "config", None):
        config = RunConfig.load(args.config)
    changes = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name, None) is not None}
    return config.replace(**changes) if changes else config


def _samples(args: argparse.Namespace, config: RunConfig, split: str):
    if getattr(args, "data", None):
        splits, _ = read_dataset(args.data)
        if split not in splits:
            raise ArgumentError(f"manifest has no split {split!r}")
        return splits[split]
    return generate_split(config, split)


def _load(args: argparse.Namespace):
    """Checkpoint parameters with the stored config, updated by any flags."""
    _, stored = load_checkpoint(args.checkpoint)
    return load_checkpoint(args.checkpoint, config_from_args(args, stored))


def _emit(record: dict, summary: str) -> None:
    json.dump(record, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    sys.stderr.write(summary.rstrip() + "\n")


def cmd_generate(args) -> None:
    config = config_from_args(args)
    splits = {s: generate_split(config, s) for s in args.splits.split(",")}
    manifest = write_dataset(args.out, config, splits)
    counts = {s: len(v) for s, v in splits.items()}
    _emit({"command": "generate", "manifest": str(manifest), "counts": counts, "config": config.to_dict()},
          f"wrote {sum(counts.values())} samples ({counts}) to {args.out}")


def cmd_train(args) -> None:
    config = config_from_args(args)
    samples = _samples(args, config, "train")

    def log(record):
        em = record.get("train", {}).get("em", {}).get("em@1")
        tail = "" if em is None else f"  train EM@1 {em:.3f}"
        sys.stderr.write(f"epoch {record['epoch']:4d}  loss {record['train_loss']:.4f}{tail}\n")

    result = train(config, args.out, samples, log=None if args.quiet else log)
    final = result.metrics[-1].get("train") if result.metrics else None
    summary = f"checkpoint {result.checkpoint}"
    if final:
        summary += f"  final train EM@1 {final['em']['em@1']:.4f}"
    _emit({"command": "train", "checkpoint": str(result.checkpoint), "epochs": result.metrics,
           "config": config.to_dict()}, summary)


def cmd_evaluate(args) -> None:
    params, config = _load(args)
    report = evaluate(params, config, _samples(args, config, args.split), _int_list(args.ks))
    ems = "  ".join(f"{k} {v:.4f}" for k, v in report["em"].items())
    _emit({"command": "evaluate", "split": args.split, **report, "config": config.to_dict()},
          f"{args.split}: n={report['n']}  {ems}  loss {report['loss']['total']:.4f}")


def cmd_inspect_views(args) -> None:
    params, config = _load(args)
    samples = _samples(args, config, args.split)
    if not 0 <= args.index < len(samples):
        raise ArgumentError(f"sample index {args.index} out of range (0..{len(samples) - 1})")
    sample = samples[args.index]
    record = inspect_views(params, config, sample)
    weights = " ".join(f"{w:.3f}" for w in record["weights"])
    _emit({"command": "inspect-views", "split": args.split, "index": args.index, "seed": sample.seed,
           "question_index": sample.question_index, **record, "config": config.to_dict()},
          f"view weights [{weights}]  argmax view {record['argmax_view']}")


def cmd_bench_latency(args) -> None:
    params, config = _load(args)
    record = bench_latency(params, config, _int_list(args.views), args.repetitions, args.scene_seed)
    lines = [f"{r['views']:3d} views: {r['mean_ms']:.2f} +- {r['std_ms']:.2f} ms" for r in record["results"]]
    _emit({"command": "bench-latency", **record, "config": config.to_dict()}, "\n".join(lines))


def cmd_grad_check(args) -> None:
    cases = args.cases.split(",") if args.cases else list(CASES)
    unknown = set(cases) - set(CASES)
    if unknown:
        raise ArgumentError(f"unknown gradient cases {sorted(unknown)}; choose from {list(CASES)}")
    record = run_suite(range(args.seeds), cases, args.eps, args.tolerance)
    worst: dict[str, float] = {}
    for r in record["results"]:
        worst[r["case"]] = max(worst.get(r["case"], 0.0), r["max_rel_error"])
    lines = [f"{'PASS' if v <= args.tolerance else 'FAIL'}  {k:16s} worst {v:.2e}" for k, v in worst.items()]
    lines.append(f"{record['seconds']:.1f}s")
    _emit({"command": "grad-check", **record}, "\n".join(lines))
    if not record["pass"]:
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dspnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--splits", default=",".join(SPLITS))
    add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train and write checkpoint + metrics")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--data", type=Path, help="dataset manifest (default: generate from seeds)")
    p.add_argument("--quiet", action="store_true")
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "EM@k and loss report"),
                                 ("inspect-views", cmd_inspect_views, "per-view fusion weights for one sample")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint", type=Path, required=True)
        p.add_argument("--data", type=Path)
        p.add_argument("--split", default="val" if name == "evaluate" else "test", choices=SPLITS)
        if name == "evaluate":
            p.add_argument("--ks", default="1,10")
        else:
            p.add_argument("--index", type=int, default=0)
        add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("bench-latency", help="inference time per sample against view count")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--views", default="10,15,20")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--scene-seed", type=int, default=0, help="seed of the benchmark scene")
    add_config_flags(p)
    p.set_defaults(func=cmd_bench_latency)

    p = sub.add_parser("grad-check", help="finite-difference gradient suite")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--cases", default="", help=f"comma-separated subset of {','.join(CASES)}")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except DSPNetError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
