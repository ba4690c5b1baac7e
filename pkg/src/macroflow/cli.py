"""Command-line interface: gen / train / sample / eval / bench / render.

Every option can also be supplied through --config (a flat JSON object keyed
by option name); explicit command-line values win over config-file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .bench import default_threads, load_bench_spec, run_ablation, write_report
from .core import Canvas, ConfigError, hpwl, in_canvas, is_legal, overlap_ratio, total_overlap
from .io import (
    InstanceFormatError,
    read_config_file,
    read_dataset,
    read_instance,
    read_placement,
    read_trace,
    serialize_trace,
    write_dataset,
    write_placement,
)
from .network import ModelConfig, VelocityModel
from .render import RenderOptions, render_svg, render_trace_svg
from .sampling import PRIOR_KINDS, ProjectionError, SamplerConfig, sample
from .synthgen import GenConfig, GenerationError, generate_dataset
from .training import TrainConfig, train

_GEN_DEFAULTS = {
    "count": 100,
    "seed": 0,
    "mode": "masked",
    "canvas_width": 2.0,
    "canvas_height": 2.0,
    "grid_cols": 64,
    "grid_rows": 64,
    "epsilon": 1e-6,
    "macro_count_min": 8,
    "macro_count_max": 32,
    "macro_size_min": 0.05,
    "macro_size_max": 0.35,
    "pins_min": 2,
    "pins_max": 8,
    "degree_cap": 4,
    "threshold": 0.15,
}

_TRAIN_DEFAULTS = {
    "seed": 0,
    "prior": "uniform",
    "epochs": 20,
    "batch_size": 8,
    "learning_rate": 1e-3,
    "checkpoint_every": 0,
    "hidden_dim": 64,
    "num_blocks": 3,
    "num_heads": 4,
    "time_dim": 32,
    "loss_curve": None,
}

_SAMPLE_DEFAULTS = {
    "seed": 0,
    "steps": 50,
    "prior": "uniform",
    "mode": "hard",
    "grid_cols": 64,
    "grid_rows": 64,
    "boundary_weight": 0.1,
    "trace": None,
}

_RENDER_DEFAULTS = {
    "placement": None,
    "trace": None,
    "nets": False,
    "highlight_overlaps": False,
    "labels": False,
}


def _merge(args: argparse.Namespace, defaults: dict) -> SimpleNamespace:
    """Config-file merge: CLI value > config value > built-in default."""
    cfg = {}
    if getattr(args, "config", None):
        cfg = read_config_file(args.config)
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise ConfigError(f"{args.config}: unknown config keys {sorted(unknown)}")
    merged = {}
    for key, default in defaults.items():
        cli = getattr(args, key, None)
        merged[key] = cli if cli is not None else cfg.get(key, default)
    return SimpleNamespace(**merged)


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; keys mirror the option names")


def _cmd_gen(args) -> int:
    o = _merge(args, _GEN_DEFAULTS)
    config = GenConfig(
        canvas=Canvas(o.canvas_width, o.canvas_height),
        grid_cols=o.grid_cols,
        grid_rows=o.grid_rows,
        epsilon=o.epsilon,
        macro_count=(o.macro_count_min, o.macro_count_max),
        macro_size=(o.macro_size_min, o.macro_size_max),
        pins_per_macro=(o.pins_min, o.pins_max),
        pin_degree_cap=o.degree_cap,
        proximity_threshold=o.threshold,
        seed=o.seed,
    )
    records, stats = generate_dataset(config, o.count, mode=o.mode, seed=o.seed)
    write_dataset(args.out, records, stats)
    print(f"wrote {len(records)} instances to {args.out} "
          f"(mode={o.mode}, mean_macros={stats['mean_macros']:.1f}, empty_netlists={stats['empty_netlists']})")
    return 0


def _cmd_train(args) -> int:
    o = _merge(args, _TRAIN_DEFAULTS)
    records = read_dataset(args.data)
    model = VelocityModel(
        ModelConfig(hidden_dim=o.hidden_dim, num_blocks=o.num_blocks,
                    num_heads=o.num_heads, time_dim=o.time_dim),
        seed=o.seed,
    )
    config = TrainConfig(
        prior=o.prior,
        batch_size=o.batch_size,
        learning_rate=o.learning_rate,
        epochs=o.epochs,
        seed=o.seed,
        checkpoint_every=o.checkpoint_every,
    )
    history = train(config, records, model, checkpoint_path=args.out)
    curve_path = o.loss_curve or str(Path(args.out).with_suffix(".loss.tsv"))
    Path(curve_path).write_text("step\tloss\n" + "".join(f"{s}\t{l!r}\n" for s, l in history))
    final = history[-1][1] if history else float("nan")
    print(f"trained {config.epochs} epochs on {len(records)} records; "
          f"final loss {final:.6f}; checkpoint {args.out}; curve {curve_path}")
    return 0


def _cmd_sample(args) -> int:
    o = _merge(args, _SAMPLE_DEFAULTS)
    model = VelocityModel.load(args.model)
    instance, _ = read_instance(args.instance)
    config = SamplerConfig(
        prior=o.prior,
        steps=o.steps,
        mode=o.mode,
        grid_cols=o.grid_cols,
        grid_rows=o.grid_rows,
        boundary_weight=o.boundary_weight,
        seed=o.seed,
    )
    trace: list | None = [] if o.trace else None
    rng = np.random.default_rng(o.seed)
    positions = sample(model, instance, config, rng, trace)
    meta = {"prior": config.prior.kind, "steps": o.steps, "mode": config.mode, "seed": o.seed}
    write_placement(args.out, positions, meta)
    if o.trace:
        Path(o.trace).write_text(serialize_trace(trace, meta))
    print(f"sampled {instance.num_macros} macros -> {args.out} "
          f"(hpwl={hpwl(instance, positions):.4f}, legal={is_legal(instance, positions)})")
    return 0


def _cmd_eval(args) -> int:
    instance, embedded = read_instance(args.instance)
    if args.placement:
        positions = read_placement(args.placement)
    elif embedded is not None:
        positions = embedded
    else:
        raise InstanceFormatError(f"{args.instance}: no embedded placement; pass --placement")
    metrics = {
        "hpwl": hpwl(instance, positions),
        "total_overlap": total_overlap(instance, positions),
        "overlap_ratio": overlap_ratio(instance, positions),
        "in_canvas": in_canvas(instance, positions),
        "legal": is_legal(instance, positions),
        "num_macros": instance.num_macros,
        "num_edges": len(instance.netlist),
    }
    text = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _cmd_bench(args) -> int:
    spec = load_bench_spec(args.spec)
    if args.threads is not None:
        spec.threads = args.threads
    elif spec.threads is None:
        spec.threads = default_threads()
    report = run_ablation(spec)
    write_report(report, args.out_dir)
    for skip in report.skipped:
        print(f"skipped arm {skip['arm']}: {skip['reason']}", file=sys.stderr)
    print(f"wrote {len(report.rows)} rows to {args.out_dir} "
          f"({len(report.aggregates['arms'])} arms, {len(spec.instances)} instances, {len(spec.seeds)} seeds)")
    return 0


def _cmd_render(args) -> int:
    o = _merge(args, _RENDER_DEFAULTS)
    instance, embedded = read_instance(args.instance)
    options = RenderOptions(show_nets=o.nets, highlight_overlaps=o.highlight_overlaps, labels=o.labels)
    if o.trace:
        frames = read_trace(o.trace)
        svg = render_trace_svg(instance, frames, options)
    else:
        if o.placement:
            positions = read_placement(o.placement)
        elif embedded is not None:
            positions = embedded
        else:
            raise InstanceFormatError(f"{args.instance}: no embedded placement; pass --placement or --trace")
        svg = render_svg(instance, positions, options)
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macroflow",
                                     description="Generative macro placement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["masked", "random"])
    p.add_argument("--canvas-width", type=float, dest="canvas_width")
    p.add_argument("--canvas-height", type=float, dest="canvas_height")
    p.add_argument("--grid-cols", type=int, dest="grid_cols")
    p.add_argument("--grid-rows", type=int, dest="grid_rows")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--macro-count-min", type=int, dest="macro_count_min")
    p.add_argument("--macro-count-max", type=int, dest="macro_count_max")
    p.add_argument("--macro-size-min", type=float, dest="macro_size_min")
    p.add_argument("--macro-size-max", type=float, dest="macro_size_max")
    p.add_argument("--pins-min", type=int, dest="pins_min")
    p.add_argument("--pins-max", type=int, dest="pins_max")
    p.add_argument("--degree-cap", type=int, dest="degree_cap")
    p.add_argument("--threshold", type=float)
    _add_config_flag(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train a velocity-field model")
    p.add_argument("--data", required=True, help="dataset directory from `gen`")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--seed", type=int)
    p.add_argument("--prior", choices=list(PRIOR_KINDS))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--num-blocks", type=int, dest="num_blocks")
    p.add_argument("--num-heads", type=int, dest="num_heads")
    p.add_argument("--time-dim", type=int, dest="time_dim")
    p.add_argument("--loss-curve", dest="loss_curve", help="loss table path (default: <out>.loss.tsv)")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", help="sample a placement for one instance")
    p.add_argument("--model", required=True, help="model checkpoint")
    p.add_argument("--instance", required=True, help="instance file")
    p.add_argument("--out", required=True, help="output placement file")
    p.add_argument("--steps", type=int)
    p.add_argument("--prior", choices=list(PRIOR_KINDS))
    p.add_argument("--mode", choices=["free", "hard", "hard_constraint"])
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-cols", type=int, dest="grid_cols")
    p.add_argument("--grid-rows", type=int, dest="grid_rows")
    p.add_argument("--boundary-weight", type=float, dest="boundary_weight")
    p.add_argument("--trace", help="also dump the per-step trajectory to this file")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval", help="metrics for an instance + placement pair")
    p.add_argument("--instance", required=True)
    p.add_argument("--placement", help="placement file (defaults to the instance's embedded one)")
    p.add_argument("--out", help="also write the metrics JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="run an ablation/benchmark spec")
    p.add_argument("--spec", required=True, help="benchmark spec JSON")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--threads", type=int, help="worker threads (default: MACROFLOW_THREADS or CPU count)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("render", help="render a layout or trajectory to SVG")
    p.add_argument("--instance", required=True)
    p.add_argument("--placement")
    p.add_argument("--trace", help="trace file; renders one frame per sampling step")
    p.add_argument("--out", required=True)
    p.add_argument("--nets", action="store_const", const=True)
    p.add_argument("--highlight-overlaps", action="store_const", const=True, dest="highlight_overlaps")
    p.add_argument("--labels", action="store_const", const=True)
    _add_config_flag(p)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InstanceFormatError, GenerationError, ProjectionError,
            FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
