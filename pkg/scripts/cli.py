"""
Command-line front door for the memory-stream harness.

Subcommands:
    gen        Generate a synthetic scene (tensors + per-frame poses CSV)
    train      Two-stage training on synthetic scenes; writes metrics + checkpoint
    eval       Drift report of a checkpoint (or a fresh model) on a synthetic scene
    bench      Wall time and retained bytes versus sequence length
    ablate     Train / evaluate the ablation arms over paired seeds
    gradcheck  Finite-difference gradient suites
    scancheck  Chunked vs sequential scan equivalence and cold-start identity

Usage:
    python -m scripts.cli gen --seed 0 --frames 40 --profile loop
    python -m scripts.cli train --config configs/toy.env --seed 7
    python -m scripts.cli eval --checkpoint out/train/checkpoint --frames 60
    python -m scripts.cli bench --frames 50,100,200,400
    python -m scripts.cli ablate --seeds 10 --frames 40
    python -m scripts.cli gradcheck --seeds 20
    python -m scripts.cli scancheck --instances 1000

Every subcommand accepts --seed, --config and --out (default $SWM_OUT_DIR).
Exit status: 0 on success, 1 on a library error or failed property, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from core.config import get_log_level, get_out_dir
from core.errors import SWMError
from core.harness import (
    ABLATION_ARMS,
    BENCH_METHODS,
    MOTION_PROFILES,
    all_passed,
    bench_config,
    bench_scaling,
    fit_exponent,
    gen_scene,
    run_ablation,
    run_gradcheck,
    run_scancheck,
    summarize,
    write_ablation_json,
    write_bench_csv,
)
from core.harness.constants import (
    ABLATION_PROFILE,
    ABLATION_TRAIN_SCENES,
    BENCH_FRAMES,
    BENCH_REPEATS,
    LINEAR_EXPONENT_MAX,
    QUADRATIC_EXPONENT_MIN,
)
from core.numerics import save_named
from core.pipeline import evaluate_drift, init_model, load_checkpoint, save_checkpoint, train, write_metrics
from core.pipeline.constants import METRICS_FILE
from core.schemas import RunConfig, build_run_config, dump_run_config, load_run_config


logger = logging.getLogger(__name__)

CHECKPOINT_DIR = "checkpoint"


def _config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        return load_run_config(args.config, seed=args.seed)
    return build_run_config({"seed": args.seed} if args.seed is not None else {})


def _out(args: argparse.Namespace, name: str) -> Path:
    path = Path(args.out or get_out_dir()) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got '{text}'")
    return values


def _header(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


# ---- Subcommands ----

def cmd_gen(args: argparse.Namespace) -> int:
    config = _config(args)
    scene = gen_scene(config.seed, args.frames, args.profile, config.image_size, config.patch_size, config.channels)
    out = _out(args, "scene")

    tensors = {}
    for t, (frame, truth) in enumerate(zip(scene.frames, scene.ground_truth)):
        tensors[f"frame.{t}.image"] = frame.image
        for key in ("quaternion", "translation", "depth", "pointmap"):
            tensors[f"truth.{t}.{key}"] = getattr(truth, key)
    save_named(out / "scene", tensors, group_of=lambda name: name.split(".")[0])

    poses = pd.DataFrame(
        [[t, *g.quaternion.numpy(), *g.translation.numpy()] for t, g in enumerate(scene.ground_truth)],
        columns=["frame", "qw", "qx", "qy", "qz", "tx", "ty", "tz"],
    )
    poses.to_csv(out / "poses.csv", index=False)
    (out / "scene.meta.json").write_text(json.dumps({
        "seed": scene.seed, "profile": scene.profile, "frames": scene.n_frames,
        "image_size": config.image_size, "channels": config.channels,
    }, indent=2))

    _header(f"SCENE: {args.profile}, {scene.n_frames} frames (seed {scene.seed})")
    print(f"✓ Lattice points: {len(scene.lattice)}")
    print(f"✓ Path length: {poses[['tx', 'ty', 'tz']].diff().pow(2).sum(axis=1).pow(0.5).sum():.3f} m")
    print(f"✓ Written to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = [
        gen_scene(config.seed + i, args.frames, args.profile, config.image_size, config.patch_size, config.channels)
        for i in range(args.clips)
    ]
    out = _out(args, "train")

    _header(f"TRAINING (seed {config.seed}, {args.clips} clip(s) x {args.frames} frames)")
    result = train(config, dataset, progress=not args.quiet)
    write_metrics(out / METRICS_FILE, result.metrics)
    hashes = save_checkpoint(out / CHECKPOINT_DIR, result.model, config)
    (out / "config.env").write_text(dump_run_config(config))

    for stage in sorted({m.stage for m in result.metrics}):
        rows = [m for m in result.metrics if m.stage == stage]
        print(f"✓ Stage {stage}: loss {rows[0].loss_total:.5f} -> {rows[-1].loss_total:.5f} over {len(rows) - 1} steps")
    print(f"✓ Backbone hash: {hashes['backbone'][:16]}")
    print(f"✓ Metrics: {out / METRICS_FILE}")
    print(f"✓ Checkpoint: {out / CHECKPOINT_DIR}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.checkpoint:
        model, config, _ = load_checkpoint(args.checkpoint)
        if args.seed is not None:
            config = config.with_updates(seed=args.seed)
    else:
        config = _config(args)
        model = init_model(config)
    scene = gen_scene(config.seed, args.frames, args.profile, config.image_size, config.patch_size, config.channels)
    out = _out(args, "eval")

    _header(f"EVALUATION: {args.profile}, {args.frames} frames")
    reports = {"memory": evaluate_drift(model, config, scene)}
    if args.baseline:
        reports["windowed-baseline"] = evaluate_drift(model, config, scene, use_memory=False)

    summary = {}
    for name, report in reports.items():
        report.per_frame.to_csv(out / f"per_frame_{name}.csv", index=False)
        summary[name] = report.summary()
        print(f"✓ {name}: endpoint drift {report.endpoint_drift:.4f} m, pointmap MSE {report.pointmap_mse:.5f}")
    (out / "report.json").write_text(json.dumps(summary, indent=2))
    print(f"✓ Written to {out}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = bench_config(args.seed or 0)
    if args.config:
        config = load_run_config(args.config, seed=args.seed)
    out = _out(args, "bench")

    _header(f"SCALING BENCH: frames {args.frames}, {args.repeats} repeat(s)")
    records = bench_scaling(args.frames, args.methods, config, args.repeats)
    path = write_bench_csv(records, out / "bench.csv")

    ok = True
    if len(set(args.frames)) >= 2:
        for method in args.methods:
            exponent = fit_exponent(records, method)
            print(f"✓ {method}: fitted exponent {exponent:.2f}")
            if args.check_exponents:
                if method == "memory" and exponent > LINEAR_EXPONENT_MAX:
                    print(f"✗ memory exponent above {LINEAR_EXPONENT_MAX}")
                    ok = False
                if method == "full-global-attention" and exponent < QUADRATIC_EXPONENT_MIN:
                    print(f"✗ full-global-attention exponent below {QUADRATIC_EXPONENT_MIN}")
                    ok = False
    print(f"✓ {len(records)} rows written to {path}")
    return 0 if ok else 1


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config(args)
    start = config.seed
    seeds = list(range(start, start + args.seeds))
    out = _out(args, "ablation")

    _header(f"ABLATION: {len(args.arms)} arm(s) x {len(seeds)} seed(s)")
    table = run_ablation(config, seeds, args.frames, args.arms, args.profile, args.train_scenes)
    path = write_ablation_json(table, out / "ablation.json", {"profile": args.profile, "frames": args.frames})

    for arm, row in summarize(table).iterrows():
        print(f"✓ {arm:<16} drift {row['endpoint_drift']:.4f}  pointmap MSE {row['pointmap_mse']:.5f}  "
              f"step-0 deviation {row['step0_identity_deviation']:.2e}")
    print(f"✓ Written to {path}")
    return 0


def _report(results, title: str) -> int:
    _header(title)
    for r in results:
        mark = "✓" if r.passed else "✗"
        print(f"{mark} {r.suite:<11} {r.name:<26} max error {r.max_error:.3e} (tol {r.tolerance:.0e})")
    failed = [r for r in results if not r.passed]
    print("-" * 60)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if all_passed(results) else 1


def cmd_gradcheck(args: argparse.Namespace) -> int:
    return _report(run_gradcheck(args.seeds, args.seed or 0), f"GRADIENT CHECKS ({args.seeds} seeds)")


def cmd_scancheck(args: argparse.Namespace) -> int:
    results = run_scancheck(args.instances, args.max_len, args.seed or 0, args.identity_configs)
    return _report(results, f"EQUIVALENCE CHECKS ({args.instances} scans, S <= {args.max_len})")


# ---- Parser ----

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Run seed (overrides the config file)")
    common.add_argument("--config", type=str, default=None, help="Flat key=value run config")
    common.add_argument("--out", type=str, default=None, help="Output root (default: $SWM_OUT_DIR)")

    parser = argparse.ArgumentParser(prog="scripts.cli", description="Sliding-window memory stream harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="Generate a synthetic scene")
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--profile", choices=MOTION_PROFILES, default="orbit")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", parents=[common], help="Two-stage training")
    p.add_argument("--frames", type=int, default=32, help="Frames per training clip")
    p.add_argument("--clips", type=int, default=1, help="Training clips (seeds seed..seed+clips-1)")
    p.add_argument("--profile", choices=MOTION_PROFILES, default="orbit")
    p.add_argument("--quiet", action="store_true", help="No progress bars")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="Drift report on a synthetic scene")
    p.add_argument("--checkpoint", type=str, default=None, help="Checkpoint directory (default: fresh model)")
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--profile", choices=MOTION_PROFILES, default="loop")
    p.add_argument("--baseline", action="store_true", help="Also evaluate the memory-free baseline")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="Scaling benchmark")
    p.add_argument("--frames", type=_int_list, default=list(BENCH_FRAMES))
    p.add_argument("--methods", nargs="+", choices=BENCH_METHODS, default=list(BENCH_METHODS))
    p.add_argument("--repeats", type=int, default=BENCH_REPEATS)
    p.add_argument("--check-exponents", action=argparse.BooleanOptionalAction, default=True,
                   help="Fail if fitted exponents miss their bounds (on by default)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", parents=[common], help="Ablation arms over paired seeds")
    p.add_argument("--seeds", type=int, default=10, help="Number of paired seeds")
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--arms", nargs="+", choices=ABLATION_ARMS, default=list(ABLATION_ARMS))
    p.add_argument("--train-scenes", type=int, default=ABLATION_TRAIN_SCENES, help="Training clips per seed")
    p.add_argument("--profile", choices=MOTION_PROFILES, default=ABLATION_PROFILE)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", parents=[common], help="Finite-difference gradient suites")
    p.add_argument("--seeds", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("scancheck", parents=[common], help="Scan equivalence suites")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--identity-configs", type=int, default=50,
                   help="Random configs for the cold-start identity check (0 skips it)")
    p.set_defaults(func=cmd_scancheck)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=get_log_level(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SWMError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
