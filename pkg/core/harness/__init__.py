"""
Harness - synthetic scenes, scaling bench, ablations and property checks.

Quick start:
    from core import harness

    scene = harness.gen_scene(seed=0, n_frames=40, profile="loop")
    records = harness.bench_scaling([50, 100, 200])
    results = harness.run_scancheck(n_instances=100)
"""

from core.harness.ablation import (
    arm_config,
    identity_deviation,
    run_ablation,
    summarize,
    write_ablation_json,
)
from core.harness.bench import (
    BENCH_COLUMNS,
    bench_config,
    bench_scaling,
    fit_exponent,
    kv_bytes,
    records_frame,
    write_bench_csv,
)
from core.harness.checks import (
    CheckResult,
    all_passed,
    check_chunked_equivalence,
    check_cold_start_identity,
    check_split_equivalence,
    run_gradcheck,
    run_scancheck,
)
from core.harness.constants import ABLATION_ARMS, BENCH_METHODS, MOTION_PROFILES
from core.harness.scene import SyntheticScene, gen_scene, trajectory


__all__ = [
    "SyntheticScene",
    "gen_scene",
    "trajectory",
    "MOTION_PROFILES",
    "BENCH_METHODS",
    "BENCH_COLUMNS",
    "bench_config",
    "bench_scaling",
    "kv_bytes",
    "records_frame",
    "fit_exponent",
    "write_bench_csv",
    "ABLATION_ARMS",
    "arm_config",
    "identity_deviation",
    "run_ablation",
    "summarize",
    "write_ablation_json",
    "CheckResult",
    "all_passed",
    "run_gradcheck",
    "run_scancheck",
    "check_chunked_equivalence",
    "check_split_equivalence",
    "check_cold_start_identity",
]
