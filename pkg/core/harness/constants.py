"""
Constants for synthetic scenes, benchmarks and ablations.
"""

from __future__ import annotations

from typing import Final


# ---- Scene geometry (meters) ----
ROOM_HALF_EXTENT: Final[tuple[float, float, float]] = (4.0, 2.5, 4.0)
LATTICE_SPACING: Final[float] = 0.5
NOISE_STD: Final[float] = 0.01
MAX_STEP: Final[float] = 0.5                 # bound on per-frame camera translation

# ---- Motion profiles ----
MOTION_PROFILES: Final[tuple[str, ...]] = ("orbit", "corridor", "loop")
ORBIT_RADIUS: Final[float] = 1.5
ORBIT_STEP: Final[float] = 0.05              # radians per frame
CORRIDOR_STEP: Final[float] = 0.05           # meters per frame
CORRIDOR_MARGIN: Final[float] = 2.0
CORRIDOR_SWAY: Final[float] = 0.3
LOOP_RADIUS: Final[float] = 1.5
LOOP_BOB: Final[float] = 0.1                 # vertical oscillation amplitude
LOOP_CLOSURE_RADIUS: Final[float] = 0.25

# ---- Benchmark ----
BENCH_METHODS: Final[tuple[str, ...]] = ("memory", "windowed-baseline", "full-global-attention")
BENCH_FRAMES: Final[tuple[int, ...]] = (50, 100, 200, 400)
BENCH_REPEATS: Final[int] = 5
BENCH_OVERRIDES: Final[dict] = {
    "token_dim": 16,
    "num_heads": 2,
    "num_blocks": 2,
    "mlp_ratio": 1,
    "image_size": 56,                        # 4x4 patch grid per frame
    "patch_size": 14,
    "state_dim": 4,
    "expand": 1,
    "horizon": 4,
    "window_length": 4,
    "stride": 4,
    "injection_layers": [0],
}
LINEAR_EXPONENT_MAX: Final[float] = 1.3
QUADRATIC_EXPONENT_MIN: Final[float] = 1.7

# ---- Ablation ----
ABLATION_ARMS: Final[tuple[str, ...]] = ("full", "no-mamba-update", "no-memory", "no-zero-init")
ABLATION_PROFILE: Final[str] = "loop"
ABLATION_EVAL_SEED_OFFSET: Final[int] = 1000
ABLATION_TRAIN_SCENES: Final[int] = 4
ABLATION_TRAIN_SEED_STRIDE: Final[int] = 10_000   # scene k of seed s uses s + k * stride

# ---- Property suites ----
GRAD_TOL_PRIMITIVE: Final[float] = 1e-6
GRAD_TOL_COMPOSED: Final[float] = 1e-4
SCAN_TOL: Final[float] = 1e-10
IDENTITY_TOL: Final[float] = 1e-12
