"""
Property-check suites behind the `gradcheck` and `scancheck` commands.

Suites: primitive and composed gradients against central differences, chunked
vs sequential scans, split scans with a carried state, and the cold-start
identity of a freshly initialised pipeline. Each returns CheckResult rows; a
suite passes when every row is within its tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from core.backbone import Predictions, heads, init_heads
from core.harness.ablation import identity_deviation
from core.harness.constants import (
    GRAD_TOL_COMPOSED,
    GRAD_TOL_PRIMITIVE,
    IDENTITY_TOL,
    MOTION_PROFILES,
    SCAN_TOL,
)
from core.harness.scene import gen_scene
from core.injector import attend_with_memory, init_branch, inject_kv, LayerInjector
from core.numerics import Tensor, check_gradient, ops
from core.params import named_tensors, rebuild
from core.pipeline import init_model, multi_task_loss
from core.schemas import RunConfig, build_run_config
from core.ssm import (
    SSMState,
    ScanInputs,
    init_mamba_block,
    init_ssm,
    mamba_block,
    scan_inputs,
    selective_scan_chunked,
    selective_scan_sequential,
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def all_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results)


def _rand(rng: np.random.Generator, *shape: int, low: float | None = None, high: float | None = None) -> Tensor:
    if low is not None:
        return Tensor(rng.uniform(low, high, size=shape))
    return Tensor(rng.normal(size=shape))


def _weighted(out: Tensor, weights: Tensor) -> Tensor:
    return ops.sum(ops.mul(out, weights))


# ---- Primitive gradients ----

def primitive_cases(rng: np.random.Generator) -> dict[str, tuple[Callable[..., Tensor], list[Tensor]]]:
    """Name -> (output function, inputs); outputs are reduced against random weights."""
    a, b = _rand(rng, 3, 4), _rand(rng, 3, 4)
    pos = _rand(rng, 3, 4, low=0.5, high=2.0)
    away = Tensor(np.sign(a.data) * (np.abs(a.data) + 0.2))
    m1, m2 = _rand(rng, 3, 5), _rand(rng, 5, 2)
    bias = _rand(rng, 2)
    seq, kernel, conv_bias = _rand(rng, 6, 3), _rand(rng, 3, 3), _rand(rng, 3)
    gamma, beta = _rand(rng, 4), _rand(rng, 4)
    q, k, v = _rand(rng, 3, 4), _rand(rng, 5, 4), _rand(rng, 5, 2)
    return {
        "add": (ops.add, [a, _rand(rng, 4)]),
        "sub": (ops.sub, [a, b]),
        "mul": (ops.mul, [a, b]),
        "div": (ops.div, [a, pos]),
        "neg": (ops.neg, [a]),
        "exp": (ops.exp, [a]),
        "log": (ops.log, [pos]),
        "sqrt": (ops.sqrt, [pos]),
        "square": (ops.square, [a]),
        "absolute": (ops.absolute, [away]),
        "sigmoid": (ops.sigmoid, [a]),
        "silu": (ops.silu, [a]),
        "gelu": (ops.gelu, [a]),
        "softplus": (ops.softplus, [a]),
        "sum": (lambda x: ops.sum(x, axis=1), [a]),
        "mean": (lambda x: ops.mean(x, axis=0, keepdims=True), [a]),
        "matmul": (ops.matmul, [m1, m2]),
        "linear": (ops.linear, [m1, m2, bias]),
        "transpose": (ops.transpose, [m1]),
        "reshape": (lambda x: ops.reshape(x, (4, 3)), [a]),
        "index": (lambda x: ops.index(x, (slice(0, 2), slice(1, 4))), [a]),
        "concat": (lambda x, y: ops.concat([x, y], axis=0), [a, b]),
        "layer_norm": (ops.layer_norm, [a, gamma, beta]),
        "depthwise_conv1d_causal": (ops.depthwise_conv1d_causal, [seq, kernel, conv_bias]),
        "softmax_attention": (ops.softmax_attention, [q, k, v]),
    }


def check_primitives(seed: int) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name, (fn, inputs) in primitive_cases(rng).items():
        weights = Tensor(rng.normal(size=fn(*inputs).shape))
        err = check_gradient(lambda *xs, fn=fn, w=weights: _weighted(fn(*xs), w), inputs)
        results.append(CheckResult("primitives", name, err, GRAD_TOL_PRIMITIVE))
    return results


def check_scan_gradient(seed: int, length: int = 7, inner: int = 3, state: int = 2) -> list[CheckResult]:
    """Both scan strategies against finite differences of their explicit inputs."""
    rng = np.random.default_rng(seed)
    params = init_ssm(rng, inner, state)
    u = _rand(rng, length, inner)
    delta = _rand(rng, length, inner, low=0.05, high=0.5)
    A = Tensor(-rng.uniform(0.5, 2.0, size=(inner, state)))
    B, C, D = _rand(rng, length, state), _rand(rng, length, state), _rand(rng, inner)
    h0 = _rand(rng, inner, state)
    wy, wh = _rand(rng, length, inner), _rand(rng, inner, state)

    results = []
    for name, scan in (("scan_sequential", selective_scan_sequential),
                       ("scan_chunked", lambda *a, **kw: selective_scan_chunked(*a, chunk=3, **kw))):
        def f(u_, d_, A_, B_, C_, D_, h_, scan=scan):
            y, h = scan(u_, params, SSMState(h=h_), inputs=ScanInputs(delta=d_, A=A_, B=B_, C=C_, D=D_))
            return ops.add(_weighted(y, wy), _weighted(h.h, wh))
        err = check_gradient(f, [u, delta, A, B, C, D, h0])
        results.append(CheckResult("primitives", name, err, GRAD_TOL_PRIMITIVE))
    return results


# ---- Composed gradients ----

MAMBA_CHECKED = ("ln_gamma", "in_conv.weight", "conv_kernel", "in_gate.weight",
                 "ssm.A_log", "ssm.delta_proj.weight", "ssm.B_proj.weight", "out_proj.weight")


def check_mamba_block(seed: int, tokens: int = 6, dim: int = 4, state: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = init_mamba_block(rng, dim, state_dim=state)
    named = named_tensors(params)
    M = _rand(rng, tokens, dim)
    h0 = Tensor(rng.normal(scale=0.1, size=(params.inner_dim, state)))
    wy, wh = _rand(rng, tokens, dim), _rand(rng, params.inner_dim, state)

    def f(M_, h_, *tensors):
        block = rebuild(params, dict(zip(MAMBA_CHECKED, tensors)))
        out, h = mamba_block(M_, block, SSMState(h=h_))
        return ops.add(_weighted(out, wy), _weighted(h.h, wh))

    err = check_gradient(f, [M, h0] + [named[n] for n in MAMBA_CHECKED], max_coords=12, seed=seed)
    return CheckResult("composed", "mamba_block", err, GRAD_TOL_COMPOSED)


def check_injected_attention(seed: int, tokens: int = 5, dim: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    K_branch = init_branch(rng, dim, dim, zero_init=False, output_rng=rng)
    V_branch = init_branch(rng, dim, dim, zero_init=False, output_rng=rng)
    Q, K, V = _rand(rng, tokens, dim), _rand(rng, tokens, dim), _rand(rng, tokens, dim)
    K_hat, V_hat = _rand(rng, tokens, dim), _rand(rng, tokens, dim)
    w = _rand(rng, tokens, dim)

    def f(Q_, K_, V_, Kh, Vh, W1, W2):
        layer = LayerInjector(K=rebuild(K_branch, {"W1": W1, "W2": W2}), V=V_branch)
        K2, V2 = inject_kv(K_, V_, Kh, Vh, layer)
        return _weighted(attend_with_memory(Q_, K2, V2), w)

    err = check_gradient(f, [Q, K, V, K_hat, V_hat, K_branch.W1, K_branch.W2])
    return CheckResult("composed", "inject_kv+attention", err, GRAD_TOL_COMPOSED)


def check_heads(seed: int, grid: tuple[int, int] = (2, 2), dim: int = 6) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = init_heads(rng, dim)
    features = _rand(rng, grid[0] * grid[1], dim)
    weights = {
        "quaternion": _rand(rng, 4), "translation": _rand(rng, 3),
        "depth": _rand(rng, *grid), "pointmap": _rand(rng, grid[0] * grid[1], 3),
    }

    def f(x, Wp, Wd, Wq):
        head = rebuild(params, {"pointmap.weight": Wp, "depth.weight": Wd, "pose.weight": Wq})
        pred = heads(x, head, grid)
        terms = [_weighted(getattr(pred, k), w) for k, w in weights.items()]
        return ops.add(ops.add(terms[0], terms[1]), ops.add(terms[2], terms[3]))

    err = check_gradient(f, [features, params.pointmap.weight, params.depth.weight, params.pose.weight])
    return CheckResult("composed", "heads", err, GRAD_TOL_COMPOSED)


def check_loss(seed: int, frames: int = 2, grid: tuple[int, int] = (2, 2)) -> CheckResult:
    rng = np.random.default_rng(seed)
    n = grid[0] * grid[1]

    def frame() -> Predictions:
        q = rng.normal(size=4)
        return Predictions(
            quaternion=Tensor(q / np.linalg.norm(q)),
            translation=_rand(rng, 3),
            depth=_rand(rng, *grid, low=0.5, high=3.0),
            pointmap=_rand(rng, n, 3),
        )

    gt = [frame() for _ in range(frames)]
    pred = [frame() for _ in range(frames)]
    inputs = [t for p in pred for t in (p.quaternion, p.translation, p.depth, p.pointmap)]

    def f(*tensors):
        preds = [Predictions(*tensors[4 * i:4 * i + 4]) for i in range(frames)]
        total, _ = multi_task_loss(preds, gt)
        return total

    err = check_gradient(f, inputs)
    return CheckResult("composed", "multi_task_loss", err, GRAD_TOL_COMPOSED)


def run_gradcheck(n_seeds: int = 20, seed: int = 0) -> list[CheckResult]:
    """Every primitive and every composed block, n_seeds instances each; worst error per check."""
    rows: dict[tuple[str, str], CheckResult] = {}
    for s in range(seed, seed + n_seeds):
        batch = check_primitives(s) + check_scan_gradient(s) + [
            check_mamba_block(s), check_injected_attention(s), check_heads(s), check_loss(s),
        ]
        for r in batch:
            key = (r.suite, r.name)
            if key not in rows or r.max_error > rows[key].max_error:
                rows[key] = r
    logger.info("gradcheck: %d checks over %d seeds", len(rows), n_seeds)
    return list(rows.values())


# ---- Scan equivalence ----

def random_scan_instance(rng: np.random.Generator, max_len: int = 64):
    length = int(rng.integers(1, max_len + 1))
    inner = int(rng.integers(1, 9))
    state = int(rng.integers(1, 9))
    params = init_ssm(rng, inner, state)
    u = _rand(rng, length, inner)
    h0 = SSMState(h=_rand(rng, inner, state))
    return params, u, h0


def check_chunked_equivalence(n_instances: int = 1000, max_len: int = 64, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        params, u, h0 = random_scan_instance(rng, max_len)
        chunk = int(rng.integers(1, 17))
        y_seq, h_seq = selective_scan_sequential(u, params, h0)
        y_chk, h_chk = selective_scan_chunked(u, params, h0, chunk=chunk)
        worst = max(worst, float(np.max(np.abs(y_seq.data - y_chk.data))),
                    float(np.max(np.abs(h_seq.h.data - h_chk.h.data))))
    return CheckResult("scan", "chunked_vs_sequential", worst, SCAN_TOL)


def check_split_equivalence(n_instances: int = 200, max_len: int = 64, seed: int = 1) -> CheckResult:
    """Scanning two halves with the carried state equals one scan over the whole (exact)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        params, u, h0 = random_scan_instance(rng, max_len)
        if u.shape[0] < 2:
            continue
        cut = int(rng.integers(1, u.shape[0]))
        full = scan_inputs(u, params)
        y_all, h_all = selective_scan_sequential(u, params, h0, inputs=full)
        head, tail = _split_inputs(full, cut)
        y1, h_mid = selective_scan_sequential(ops.index(u, slice(0, cut)), params, h0, inputs=head)
        y2, h_end = selective_scan_sequential(ops.index(u, slice(cut, None)), params, h_mid, inputs=tail)
        joined = np.concatenate([y1.data, y2.data])
        worst = max(worst, float(np.max(np.abs(joined - y_all.data))),
                    float(np.max(np.abs(h_end.h.data - h_all.h.data))))
    return CheckResult("scan", "split_vs_concatenated", worst, 0.0)


def _split_inputs(inputs: ScanInputs, cut: int) -> tuple[ScanInputs, ScanInputs]:
    def part(rows: slice) -> ScanInputs:
        return ScanInputs(
            delta=ops.index(inputs.delta, rows),
            A=inputs.A,
            B=ops.index(inputs.B, rows),
            C=ops.index(inputs.C, rows),
            D=inputs.D,
        )
    return part(slice(0, cut)), part(slice(cut, None))


def run_scancheck(
    n_instances: int = 1000,
    max_len: int = 64,
    seed: int = 0,
    identity_configs: int = 0,
) -> list[CheckResult]:
    """Scan equivalence suites, optionally followed by the cold-start identity check."""
    results = [
        check_chunked_equivalence(n_instances, max_len, seed),
        check_split_equivalence(max(1, n_instances // 5), max_len, seed + 1),
    ]
    if identity_configs:
        results.append(check_cold_start_identity(identity_configs, seed=seed))
    return results


# ---- Cold-start identity ----

IDENTITY_SPACE = {
    "horizon": (1, 2, 3, 4),
    "window_length": (1, 2, 3),
    "alpha": (0.0, 0.5, 1.0),
    "entry_granularity": ("window", "frame"),
    "share_stream_weights": (False, True),
    "scan_mode": ("sequential", "chunked"),
    "residual_source": ("input", "normalized"),
    "injection_layers": ([0], [1], [0, 1]),
}


def random_identity_config(rng: np.random.Generator, seed: int) -> RunConfig:
    """Toy-sized configuration with randomly drawn memory settings (trailing injection)."""
    values = {key: options[int(rng.integers(len(options)))] for key, options in IDENTITY_SPACE.items()}
    values["stride"] = int(rng.integers(1, values["window_length"] + 1))
    return build_run_config({
        "seed": seed, "token_dim": 8, "num_heads": 2, "num_blocks": 2, "mlp_ratio": 2,
        "image_size": 28, "patch_size": 14, "state_dim": 4, "expand": 1, **values,
    })


def check_cold_start_identity(n_configs: int = 50, n_frames: int = 6, seed: int = 0) -> CheckResult:
    """Freshly initialised pipeline vs the bare windowed backbone over random configs and scenes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_configs):
        config = random_identity_config(rng, seed + k)
        scene = gen_scene(seed + k, n_frames, MOTION_PROFILES[k % len(MOTION_PROFILES)],
                          config.image_size, config.patch_size, config.channels)
        worst = max(worst, identity_deviation(init_model(config), config, scene, n_windows=None))
    logger.info("cold-start identity: max deviation %.3e over %d configs", worst, n_configs)
    return CheckResult("identity", "cold_start_vs_backbone", worst, IDENTITY_TOL)
