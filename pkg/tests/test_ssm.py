"""
Tests for core.ssm: the selective scan (both strategies) and the Mamba block.
"""

import math

import numpy as np
import pytest

from core.errors import ShapeError, StateError
from core.harness.checks import (
    check_chunked_equivalence,
    check_mamba_block,
    check_scan_gradient,
    check_split_equivalence,
)
from core.numerics import Tensor, ops
from core.ssm import (
    SSMParams,
    SSMState,
    ScanInputs,
    init_mamba_block,
    init_ssm,
    mamba_block,
    scan_inputs,
    selective_scan_chunked,
    selective_scan_sequential,
)


def scalar_inputs(a: float, b: float, c: float, length: int, delta: float = 1.0) -> ScanInputs:
    """One channel, one state: h_s = exp(-delta a) h_{s-1} + delta b u_s, y = c h + 0 u."""
    return ScanInputs(
        delta=Tensor(np.full((length, 1), delta)),
        A=Tensor([[-a]]),
        B=Tensor(np.full((length, 1), b)),
        C=Tensor(np.full((length, 1), c)),
        D=Tensor([0.0]),
    )


def loop_scan(u: np.ndarray, inputs: ScanInputs, h0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scalar-by-scalar recurrence, one channel and one state entry at a time."""
    delta, A, B, C, D = (t.data for t in (inputs.delta, inputs.A, inputs.B, inputs.C, inputs.D))
    steps, inner = u.shape
    h = h0.copy()
    y = np.zeros_like(u)
    for s in range(steps):
        for d in range(inner):
            for n in range(h.shape[1]):
                h[d, n] = math.exp(delta[s, d] * A[d, n]) * h[d, n] + delta[s, d] * B[s, n] * u[s, d]
                y[s, d] += C[s, n] * h[d, n]
            y[s, d] += D[d] * u[s, d]
    return y, h


def silu_reference(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def mamba_reference(M: np.ndarray, p) -> np.ndarray:
    """Straight-line block: LN, causal DW conv, SiLU, scan, gate, out-projection, residual."""
    centered = M - M.mean(axis=1, keepdims=True)
    x_hat = centered / np.sqrt((centered ** 2).mean(axis=1, keepdims=True) + p.ln_eps)
    x_hat = x_hat * p.ln_gamma.data + p.ln_beta.data

    pre = x_hat @ p.in_conv.weight.data + p.in_conv.bias.data
    k = p.conv_kernel.shape[0]
    conv = np.tile(p.conv_bias.data, (M.shape[0], 1))
    for s in range(M.shape[0]):
        for j in range(k):
            if s - k + 1 + j >= 0:
                conv[s] += p.conv_kernel.data[j] * pre[s - k + 1 + j]
    a = silu_reference(conv)
    gate = silu_reference(x_hat @ p.in_gate.weight.data + p.in_gate.bias.data)

    ssm = p.ssm
    inputs = ScanInputs(
        delta=Tensor(np.log1p(np.exp(a @ ssm.delta_proj.weight.data + ssm.delta_proj.bias.data))),
        A=Tensor(-np.exp(ssm.A_log.data)),
        B=Tensor(a @ ssm.B_proj.weight.data + ssm.B_proj.bias.data),
        C=Tensor(a @ ssm.C_proj.weight.data + ssm.C_proj.bias.data),
        D=ssm.D_skip,
    )
    y, _ = loop_scan(a, inputs, np.zeros((ssm.inner_dim, ssm.state_dim)))
    return (y @ p.out_proj.weight.data + p.out_proj.bias.data) * gate + M


@pytest.fixture
def ssm_params(rng):
    return init_ssm(rng, inner_dim=3, state_dim=2)


# =============================================================================
# Selective scan
# =============================================================================

class TestSelectiveScan:

    def test_scalar_recurrence(self):
        params = init_ssm(np.random.default_rng(0), 1, 1)
        u = Tensor([[1.0], [0.0], [0.0]])
        decay = np.exp(-np.log(2.0))
        y, h = selective_scan_sequential(u, params, SSMState.zeros(1, 1), inputs=scalar_inputs(np.log(2.0), 1.0, 1.0, 3))
        np.testing.assert_allclose(y.data[:, 0], [1.0, decay, decay ** 2], atol=1e-12)
        np.testing.assert_allclose(h.h.data, [[decay ** 2]], atol=1e-12)

    def test_zero_input_zero_state_gives_skip_only(self, ssm_params):
        u = Tensor(np.zeros((4, 3)))
        y, h = selective_scan_sequential(u, ssm_params, SSMState.zeros(3, 2))
        np.testing.assert_array_equal(y.data, 0.0)
        np.testing.assert_array_equal(h.h.data, 0.0)

    def test_carried_state_decays_without_input(self):
        params = init_ssm(np.random.default_rng(0), 1, 1)
        h0 = SSMState(h=Tensor([[2.0]]))
        _, h = selective_scan_sequential(Tensor(np.zeros((2, 1))), params, h0, inputs=scalar_inputs(1.0, 1.0, 1.0, 2))
        np.testing.assert_allclose(h.h.data, [[2.0 * np.exp(-2.0)]], atol=1e-12)

    @pytest.mark.parametrize("scan", [selective_scan_sequential, selective_scan_chunked])
    def test_half_decay_example(self, scan):
        params = init_ssm(np.random.default_rng(0), 1, 1)
        inputs = scalar_inputs(1.0, 1.0, 1.0, 2, delta=np.log(2.0))
        y, h = scan(Tensor([[1.0], [0.0]]), params, SSMState.zeros(1, 1), inputs=inputs)
        ln2 = np.log(2.0)
        np.testing.assert_allclose(y.data[:, 0], [ln2, 0.5 * ln2], atol=1e-12)
        np.testing.assert_allclose(h.h.data, [[0.5 * ln2]], atol=1e-12)

    @pytest.mark.parametrize("scan", [selective_scan_sequential, selective_scan_chunked])
    def test_zero_step_freezes_state(self, scan, rng):
        params = init_ssm(rng, inner_dim=3, state_dim=2)
        u = rng.normal(size=(5, 3))
        h0 = rng.normal(size=(3, 2))
        inputs = ScanInputs(
            delta=Tensor(np.zeros((5, 3))),
            A=Tensor(-rng.uniform(0.5, 2.0, size=(3, 2))),
            B=Tensor(rng.normal(size=(5, 2))),
            C=Tensor(rng.normal(size=(5, 2))),
            D=Tensor(rng.normal(size=3)),
        )
        y, h = scan(Tensor(u), params, SSMState(h=Tensor(h0)), inputs=inputs)
        np.testing.assert_array_equal(h.h.data, h0)
        expected = inputs.C.data @ h0.T + inputs.D.data * u
        np.testing.assert_allclose(y.data, expected, atol=1e-12)

    def test_sequential_matches_loop_oracle(self):
        rng = np.random.default_rng(5)
        params = init_ssm(rng, inner_dim=4, state_dim=3)
        u = rng.normal(size=(16, 4))
        h0 = rng.normal(size=(4, 3))
        inputs = scan_inputs(Tensor(u), params)
        y, h = selective_scan_sequential(Tensor(u), params, SSMState(h=Tensor(h0)))
        y_ref, h_ref = loop_scan(u, inputs, h0)
        np.testing.assert_allclose(y.data, y_ref, atol=1e-12)
        np.testing.assert_allclose(h.h.data, h_ref, atol=1e-12)

    @pytest.mark.parametrize("chunk", [1, 5, 32])
    def test_chunked_matches_loop_oracle(self, chunk):
        rng = np.random.default_rng(6)
        params = init_ssm(rng, inner_dim=4, state_dim=3)
        u = rng.normal(size=(32, 4))
        y, h = selective_scan_chunked(Tensor(u), params, SSMState.zeros(4, 3), chunk=chunk)
        y_ref, h_ref = loop_scan(u, scan_inputs(Tensor(u), params), np.zeros((4, 3)))
        np.testing.assert_allclose(y.data, y_ref, atol=1e-10)
        np.testing.assert_allclose(h.h.data, h_ref, atol=1e-10)

    def test_constant_step_keeps_state_bounded(self, rng):
        params = init_ssm(rng, inner_dim=3, state_dim=2)
        steps = 200
        A = -rng.uniform(0.1, 1.0, size=(3, 2))
        delta, B = 0.3, rng.uniform(-1.0, 1.0, size=(steps, 2))
        u = rng.uniform(-1.0, 1.0, size=(steps, 3))
        inputs = ScanInputs(
            delta=Tensor(np.full((steps, 3), delta)),
            A=Tensor(A),
            B=Tensor(B),
            C=Tensor(np.ones((steps, 2))),
            D=Tensor(np.zeros(3)),
        )
        bound = np.abs(delta * B).max() * np.abs(u).max() / (1.0 - np.exp(delta * A).max())
        state = SSMState.zeros(3, 2)
        for s in range(steps):
            step = ScanInputs(
                delta=Tensor(inputs.delta.data[s:s + 1]), A=inputs.A, B=Tensor(B[s:s + 1]),
                C=Tensor(inputs.C.data[s:s + 1]), D=inputs.D,
            )
            _, state = selective_scan_sequential(Tensor(u[s:s + 1]), params, state, inputs=step)
            assert np.abs(state.h.data).max() <= bound

    @pytest.mark.parametrize("chunk", [1, 3, 8, 64])
    def test_chunked_matches_sequential(self, ssm_params, rng, chunk):
        u = Tensor(rng.normal(size=(17, 3)))
        h0 = SSMState(h=Tensor(rng.normal(size=(3, 2))))
        y_seq, h_seq = selective_scan_sequential(u, ssm_params, h0)
        y_chk, h_chk = selective_scan_chunked(u, ssm_params, h0, chunk=chunk)
        np.testing.assert_allclose(y_chk.data, y_seq.data, atol=1e-10)
        np.testing.assert_allclose(h_chk.h.data, h_seq.h.data, atol=1e-10)

    def test_random_instances_chunked_equivalence(self):
        result = check_chunked_equivalence(n_instances=100, seed=3)
        assert result.passed, result

    def test_split_scan_equals_whole_scan_exactly(self):
        result = check_split_equivalence(n_instances=50, seed=4)
        assert result.max_error == 0.0

    def test_scan_inputs_derive_negative_decay(self, ssm_params, rng):
        inputs = scan_inputs(Tensor(rng.normal(size=(5, 3))), ssm_params)
        assert np.all(inputs.A.data < 0)
        assert np.all(inputs.delta.data > 0)

    def test_empty_sequence_raises(self, ssm_params):
        with pytest.raises(ShapeError):
            selective_scan_sequential(Tensor(np.zeros((0, 3))), ssm_params, SSMState.zeros(3, 2))

    def test_state_shape_mismatch_raises(self, ssm_params):
        with pytest.raises(StateError):
            selective_scan_sequential(Tensor(np.zeros((2, 3))), ssm_params, SSMState.zeros(3, 5))

    def test_invalid_chunk_raises(self, ssm_params):
        with pytest.raises(ShapeError):
            selective_scan_chunked(Tensor(np.zeros((2, 3))), ssm_params, SSMState.zeros(3, 2), chunk=0)

    @pytest.mark.parametrize("seed", range(3))
    def test_scan_gradients(self, seed):
        for result in check_scan_gradient(seed):
            assert result.passed, result


# =============================================================================
# Mamba block
# =============================================================================

class TestMambaBlock:

    def test_output_shape_and_state(self, rng):
        params = init_mamba_block(rng, token_dim=4, state_dim=3)
        M = Tensor(rng.normal(size=(6, 4)))
        out, h = mamba_block(M, params, params.initial_state())
        assert out.shape == (6, 4)
        assert h.shape == (8, 3)

    def test_zero_out_proj_returns_residual(self, rng):
        params = init_mamba_block(rng, token_dim=4, state_dim=3)
        params.out_proj.weight = Tensor(np.zeros_like(params.out_proj.weight.data))
        params.out_proj.bias = Tensor(np.zeros(4))
        M = Tensor(rng.normal(size=(5, 4)))
        out, _ = mamba_block(M, params, params.initial_state())
        np.testing.assert_array_equal(out.data, M.data)

    def test_matches_straight_line_reference(self):
        rng = np.random.default_rng(7)
        params = init_mamba_block(rng, token_dim=32)
        params.ln_gamma = Tensor(rng.uniform(0.5, 1.5, size=32))
        params.ln_beta = Tensor(rng.normal(scale=0.1, size=32))
        params.conv_bias = Tensor(rng.normal(scale=0.1, size=params.conv_bias.shape))
        M = rng.normal(size=(12, 32))
        out, _ = mamba_block(Tensor(M), params, params.initial_state())
        np.testing.assert_allclose(out.data, mamba_reference(M, params), atol=1e-12)

    def test_closed_gate_returns_residual(self, rng):
        params = init_mamba_block(rng, token_dim=4, state_dim=3)
        params.in_gate.weight = Tensor(np.zeros_like(params.in_gate.weight.data))
        params.in_gate.bias = Tensor(np.full(4, -60.0))
        M = Tensor(rng.normal(size=(5, 4)))
        out, _ = mamba_block(M, params, params.initial_state())
        np.testing.assert_allclose(out.data, M.data, atol=1e-6)

    def test_normalized_residual_source(self, rng):
        params = init_mamba_block(rng, token_dim=4, state_dim=3, residual_source="normalized")
        params.out_proj.weight = Tensor(np.zeros_like(params.out_proj.weight.data))
        params.out_proj.bias = Tensor(np.zeros(4))
        M = Tensor(rng.normal(size=(5, 4)))
        out, _ = mamba_block(M, params, params.initial_state())
        expected = ops.layer_norm(M, params.ln_gamma, params.ln_beta, params.ln_eps)
        np.testing.assert_allclose(out.data, expected.data, atol=1e-12)

    def test_chunked_mode_matches_sequential(self, rng):
        params = init_mamba_block(rng, token_dim=4, state_dim=3)
        M = Tensor(rng.normal(size=(9, 4)))
        a, ha = mamba_block(M, params, params.initial_state())
        b, hb = mamba_block(M, params, params.initial_state(), scan_mode="chunked", chunk=4)
        np.testing.assert_allclose(a.data, b.data, atol=1e-10)
        np.testing.assert_allclose(ha.h.data, hb.h.data, atol=1e-10)

    def test_token_dim_mismatch_raises(self, rng):
        params = init_mamba_block(rng, token_dim=4)
        with pytest.raises(ShapeError):
            mamba_block(Tensor(np.zeros((3, 5))), params, params.initial_state())

    @pytest.mark.parametrize("seed", [4, 5])
    def test_block_gradient(self, seed):
        result = check_mamba_block(seed)
        assert result.passed, result

    def test_ssm_params_dims(self, ssm_params):
        assert isinstance(ssm_params, SSMParams)
        assert (ssm_params.inner_dim, ssm_params.state_dim) == (3, 2)
