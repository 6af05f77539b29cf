"""
Tests for core.injector: zero-initialised branches and memory-augmented attention.
"""

import math

import numpy as np
import pytest

from core.errors import AlignmentError, ConfigError, ShapeError
from core.harness.checks import check_injected_attention
from core.injector import (
    INIT_STD,
    BranchParams,
    InjectorParams,
    append_memory_rows,
    attend_with_memory,
    init_branch,
    init_injector,
    inject_kv,
    zero_conv_branch,
)
from core.numerics import GradTape, Tensor, ops


@pytest.fixture
def tokens(rng):
    return {name: Tensor(rng.normal(size=(5, 4))) for name in ("Q", "K", "V", "K_hat", "V_hat")}


class TestInit:

    def test_zero_init_output_map(self, rng):
        branch = init_branch(rng, 4, 6)
        assert branch.is_zero_output
        assert branch.W1.shape == (4, 6)
        assert np.any(branch.W1.data)

    def test_first_layer_scale(self):
        branch = init_branch(np.random.default_rng(0), 64, 64)
        assert abs(branch.W1.data.std() - INIT_STD) < 0.002

    def test_random_output_needs_generator(self, rng):
        with pytest.raises(ConfigError):
            init_branch(rng, 4, 4, zero_init=False)

    def test_first_layer_shared_with_and_without_zero_init(self):
        zero = init_injector(np.random.default_rng(1), 4, [0, 2])
        rand = init_injector(np.random.default_rng(1), 4, [0, 2], zero_init=False,
                             output_rng=np.random.default_rng(9))
        assert zero.layers == rand.layers == [0, 2]
        for layer in zero.layers:
            np.testing.assert_array_equal(zero.for_layer(layer).K.W1.data, rand.for_layer(layer).K.W1.data)
            np.testing.assert_array_equal(zero.for_layer(layer).V.W1.data, rand.for_layer(layer).V.W1.data)
            assert not rand.for_layer(layer).V.is_zero_output

    def test_one_injector_per_layer(self, rng):
        params = init_injector(rng, 4, [2, 0, 2])
        assert params.layers == [0, 2]
        assert params.for_layer(1) is None
        assert params.for_layer(2) is params[InjectorParams.key(2)]


def gelu_reference(x: np.ndarray) -> np.ndarray:
    return np.vectorize(lambda v: 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0))))(x)


class TestBranch:

    def test_known_weights(self):
        branch = BranchParams(
            W1=Tensor([[1.0, 0.0], [0.0, 1.0]]),
            b1=Tensor([0.5, -0.5]),
            W2=Tensor([[1.0, 2.0], [3.0, 4.0]]),
            b2=Tensor([0.1, 0.2]),
        )
        x = np.array([[1.0, 0.0], [-2.0, 3.0]])
        expected = gelu_reference(x + [0.5, -0.5]) @ np.array([[1.0, 2.0], [3.0, 4.0]]) + [0.1, 0.2]
        np.testing.assert_allclose(zero_conv_branch(Tensor(x), branch).data, expected, atol=1e-12)

    def test_random_weights_against_reference(self, rng):
        branch = init_branch(rng, 4, 6, zero_init=False, output_rng=np.random.default_rng(3))
        x = rng.normal(size=(5, 4))
        hidden = gelu_reference(x @ branch.W1.data + branch.b1.data)
        expected = hidden @ branch.W2.data + branch.b2.data
        np.testing.assert_allclose(zero_conv_branch(Tensor(x), branch).data, expected, atol=1e-12)

    def test_zero_output_is_exactly_zero(self, rng):
        branch = init_branch(rng, 4, 6)
        out = zero_conv_branch(Tensor(rng.normal(size=(3, 4)) * 100), branch)
        assert not np.any(out.data)

    def test_gradient_at_init_reaches_output_map_only(self, rng):
        branch = init_branch(rng, 4, 6)
        x = Tensor(rng.normal(size=(5, 4)))
        w = Tensor(rng.normal(size=(5, 4)))
        params = [branch.W1, branch.b1, branch.W2, branch.b2]
        with GradTape() as tape:
            tape.watch(*params)
            loss = ops.sum(ops.mul(zero_conv_branch(x, branch), w))
        gW1, gb1, gW2, gb2 = tape.gradient(loss, params)
        assert np.any(gW2.data)
        assert np.any(gb2.data)
        np.testing.assert_array_equal(gW1.data, 0.0)
        np.testing.assert_array_equal(gb1.data, 0.0)

        hidden = gelu_reference(x.data @ branch.W1.data)
        np.testing.assert_allclose(gW2.data, hidden.T @ w.data, atol=1e-12)
        np.testing.assert_allclose(gb2.data, w.data.sum(axis=0), atol=1e-12)


class TestInjection:

    def test_zero_branch_is_bitwise_identity(self, rng, tokens):
        layer = init_injector(rng, 4, [0]).for_layer(0)
        K2, V2 = inject_kv(tokens["K"], tokens["V"], tokens["K_hat"], tokens["V_hat"], layer)
        np.testing.assert_array_equal(K2.data, tokens["K"].data)
        np.testing.assert_array_equal(V2.data, tokens["V"].data)
        a = attend_with_memory(tokens["Q"], K2, V2)
        b = ops.softmax_attention(tokens["Q"], tokens["K"], tokens["V"])
        np.testing.assert_array_equal(a.data, b.data)

    def test_random_branch_changes_keys(self, tokens):
        layer = init_injector(np.random.default_rng(0), 4, [0], zero_init=False,
                              output_rng=np.random.default_rng(1)).for_layer(0)
        K2, _ = inject_kv(tokens["K"], tokens["V"], tokens["K_hat"], tokens["V_hat"], layer)
        assert np.abs(K2.data - tokens["K"].data).max() > 0

    def test_branch_is_position_wise(self, rng):
        branch = init_branch(rng, 4, 4, zero_init=False, output_rng=rng)
        x = Tensor(rng.normal(size=(3, 4)))
        full = zero_conv_branch(x, branch).data
        single = zero_conv_branch(Tensor(x.data[1:2]), branch).data
        np.testing.assert_allclose(full[1:2], single, atol=1e-14)

    def test_row_count_mismatch_raises(self, rng, tokens):
        layer = init_injector(rng, 4, [0]).for_layer(0)
        with pytest.raises(AlignmentError):
            inject_kv(tokens["K"], tokens["V"], Tensor(np.zeros((3, 4))), tokens["V_hat"], layer)

    def test_feature_dim_mismatch_raises(self, rng):
        branch = init_branch(rng, 4, 4)
        with pytest.raises(ShapeError):
            zero_conv_branch(Tensor(np.zeros((2, 3))), branch)

    def test_append_adds_history_rows(self, rng, tokens):
        layer = init_injector(rng, 4, [0]).for_layer(0)
        hist = Tensor(rng.normal(size=(3, 4)))
        K2, V2 = append_memory_rows(tokens["K"], tokens["V"], hist, hist, layer)
        assert K2.shape == (8, 4)
        np.testing.assert_array_equal(K2.data[5:], 0.0)

    def test_append_without_history_is_noop(self, rng, tokens):
        layer = init_injector(rng, 4, [0]).for_layer(0)
        K2, V2 = append_memory_rows(tokens["K"], tokens["V"], None, None, layer)
        assert K2 is tokens["K"] and V2 is tokens["V"]

    @pytest.mark.parametrize("seed", range(3))
    def test_injected_attention_gradient(self, seed):
        result = check_injected_attention(seed)
        assert result.passed, result
