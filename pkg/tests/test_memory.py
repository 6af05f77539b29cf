"""
Tests for core.memory: FIFO semantics, read-out, update gain, state carry and
snapshots.
"""

from collections import deque

import numpy as np
import pytest

from core import memory
from core.errors import ConfigError, ShapeError, StateError
from core.numerics import Tensor
from core.ssm import SSMState


def entry(value: float, rows: int = 2, dim: int = 3) -> Tensor:
    return Tensor(np.full((rows, dim), value))


@pytest.fixture
def buf():
    return memory.create_buffer(capacity=3, inner_dim=4, state_dim=2)


# =============================================================================
# FIFO behaviour
# =============================================================================

class TestFifo:

    def test_new_buffer_is_empty_with_zero_states(self, buf):
        assert len(buf) == 0
        assert not buf.is_full
        np.testing.assert_array_equal(buf.ssm_state_k.h.data, 0.0)
        assert buf.ssm_state_v.shape == (4, 2)

    def test_oldest_entry_evicted_past_capacity(self, buf):
        for v in range(5):
            memory.update(buf, entry(v))
        assert len(buf) == 3
        assert [t.data[0, 0] for t in buf.k_stream] == [2.0, 3.0, 4.0]

    def test_matches_reference_queue(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000 // 50):
            capacity = int(rng.integers(1, 6))
            buf = memory.create_buffer(capacity, 2, 2)
            oracle = deque()
            for _ in range(50):
                if rng.random() < 0.1:
                    memory.reset(buf)
                    oracle.clear()
                    continue
                value = float(rng.normal())
                memory.update(buf, entry(value, rows=1, dim=2))
                oracle.append(value)
                if len(oracle) > capacity:
                    oracle.popleft()
                assert len(buf) <= capacity
                assert [t.data[0, 0] for t in buf.k_stream] == list(oracle)
                assert [t.data[0, 0] for t in buf.v_stream] == list(oracle)

    def test_separate_v_stream_entries(self, buf):
        memory.update(buf, entry(1.0), entry(2.0))
        assert buf.k_stream[0].data[0, 0] == 1.0
        assert buf.v_stream[0].data[0, 0] == 2.0

    def test_entry_shape_mismatch_raises(self, buf):
        memory.update(buf, entry(1.0))
        with pytest.raises(ShapeError):
            memory.update(buf, entry(1.0, rows=3))

    def test_invalid_capacity_raises(self):
        with pytest.raises(ConfigError):
            memory.create_buffer(0, 2, 2)


# =============================================================================
# Read-out
# =============================================================================

class TestReadOut:

    def test_empty_buffer_returns_current_only(self, buf):
        F = entry(9.0)
        np.testing.assert_array_equal(memory.read_out(buf, F).data, F.data)

    def test_history_then_current(self, buf):
        memory.update(buf, entry(1.0))
        memory.update(buf, entry(2.0))
        out = memory.read_out(buf, entry(9.0))
        np.testing.assert_array_equal(out.data[:, 0], [1, 1, 2, 2, 9, 9])

    def test_full_buffer_drops_oldest(self, buf):
        for v in (1.0, 2.0, 3.0):
            memory.update(buf, entry(v))
        out = memory.read_out(buf, entry(9.0))
        assert out.shape[0] == 3 * 2
        np.testing.assert_array_equal(out.data[:, 0], [2, 2, 3, 3, 9, 9])

    def test_read_out_does_not_modify_buffer(self, buf):
        memory.update(buf, entry(1.0))
        memory.read_out(buf, entry(2.0))
        assert len(buf) == 1

    def test_v_stream_read_out(self, buf):
        memory.update(buf, entry(1.0), entry(5.0))
        out = memory.read_out(buf, entry(0.0), stream="V")
        assert out.data[0, 0] == 5.0

    def test_feature_dim_mismatch_raises(self, buf):
        memory.update(buf, entry(1.0))
        with pytest.raises(ShapeError):
            memory.read_out(buf, entry(1.0, dim=4))


# =============================================================================
# Update gain
# =============================================================================

class TestUpdateGain:

    def test_alpha_zero_stores_raw_exactly(self):
        buf = memory.create_buffer(2, 2, 2, alpha=0.0)
        raw = Tensor(np.random.default_rng(0).normal(size=(2, 3)))
        memory.update(buf, entry(5.0), raw=raw)
        np.testing.assert_array_equal(buf.k_stream[0].data, raw.data)

    def test_alpha_one_stores_refined_exactly(self, buf):
        refined = Tensor(np.random.default_rng(1).normal(size=(2, 3)))
        memory.update(buf, refined, raw=entry(0.0))
        np.testing.assert_array_equal(buf.k_stream[0].data, refined.data)

    def test_intermediate_alpha_blends(self):
        buf = memory.create_buffer(2, 2, 2, alpha=0.25)
        memory.update(buf, entry(4.0), raw=entry(0.0))
        np.testing.assert_allclose(buf.k_stream[0].data, 1.0)

    def test_missing_raw_raises(self):
        buf = memory.create_buffer(2, 2, 2, alpha=0.5)
        with pytest.raises(ConfigError):
            memory.update(buf, entry(1.0))

    def test_alpha_outside_unit_interval_raises(self):
        with pytest.raises(ConfigError):
            memory.create_buffer(2, 2, 2, alpha=1.5)


# =============================================================================
# State carry, reset, accounting, snapshots
# =============================================================================

class TestStates:

    def test_propagate_replaces_states(self, buf):
        k = SSMState(h=Tensor(np.ones((4, 2))))
        v = SSMState(h=Tensor(np.full((4, 2), 2.0)))
        memory.propagate(buf, k, v)
        assert buf.state("K") is k
        assert buf.state("V") is v

    def test_propagate_shape_mismatch_raises(self, buf):
        bad = SSMState.zeros(4, 3)
        with pytest.raises(StateError):
            memory.propagate(buf, bad, bad)

    def test_reset_empties_and_zeroes(self, buf):
        memory.update(buf, entry(1.0))
        memory.propagate(buf, SSMState(h=Tensor(np.ones((4, 2)))), SSMState(h=Tensor(np.ones((4, 2)))))
        memory.reset(buf)
        assert len(buf) == 0
        np.testing.assert_array_equal(buf.ssm_state_k.h.data, 0.0)

    def test_retained_bytes_bounded_by_capacity(self, buf):
        for v in range(10):
            memory.update(buf, entry(v))
            assert memory.retained_bytes(buf) <= memory.capacity_bytes(buf, (2, 3))
        assert memory.retained_bytes(buf) == memory.capacity_bytes(buf, (2, 3))

    def test_snapshot_restores_entries_and_states(self, buf, tmp_path):
        for v in range(4):
            memory.update(buf, entry(v))
        memory.propagate(buf, SSMState(h=Tensor(np.ones((4, 2)))), SSMState(h=Tensor(np.full((4, 2), 3.0))))
        memory.save_snapshot(buf, tmp_path / "buffer")
        restored = memory.load_snapshot(tmp_path / "buffer")
        assert restored.capacity == 3
        assert [t.data[0, 0] for t in restored.k_stream] == [1.0, 2.0, 3.0]
        np.testing.assert_array_equal(restored.ssm_state_v.h.data, 3.0)
        memory.update(restored, entry(7.0))
        assert len(restored) == 3
