"""Deterministic RNG and tensor-primitive tests.

The RNG is counter-mode SplitMix64: draw i depends only on (seed, i), so
streams are reproducible, order-independent, and cheap to fork.  The tensor
primitives are thin but carry the repository-wide layout contract, so they
are pinned against hand-computed oracles here.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from azarnet.errors import CorruptFileError, DimensionError
from azarnet.numerics import (
    TENSOR_MAGIC,
    matmul,
    read_tensor,
    reduce_sum,
    reshape,
    tensor_from_bytes,
    tensor_to_bytes,
    write_tensor,
)
from azarnet.rng import Rng, combine_seed, mix64


class TestMix64:
    def test_deterministic(self):
        assert mix64(0) == mix64(0)
        assert mix64(1) != mix64(2)

    def test_avalanche(self):
        # flipping one input bit should flip roughly half the output bits
        flips = bin(mix64(12345) ^ mix64(12345 ^ 1)).count("1")
        assert 16 <= flips <= 48

    def test_combine_seed_order_sensitive(self):
        assert combine_seed(1, 2) != combine_seed(2, 1)


class TestRngStreams:
    def test_same_seed_same_stream(self):
        a = Rng(42).uniform((100,))
        b = Rng(42).uniform((100,))
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = Rng(1).uniform((100,))
        b = Rng(2).uniform((100,))
        assert not np.array_equal(a, b)

    def test_spawn_independent_of_parent_consumption(self):
        r1 = Rng(5)
        child_before = r1.spawn(3).uniform((10,))
        r2 = Rng(5)
        r2.uniform((1000,))  # consume parent draws
        child_after = r2.spawn(3).uniform((10,))
        assert np.array_equal(child_before, child_after)

    def test_uniform_range_and_mean(self):
        u = Rng(9).uniform((20000,), low=2.0, high=6.0)
        assert u.min() >= 2.0 and u.max() < 6.0
        assert abs(u.mean() - 4.0) < 0.05

    def test_integers_bound(self):
        v = Rng(4).integers(7, (5000,))
        assert v.min() >= 0 and v.max() <= 6
        assert len(np.unique(v)) == 7

    def test_permutation_is_bijection(self):
        p = Rng(11).permutation(257)
        assert np.array_equal(np.sort(p), np.arange(257))

    def test_shuffle_preserves_elements(self):
        items = list(range(40))
        shuffled = list(items)
        Rng(13).shuffle(shuffled)
        assert sorted(shuffled) == items and shuffled != items

    @given(st.integers(0, 2**32), st.integers(1, 64))
    @settings(max_examples=25, deadline=None)
    def test_uniform_always_in_unit_interval(self, seed, n):
        u = Rng(seed).uniform((n,))
        assert np.all((u >= 0.0) & (u < 1.0))


class TestRngMask:
    def test_rate_zero_keeps_everything(self):
        assert Rng(1).mask((64, 64), 0.0).all()

    def test_rate_one_drops_everything(self):
        assert not Rng(1).mask((64, 64), 1.0).any()

    def test_drop_fraction_close_to_rate(self):
        for rate in (0.1, 0.3, 0.5):
            m = Rng(17).mask((200, 200), rate)
            dropped = 1.0 - m.mean()
            assert abs(dropped - rate) < 0.02, (rate, dropped)

    def test_deterministic_and_shape(self):
        a = Rng(3).mask((7, 5, 3), 0.4)
        b = Rng(3).mask((7, 5, 3), 0.4)
        assert a.shape == (7, 5, 3) and a.dtype == bool
        assert np.array_equal(a, b)


class TestMatmul:
    def test_against_triple_loop(self, rng_f64):
        a = rng_f64((7, 5))
        b = rng_f64((5, 9))
        ref = np.zeros((7, 9))
        for i in range(7):
            for j in range(9):
                for k in range(5):
                    ref[i, j] += a[i, k] * b[k, j]
        assert np.abs(matmul(a, b) - ref).max() < 1e-12

    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            matmul(np.ones((2, 3)), np.ones((4, 2)))
        with pytest.raises(DimensionError):
            matmul(np.ones(3), np.ones((3, 2)))


class TestReshapeReduce:
    def test_reshape_row_major_order(self):
        t = np.arange(12).reshape(3, 4)
        assert np.array_equal(reshape(t, (2, 6))[0], np.arange(6))

    def test_reshape_count_mismatch(self):
        with pytest.raises(DimensionError):
            reshape(np.ones((3, 4)), (5, 3))

    def test_reduce_sum(self):
        assert reduce_sum(np.arange(10)) == 45.0


class TestTensorEncoding:
    def test_round_trip(self, tmp_path, rng_f64):
        arr = rng_f64((5, 7, 3)).astype(np.float32)
        path = tmp_path / "t.spec"
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, arr)

    def test_header_layout(self):
        blob = tensor_to_bytes(np.zeros((2, 3), dtype=np.float32))
        assert blob[:8] == TENSOR_MAGIC
        assert len(blob) == 8 + 4 + 8 + 24  # magic, rank, dims, payload

    def test_bad_magic(self):
        with pytest.raises(CorruptFileError):
            tensor_from_bytes(b"BOGUS001" + b"\x00" * 16)

    def test_truncated_dims(self):
        blob = TENSOR_MAGIC + (3).to_bytes(4, "little") + b"\x00" * 4
        with pytest.raises(CorruptFileError):
            tensor_from_bytes(blob)

    def test_payload_size_mismatch(self):
        good = tensor_to_bytes(np.zeros((4,), dtype=np.float32))
        with pytest.raises(CorruptFileError):
            tensor_from_bytes(good[:-4])

    @given(st.lists(st.integers(1, 5), min_size=0, max_size=4))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_any_rank(self, dims):
        arr = np.arange(int(np.prod(dims)), dtype=np.float32).reshape(dims)
        assert np.array_equal(tensor_from_bytes(tensor_to_bytes(arr)), arr)
