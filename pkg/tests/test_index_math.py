"""
Unit tests for index statistics
Covers msb/lsb/span, the variation V(n), tails and the run decomposition
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadika.services.index_math import (
    InvalidIndexError,
    block_decomposition,
    index_stats,
    is_power_of_two,
    tail,
    tails,
)

indices = st.integers(min_value=1, max_value=(1 << 40) - 1)


class TestIndexStats:
    """Binary statistics of single indices"""

    def test_one(self):
        stats = index_stats(1)
        assert (stats.msb, stats.lsb, stats.span, stats.variation) == (0, 0, 0, 2)
        assert stats.is_power_of_two

    def test_five(self):
        stats = index_stats(5)
        assert stats.msb == 2
        assert stats.lsb == 0
        assert stats.span == 2
        assert stats.variation == 4
        assert stats.set_bits == (2, 0)

    def test_even_index_counts_the_final_fall(self):
        # 110: rise at 1, fall at 3
        assert index_stats(6).variation == 2
        assert index_stats(12).variation == 2

    def test_alternating_digits(self):
        assert index_stats(85).variation == 8
        assert index_stats(3).variation == 2

    def test_to_dict(self):
        record = index_stats(13).to_dict()
        assert record == {'n': 13, 'msb': 3, 'lsb': 0, 'span': 3, 'variation': 4, 'popcount': 3}

    @pytest.mark.parametrize("bad", [0, -3, True, 2.0, "7", 1 << 64])
    def test_invalid_indices(self, bad):
        with pytest.raises(InvalidIndexError):
            index_stats(bad)


class TestTails:
    """Tails obtained by dropping leading set bits"""

    def test_tails_of_thirteen(self):
        assert tail(13, 1) == 5
        assert tail(13, 2) == 1
        assert tail(13, 3) == 0
        assert tails(13) == [(3, 5), (2, 1), (0, 0)]

    def test_position_out_of_range(self):
        with pytest.raises(InvalidIndexError):
            tail(13, 4)
        with pytest.raises(InvalidIndexError):
            tail(13, 0)

    def test_accepts_dyadic_index(self):
        assert tail(index_stats(13), 1) == 5


class TestBlockDecomposition:
    """Maximal runs of ones"""

    def test_thirteen(self):
        assert block_decomposition(13).blocks == ((3, 2), (0, 0))

    def test_single_run(self):
        assert block_decomposition(7).blocks == ((2, 0),)
        assert block_decomposition(8).blocks == ((3, 3),)

    def test_power_of_two_helper(self):
        assert is_power_of_two(64)
        assert not is_power_of_two(0)
        assert not is_power_of_two(6)


class TestIndexProperties:
    """Invariants that hold for every positive index"""

    @settings(max_examples=200)
    @given(indices)
    def test_variation_is_twice_the_run_count(self, n):
        assert index_stats(n).variation == 2 * block_decomposition(n).count

    @settings(max_examples=200)
    @given(indices)
    def test_variation_counts_digit_changes(self, n):
        assert index_stats(n).variation == bin(n ^ (n << 1)).count('1')

    @settings(max_examples=200)
    @given(indices)
    def test_runs_reconstruct_the_index(self, n):
        assert block_decomposition(n).reconstruct() == n

    @settings(max_examples=200)
    @given(indices)
    def test_span_vanishes_exactly_for_powers_of_two(self, n):
        assert (index_stats(n).span == 0) == is_power_of_two(n)

    @settings(max_examples=200)
    @given(indices)
    def test_tails_drop_leading_bits(self, n):
        for bit, rest in tails(n):
            assert rest < (1 << bit)
            assert (n >> bit) & 1 == 1
            assert n - rest == (n >> bit) << bit
