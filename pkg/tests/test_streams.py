#!/usr/bin/env python3
"""
Test suite for counter-based random streams and substream plans.
"""
import numpy as np
import pytest

from smalldet.streams import Block, SubstreamPlan, make_generator


@pytest.mark.unit
class TestMakeGenerator:
    """Test generator construction."""

    def test_same_key_same_numbers(self):
        a = make_generator(7, 3).standard_normal(100)
        b = make_generator(7, 3).standard_normal(100)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_distinct(self):
        a = make_generator(7, 0).standard_normal(100)
        b = make_generator(7, 1).standard_normal(100)
        root = make_generator(7).standard_normal(100)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, root)

    def test_split_draws_match_single_draw(self):
        """Consecutive draws consume the stream exactly like one large draw."""
        whole = make_generator(11, 2).standard_normal((10, 4))
        rng = make_generator(11, 2)
        parts = np.concatenate([rng.standard_normal((3, 4)), rng.standard_normal((7, 4))])
        np.testing.assert_array_equal(whole, parts)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            make_generator(-1)
        with pytest.raises(ValueError, match="non-negative"):
            make_generator(1, -2)


@pytest.mark.unit
class TestSubstreamPlan:
    """Test block layout and worker partitioning."""

    def test_blocks_cover_trials(self):
        plan = SubstreamPlan(25, block_size=10)
        assert plan.blocks() == [Block(0, 10), Block(1, 10), Block(2, 5)]

    def test_first_trial_offsets_streams(self):
        plan = SubstreamPlan(20, block_size=10, first_trial=30)
        assert [b.stream for b in plan.blocks()] == [3, 4]

    def test_first_trial_must_align(self):
        with pytest.raises(ValueError, match="multiple"):
            SubstreamPlan(10, block_size=10, first_trial=5)

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            SubstreamPlan(-1)
        with pytest.raises(ValueError):
            SubstreamPlan(10, block_size=0)

    def test_empty_plan(self):
        plan = SubstreamPlan(0)
        assert plan.blocks() == []
        assert plan.partition(4) == []

    @pytest.mark.parametrize("workers", [1, 2, 3, 8, 20])
    def test_partition_is_contiguous(self, workers):
        plan = SubstreamPlan(95, block_size=10)
        ranges = plan.partition(workers)

        flattened = [block for blocks in ranges for block in blocks]
        assert flattened == plan.blocks()
        assert len(ranges) == min(workers, 10)
        sizes = [len(blocks) for blocks in ranges]
        assert max(sizes) - min(sizes) <= 1

    def test_partition_rejects_zero_workers(self):
        with pytest.raises(ValueError, match="positive"):
            SubstreamPlan(10).partition(0)
