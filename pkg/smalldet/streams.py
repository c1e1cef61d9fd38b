#!/usr/bin/env python3
"""
Counter-based random streams for SMALLDET.

All randomness is drawn from Philox generators keyed by a base seed and a
substream id. Monte Carlo trials are cut into fixed-size blocks and block b
always uses substream b, so trial t consumes the same random numbers no
matter how many workers share the run or in which order blocks finish.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 10_000


def make_generator(seed: int, stream: Optional[int] = None) -> np.random.Generator:
    """
    Create the generator for a (seed, substream) pair.

    Args:
        seed: Non-negative base seed
        stream: Optional substream id; None selects the root stream

    Returns:
        numpy Generator backed by a Philox bit generator

    Raises:
        ValueError: If seed or stream is negative
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    if stream is not None and stream < 0:
        raise ValueError(f"Substream id must be non-negative, got {stream}")

    spawn_key: Tuple[int, ...] = () if stream is None else (int(stream),)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class Block:
    """A contiguous run of trials drawn from one substream."""

    stream: int
    count: int


@dataclass(frozen=True)
class SubstreamPlan:
    """
    Assignment of a trial range to substream blocks.

    Trials [first_trial, first_trial + trials) are covered by blocks of
    block_size trials; the block holding trial t is t // block_size. A run may
    only start on a block boundary so that two adjacent runs reproduce one
    longer run exactly.
    """

    trials: int
    block_size: int = DEFAULT_BLOCK_SIZE
    first_trial: int = 0

    def __post_init__(self) -> None:
        if self.trials < 0:
            raise ValueError(f"Trial count must be non-negative, got {self.trials}")
        if self.block_size < 1:
            raise ValueError(f"Block size must be positive, got {self.block_size}")
        if self.first_trial < 0 or self.first_trial % self.block_size:
            raise ValueError(
                f"first_trial={self.first_trial} must be a non-negative multiple "
                f"of block_size={self.block_size}"
            )

    def blocks(self) -> List[Block]:
        """All blocks of the plan in trial order; the last one may be partial."""
        first_block = self.first_trial // self.block_size
        full, rest = divmod(self.trials, self.block_size)
        blocks = [Block(first_block + i, self.block_size) for i in range(full)]
        if rest:
            blocks.append(Block(first_block + full, rest))
        return blocks

    def partition(self, workers: int) -> List[List[Block]]:
        """
        Split the blocks into contiguous ranges, one per worker.

        Args:
            workers: Number of workers (extra workers receive no blocks)

        Returns:
            List of non-empty block lists
        """
        if workers < 1:
            raise ValueError(f"Worker count must be positive, got {workers}")

        blocks = self.blocks()
        if not blocks:
            return []
        share, extra = divmod(len(blocks), workers)
        ranges: List[List[Block]] = []
        start = 0
        for worker in range(workers):
            size = share + (1 if worker < extra else 0)
            if size:
                ranges.append(blocks[start : start + size])
            start += size
        logger.debug(
            f"Partitioned {len(blocks)} blocks across {len(ranges)} workers"
        )
        return ranges
