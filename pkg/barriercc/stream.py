import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, Optional, TypeVar

import numpy as np
from msgspec import Struct
from tqdm import tqdm

from .context import current_execution
from .rng import block_seeds, block_sizes, make_stream

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_BLOCK_SIZE = 2**14


class BlockStats(Struct, frozen=True):
    """
    Count, mean and sum of squared deviations of a block of per-path values.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_values(cls, values: np.ndarray) -> "BlockStats":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(count=int(values.size), mean=mean, m2=float(np.square(values - mean).sum()))

    def merge(self, other: "BlockStats") -> "BlockStats":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return BlockStats(count=count, mean=mean, m2=m2)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.inf
        return math.sqrt(self.m2 / (self.count - 1) / self.count)


class BlockStream:
    """
    Runs a path-block function over the fixed block partition of a path budget.

    Block `b` always draws from `SeedSpec(master_seed, b)`, and results are yielded in
    block order whatever the number of worker threads.
    """

    def __init__(
        self,
        n_paths: int,
        master_seed: int,
        *,
        block_size: int = DEFAULT_BLOCK_SIZE,
        desc: Optional[str] = None,
    ) -> None:
        self.n_paths = n_paths
        self.master_seed = master_seed
        self.block_size = block_size
        self.sizes = block_sizes(n_paths, block_size)
        self.seeds = block_seeds(master_seed, n_paths, block_size)
        self.desc = desc

    def __len__(self) -> int:
        return len(self.sizes)

    def _run_block(self, func: Callable[[np.random.Generator, int], T], stream_id: int) -> T:
        stream = make_stream(self.seeds[stream_id])
        return func(stream, self.sizes[stream_id])

    def run(self, func: Callable[[np.random.Generator, int], T]) -> Iterator[T]:
        """
        Yield `func(stream, size)` for every block, in block order.

        Blocks are submitted in waves so that a consumer that stops early does not
        pay for the whole budget.
        """
        execution = current_execution()
        wave = max(1, 2 * execution.threads)
        progress = tqdm(
            total=self.n_paths,
            desc=self.desc,
            unit="path",
            unit_scale=True,
            disable=not execution.progress,
            leave=False,
        )
        logger.debug("running %d block(s) of %d path(s) on %d thread(s)", len(self), self.block_size, execution.threads)
        try:
            if execution.threads == 1:
                for stream_id in range(len(self)):
                    result = self._run_block(func, stream_id)
                    progress.update(self.sizes[stream_id])
                    yield result
                return

            with ThreadPoolExecutor(max_workers=execution.threads) as executor:
                for start in range(0, len(self), wave):
                    ids = range(start, min(start + wave, len(self)))
                    futures = [executor.submit(self._run_block, func, stream_id) for stream_id in ids]
                    for stream_id, future in zip(ids, futures):
                        result = future.result()
                        progress.update(self.sizes[stream_id])
                        yield result
        finally:
            progress.close()

    def reduce(
        self,
        func: Callable[[np.random.Generator, int], BlockStats],
        target_stderr: Optional[float] = None,
    ) -> BlockStats:
        """
        Merge block statistics in block order, optionally stopping once the
        running standard error is below `target_stderr`.
        """
        total = BlockStats()
        for stats in self.run(func):
            total = total.merge(stats)
            if target_stderr is not None and total.count > 1 and total.stderr < target_stderr:
                logger.info("target stderr %.3g reached after %d path(s)", target_stderr, total.count)
                break
        return total
