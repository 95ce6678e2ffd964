from __future__ import annotations

import asyncio
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


async def gather_blocks(fn: Callable[[T], R], blocks: Sequence[T], workers: int) -> list[R]:
    """Run `fn` on every block in a thread executor and keep block order.

    numpy releases the GIL inside its kernels, so threads give real overlap for
    the vectorized simulation blocks while closures in model specs stay usable.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [loop.run_in_executor(executor, fn, block) for block in blocks]
        return list(await asyncio.gather(*futures))


def map_blocks(fn: Callable[[T], R], blocks: Sequence[T], workers: int = 1) -> list[R]:
    """Synchronous entry point for `gather_blocks`.

    With one worker (or one block) the blocks run inline, which keeps stack
    traces simple and avoids an event loop in library calls.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(blocks) <= 1:
        return [fn(block) for block in blocks]
    logger.debug("Fan-out blocks=%s workers=%s", len(blocks), workers)
    return asyncio.run(gather_blocks(fn, blocks, workers))
