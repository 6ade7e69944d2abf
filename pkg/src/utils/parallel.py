"""Ordered worker-pool mapping used by the per-image pipelines."""

from collections.abc import Callable, Iterable
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from typing import TypeVar

from tqdm import tqdm

from src.config import Config

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(requested: int | None) -> int:
    """Worker count after applying the OASS_THREADS override."""
    threads = Config.THREADS if Config.THREADS is not None else requested
    if threads is None:
        return 1
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    desc: str | None = None,
    progress: bool = False,
    processes: bool = False,
) -> list[R]:
    """Apply ``fn`` to every item and return the results in input order.

    With ``processes`` the ``threads`` workers are separate processes, which is
    what CPU-bound numpy/Python work needs to scale; ``fn`` and the items must
    then be picklable (a module-level function, plain data).
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, unit="img", disable=not progress)]

    workers = min(threads, len(items))
    pool: Executor = ProcessPoolExecutor(max_workers=workers) if processes else ThreadPoolExecutor(max_workers=workers)
    with pool:
        chunksize = max(1, len(items) // (workers * 4)) if processes else 1
        results = pool.map(fn, items, chunksize=chunksize)
        return list(tqdm(results, total=len(items), desc=desc, unit="img", disable=not progress))
