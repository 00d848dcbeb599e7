from concurrent.futures import ThreadPoolExecutor

from tqdm import tqdm

from ._types import Callable, List, Sequence, TypeVar
from .logs import general_logger

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(
        func: Callable[[T], R],
        items: Sequence[T],
        workers: int = 1,
        desc: str = "",
        progress: bool = True
) -> List[R]:
    """
    Apply `func` to every item and return the results in input order.

    Args:
        func (Callable): Function applied to each item. Must not share mutable state.
        items (Sequence): Items to process.
        workers (int): Number of worker threads; 1 runs serially.
        desc (str): Progress bar label.
        progress (bool): Whether to show a tqdm progress bar.

    Returns:
        List: One result per item, in the order of `items`.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    bar = tqdm(total=len(items), desc=desc, disable=not progress, leave=False)
    try:
        if workers == 1:
            results = []
            for item in items:
                results.append(func(item))
                bar.update(1)
            return results

        general_logger.debug(f"Running {len(items)} items on {workers} workers.")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(func, item) for item in items]
            for future in futures:
                future.add_done_callback(lambda _: bar.update(1))
            # Collect in submission order; the first raised error propagates
            return [future.result() for future in futures]
    finally:
        bar.close()
