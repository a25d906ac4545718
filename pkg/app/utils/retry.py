import time
import random
from typing import Callable, Optional, Tuple, Type, TypeVar

T = TypeVar("T")

def retry(
    fn: Callable[[int], T],
    attempts: int = 3,
    base: float = 0.3,
    factor: float = 2.0,
    jitter: float = 0.2,
    retry_on: Tuple[Type[BaseException], ...] = (Exception,),
    on_retry: Optional[Callable[[int, BaseException, float], None]] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Call ``fn(attempt)`` until it succeeds or ``attempts`` calls have failed.

    Attempt numbers start at 1. Delays grow as ``base * factor**(attempt-1)``
    plus uniform jitter; exceptions outside ``retry_on`` propagate at once.
    """
    last_exc: Optional[BaseException] = None
    for i in range(max(1, attempts)):
        try:
            return fn(i + 1)
        except retry_on as e:
            last_exc = e
            if i == attempts - 1:
                break
            delay = base * (factor ** i)
            if jitter > 0:
                delay = delay + random.uniform(0, jitter)
            if on_retry is not None:
                on_retry(i + 1, e, delay)
            if delay > 0:
                sleep(delay)
    raise last_exc  # type: ignore[misc]
