import os
import typing
from contextlib import contextmanager
from contextvars import ContextVar

from msgspec import Struct


class Execution(Struct, frozen=True):
    """
    Settings that change how a run is executed but never what it computes.

    Args:
        threads: Worker threads used to simulate path blocks.
        progress: Show `tqdm` progress bars on standard error.
    """

    threads: int = 1
    progress: bool = False


_execution_ctx: ContextVar[Execution] = ContextVar("_execution_ctx", default=Execution())


@contextmanager
def execution_context(threads: typing.Optional[int] = None, progress: bool = False) -> typing.Iterator[Execution]:
    if threads is None or threads <= 0:
        threads = os.cpu_count() or 1
    execution = Execution(threads=threads, progress=progress)
    token = _execution_ctx.set(execution)
    try:
        yield execution
    finally:
        _execution_ctx.reset(token)


def current_execution() -> Execution:
    return _execution_ctx.get()
