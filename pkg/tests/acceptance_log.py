"""Collects one verdict per acceptance criterion for the terminal summary."""
import time
from contextlib import contextmanager

VERDICTS = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    VERDICTS[number] = (title, bool(ok), detail)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} ({title}): {detail}"
    print(line)
    assert ok, line


@contextmanager
def stopwatch():
    box = {}
    start = time.perf_counter()
    yield box
    box["seconds"] = time.perf_counter() - start
