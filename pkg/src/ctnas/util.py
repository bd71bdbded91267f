"""Shared helpers: canonical serialization, stable seeding, worker pool sizing."""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
U = TypeVar("U")

WORKERS_ENV = "CTNAS_WORKERS"


def canonical_json(obj, indent: int | None = 2) -> str:
    """Deterministic JSON text: sorted keys, stable float repr."""
    if indent is None:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return json.dumps(obj, sort_keys=True, indent=indent)


def stable_seed(*parts) -> int:
    """Map arbitrary values to a reproducible 63-bit RNG seed.

    Uses SHA-256 of the joined string forms, so the result is stable across
    processes and platforms (unlike hash()).
    """
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def worker_count() -> int:
    """Number of parallel workers, bounded by the CTNAS_WORKERS env var (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


def map_ordered(fn: Callable[[T], U], items: Sequence[T]) -> list[U]:
    """Apply fn over items, fanning out to worker_count() threads.

    Results come back in input order regardless of worker count, so callers
    stay deterministic.
    """
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
