"""Seeded random streams and Monte Carlo bookkeeping shared by the estimators.

Every Monte Carlo loop splits its trials into fixed-size chunks. Chunk ``i``
draws from a generator seeded with ``(seed, i, stream)``, so the result of a
run depends only on the master seed, never on how chunks are spread across
workers. Estimators that share a seed therefore see identical demand vectors
(common random numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

CHUNK = 2000
Z95 = 1.959963984540054

# stream ids
DEMAND = 0
ALLOC = 1
AUX = 2


def chunk_rng(seed: int, chunk: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(chunk), int(stream)])


def chunk_sizes(trials: int, chunk: int = CHUNK) -> list[int]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    full, rest = divmod(trials, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(fn, args_list, workers: int = 1):
    """Map ``fn`` over per-chunk argument tuples, preserving order."""
    if workers <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futs]


def wilson(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = max(0.0, centre - half)
    hi = min(1.0, centre + half)
    # guard the rounding at the endpoints so lo <= p <= hi always holds
    return min(lo, p), max(hi, p)


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo probability with a 95% Wilson interval."""

    p_hat: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int | None = None

    @classmethod
    def from_counts(cls, successes: int, trials: int, seed=None) -> "Estimate":
        lo, hi = wilson(successes, trials)
        return cls(successes / trials, lo, hi, trials, seed)

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    def __contains__(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high
