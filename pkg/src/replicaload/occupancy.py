"""Occupancy with complexes.

``N_{n,d,u}`` is the number of distinct cells hit when ``u`` independent
uniform d-subsets (complexes) of ``n`` cells are thrown. In the random design
the span of ``u`` objects has exactly this law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._streams import AUX, chunk_rng, chunk_sizes, run_chunks
from .allocation import random_subsets


@dataclass(frozen=True)
class OccupancyQuery:
    n: int
    d: int
    u: int

    def __post_init__(self):
        if not 1 <= self.d <= self.n:
            raise ValueError(f"need 1 <= d <= n, got d={self.d}, n={self.n}")
        if self.u < 1:
            raise ValueError("u must be >= 1")

    @property
    def support(self) -> tuple[int, int]:
        return self.d, min(self.n, self.u * self.d)


def occupancy_batch(q: OccupancyQuery, trials: int, rng) -> np.ndarray:
    """``trials`` independent draws of ``N_{n,d,u}``."""
    picks = random_subsets(rng, trials * q.u, q.n, q.d).reshape(trials, q.u * q.d)
    hit = np.zeros((trials, q.n), dtype=bool)
    hit[np.arange(trials)[:, None], picks] = True
    return hit.sum(axis=1)


def sample_occupancy(q: OccupancyQuery, rng) -> int:
    return int(occupancy_batch(q, 1, rng)[0])


def mean_occupancy(q: OccupancyQuery) -> float:
    # each cell is missed by one complex with probability 1 - d/n
    return q.n * (1.0 - (1.0 - q.d / q.n) ** q.u)


def _occ_chunk(q, seed, chunk, rows):
    return occupancy_batch(q, rows, chunk_rng(seed, chunk, AUX))


def occupancy_samples(q: OccupancyQuery, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    sizes = chunk_sizes(trials)
    return np.concatenate(run_chunks(_occ_chunk, [(q, seed, i, r) for i, r in enumerate(sizes)], workers))


def occupancy_pmf_mc(q: OccupancyQuery, trials: int, seed: int, workers: int = 1) -> dict:
    vals = occupancy_samples(q, trials, seed, workers)
    counts = np.bincount(vals, minlength=q.n + 1)
    return {int(v): int(c) / trials for v, c in enumerate(counts) if c}


def occupancy_pmf_exact(q: OccupancyQuery) -> dict:
    """Exact law of ``N_{n,d,u}`` by stepping through the complexes one at a time.

    With ``j`` cells already hit, the next complex hits ``i`` new ones with
    probability C(n-j, i) C(j, d-i) / C(n, d).
    """
    n, d = q.n, q.d
    total = math.comb(n, d)
    probs = np.zeros(n + 1)
    probs[d] = 1.0
    for _ in range(q.u - 1):
        nxt = np.zeros(n + 1)
        for j in np.flatnonzero(probs):
            for i in range(0, min(d, n - j) + 1):
                w = math.comb(n - j, i) * math.comb(j, d - i)
                if w:
                    nxt[j + i] += probs[j] * w / total
        probs = nxt
    return {int(v): float(p) for v, p in enumerate(probs) if p > 0}
