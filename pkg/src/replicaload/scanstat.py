"""Scan statistics: the largest sum of ``s`` consecutive demands.

``S_s`` scans the sequence linearly; the circular variant ``S_s^(c)`` also
scores the windows that wrap past the end. Monte Carlo estimates draw demand
sequences from the same seeded streams as ``robustness.estimate_P``, so scan
events and feasibility are evaluated on identical samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import demand as dm
from ._streams import DEMAND, Estimate, chunk_rng, chunk_sizes, run_chunks
from .errors import TooShort, WindowTooLarge

NAUS_TRIALS = 100_000
# windows longer than this are summed through a running total
_DIRECT_WINDOW = 16


@dataclass(frozen=True)
class ScanQuery:
    n: int
    s: int
    x: float
    circular: bool = False

    def __post_init__(self):
        if not 1 <= self.s <= self.n:
            raise WindowTooLarge(f"window s={self.s} must lie in [1, n={self.n}]")


def leq(values, x):
    """``values <= x`` with the same relative slack the feasibility check allows."""
    return values <= x + 1e-9 * abs(x) + 1e-12


def window_sums(X: np.ndarray, s: int, circular: bool) -> np.ndarray:
    """Sums of every window of ``s`` consecutive entries along the last axis.

    Circular mode returns ``n`` windows whose first ``n - s + 1`` are exactly
    the linear ones, so ``S^(c) >= S`` holds without rounding slack.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    if not 1 <= s <= n:
        raise WindowTooLarge(f"window s={s} must lie in [1, n={n}]")
    if circular and s > 1:
        X = np.concatenate([X, X[..., : s - 1]], axis=-1)
    if s <= _DIRECT_WINDOW:
        return sliding_window_view(X, s, axis=-1).sum(axis=-1)
    c = np.cumsum(X, axis=-1)
    head = c[..., s - 1 : s]
    return np.concatenate([head, c[..., s:] - c[..., :-s]], axis=-1)


def scan_statistic(xs, s: int, circular: bool = False) -> float:
    return float(window_sums(np.asarray(xs, dtype=float)[None, :], s, circular).max())


def scan_batch(X: np.ndarray, s: int, circular: bool = False) -> np.ndarray:
    """Row-wise scan statistic of a ``(trials, n)`` array."""
    return window_sums(X, s, circular).max(axis=-1)


def _scan_chunk(model, n, windows, seed, chunk, rows):
    X = dm.sample_matrix(model, rows, n, chunk_rng(seed, chunk, DEMAND))
    return {(s, c): scan_batch(X, s, c) for s, c in windows}


def scan_samples(model, n: int, windows, trials: int, seed: int, workers: int = 1) -> dict:
    """Scan values per ``(s, circular)`` window spec over ``trials`` demand sequences.

    Row ``t`` is built from the same demand vector that ``estimate_P`` uses for
    trial ``t`` at this seed.
    """
    windows = sorted(set((int(s), bool(c)) for s, c in windows))
    for s, _ in windows:
        if not 1 <= s <= n:
            raise WindowTooLarge(f"window s={s} must lie in [1, n={n}]")
    sizes = chunk_sizes(trials)
    parts = run_chunks(_scan_chunk, [(model, n, windows, seed, i, r) for i, r in enumerate(sizes)], workers)
    return {w: np.concatenate([p[w] for p in parts]) for w in windows}


def scan_cdf_mc(model, q: ScanQuery, trials: int, seed: int, workers: int = 1) -> Estimate:
    """``P(S_s <= x)`` (or the circular version) by Monte Carlo."""
    vals = scan_samples(model, q.n, [(q.s, q.circular)], trials, seed, workers)[(q.s, q.circular)]
    return Estimate.from_counts(int(np.count_nonzero(leq(vals, q.x))), trials, seed)


def scan_cdf_poisson(model, q: ScanQuery) -> float:
    """Poisson-clumping form ``exp(-(n - s + 1) * Q_s(x))``."""
    tail = dm.sum_tail(model, q.s, q.x)
    return math.exp(-(q.n - q.s + 1) * tail)


def scan_cdf_naus(model, q: ScanQuery, trials_per_cell: int = NAUS_TRIALS, seed: int = 0) -> float:
    """Naus product approximation ``P2 * (P3 / P2) ** (n / s - 2)``.

    ``P2`` and ``P3`` are the chances that no window exceeds ``x`` over linear
    sequences of ``2s`` and ``3s`` demands; both come from one Monte Carlo
    sample of ``3s``-long sequences.
    """
    n, s = q.n, q.s
    if n < 3 * s:
        raise TooShort(f"Naus approximation needs n >= 3s, got n={n}, s={s}")
    ok2 = ok3 = 0
    for chunk, rows in enumerate(chunk_sizes(trials_per_cell)):
        X = dm.sample_matrix(model, rows, 3 * s, chunk_rng(seed, chunk, DEMAND))
        W = window_sums(X, s, circular=False)
        # windows fully inside the first 2s entries are the first s + 1 of them
        in2 = leq(W[:, : s + 1].max(axis=1), q.x)
        in3 = in2 & leq(W[:, s + 1 :].max(axis=1), q.x)
        ok2 += int(in2.sum())
        ok3 += int(in3.sum())
    if ok2 == 0:
        return 0.0
    p2 = ok2 / trials_per_cell
    p3 = ok3 / trials_per_cell
    return float(p2 * (p3 / p2) ** (n / s - 2))
