"""Robustness: the probability that a random demand vector can be served.

``estimate_P`` counts feasible demand vectors by Monte Carlo for any design;
the remaining functions are exact expressions for special cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _core
from . import demand as dm
from ._streams import ALLOC, DEMAND, Estimate, chunk_rng, chunk_sizes, run_chunks
from .allocation import DesignKind, Kind, build, sample_choice_arrays
from .errors import ParameterMismatch

RobustnessEstimate = Estimate


@dataclass(frozen=True)
class Design:
    """A design to instantiate: fixed, or redrawn per trial when randomized."""

    kind: DesignKind
    n: int
    d: int

    def __post_init__(self):
        object.__setattr__(self, "kind", DesignKind.parse(self.kind))

    @property
    def n_objects(self) -> int:
        return self.n * self.kind.b if self.kind.kind is Kind.SINGLE_CHOICE else self.n


def _feasible_chunk(target, model, m, seed, chunk, rows, resample):
    k = target.n_objects
    rho = dm.sample_matrix(model, rows, k, chunk_rng(seed, chunk, DEMAND))
    if resample:
        choices = sample_choice_arrays(target.kind, target.n, target.d, rows, chunk_rng(seed, chunk, ALLOC))
        return _core.feasible_batch_regular(target.n, choices, rho, m)
    return _core.feasible_batch(target.n_nodes, target.indptr, target.indices, rho, m)


def feasible_indicators(target, model, m: float, trials: int, seed: int,
                        workers: int = 1, fix_alloc: bool = False) -> np.ndarray:
    """Per-trial feasibility (uint8) over ``trials`` sampled demand vectors.

    ``target`` is a built allocation, or a ``Design``. A randomized ``Design``
    gets a fresh allocation every trial unless ``fix_alloc`` is set, in which
    case a single instance is built from ``seed``.
    """
    if not m > 0:
        raise ValueError("threshold m must be > 0")
    resample = False
    if isinstance(target, Design):
        if target.kind.kind.randomized and not fix_alloc:
            resample = True
        else:
            target = build(target.kind, target.n, target.d, seed if target.kind.kind.randomized else None)
    sizes = chunk_sizes(trials)
    args = [(target, model, float(m), seed, i, r, resample) for i, r in enumerate(sizes)]
    return np.concatenate(run_chunks(_feasible_chunk, args, workers))


def estimate_P(target, model, m: float, trials: int, seed: int,
               workers: int = 1, fix_alloc: bool = False) -> Estimate:
    ok = feasible_indicators(target, model, m, trials, seed, workers, fix_alloc)
    return Estimate.from_counts(int(ok.sum()), trials, seed)


def P_single_choice(n: int, b: int, model, m: float) -> float:
    """Each node holds ``b`` objects alone, so P = F_b(m) ** n."""
    if b < 1:
        raise ValueError("b must be >= 1")
    return dm.sum_cdf(model, b, m) ** n


def clustering_formula(n: int, d: int, model, m: float) -> float:
    """``F_d(m d) ** (n / d)``, with a real exponent when d does not divide n."""
    return dm.sum_cdf(model, d, m * d) ** (n / d)


def P_clustering(n: int, d: int, model, m: float) -> float:
    if n % d:
        raise ParameterMismatch(f"clustering needs d | n, got n={n}, d={d}")
    return dm.sum_cdf(model, d, m * d) ** (n // d)


def _overlap_count(kind: Kind, n: int, d: int) -> int:
    if kind is Kind.CLUSTERING:
        if n % d:
            raise ParameterMismatch(f"clustering needs d | n, got n={n}, d={d}")
        return d
    if kind is Kind.CYCLIC:
        return 2 * d - 1
    if kind is Kind.BLOCK:
        v = d * d - d + 1
        if n % v:
            raise ParameterMismatch(f"block design needs n a multiple of d^2 - d + 1, got n={n}, d={d}")
        return v
    raise ParameterMismatch(f"no spike-demand formula for {kind.value}")


def _spike_term(kind: Kind, n: int, d: int, a: int) -> float:
    """Chance that ``a`` uniformly chosen active objects have disjoint service choices."""
    if kind is Kind.RANDOM:
        if n - a * d + 1 <= 0:
            return 0.0
        base = math.comb(n, d)
        out = 1.0
        for i in range(1, a):
            top = n - i * d
            if top < d:
                return 0.0
            out *= math.comb(top, d) / base
        return out
    c = _overlap_count(kind, n, d)
    if n - a * c + 1 <= 0:
        return 0.0
    out = 1.0
    for i in range(1, a):
        f = (n - i * c) / (n - i)
        if f <= 0:
            return 0.0
        out *= f
    return out


def P_bernoulli_spike(design, n: int, d: int, p: float, m: float = 1.0, form: str = "exact") -> float:
    """P under demand ``m d * Bernoulli(p)``.

    Averages the disjointness chance of the active set over A ~ Bin(n, p).
    ``m`` only rescales the spike, so the value does not depend on it.

    ``form="product"`` multiplies, for each further active object, the share of
    remaining objects outside the ``c`` that overlap each earlier one (``c = d``
    clustering, ``2d - 1`` cyclic, ``d^2 - d + 1`` block). For cyclic those exclusion
    zones can themselves overlap once three or more objects are active, so the
    product undercounts P; the default ``form="exact"`` counts cyclic active
    sets directly. The other designs give the same value either way.
    """
    kind = DesignKind.parse(design).kind
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if form not in ("exact", "product"):
        raise ValueError(f"unknown form {form!r}")
    if kind is Kind.CYCLIC and form == "exact":
        return cyclic_spike_exact(n, d, p)
    pmf = stats.binom.pmf(np.arange(n + 1), n, p)
    return float(sum(pmf[a] * _spike_term(kind, n, d, a) for a in range(n + 1) if pmf[a] > 0))


def clustering_spike_counting(n: int, d: int, p: float) -> float:
    """Clustering under spike demand by direct counting: the A active objects
    must fall in A distinct clusters, C(n/d, A) d^A of the C(n, A) choices."""
    if n % d:
        raise ParameterMismatch("clustering needs d | n")
    pmf = stats.binom.pmf(np.arange(n + 1), n, p)
    g = n // d
    return float(sum(pmf[a] * math.comb(g, a) * d**a / math.comb(n, a) for a in range(g + 1)))


def cyclic_spike_exact(n: int, d: int, p: float) -> float:
    """Cyclic design under spike demand, counted exactly.

    Active objects must sit at circular distance >= d from each other. The
    number of such a-subsets of an n-cycle is n / (n - a(d-1)) * C(n - a(d-1), a).
    """
    total = (1 - p) ** n
    for a in range(1, n + 1):
        free = n - a * (d - 1)
        if free < a:
            break
        count = n * math.comb(free, a) // free
        total += count * p**a * (1 - p) ** (n - a)
    return float(total)
