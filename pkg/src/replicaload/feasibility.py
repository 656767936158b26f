"""Can a demand vector be served with every node loaded at most ``m``?

Two independent routes answer this. ``check_flow`` runs max-flow on the
source -> object -> node -> sink network. ``check_subsets`` tests the span
condition ``sum(rho_I) <= m * span(I)`` for every subset I directly. They must
agree; the second is only practical for a couple of dozen objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .allocation import StorageAllocation, span
from .errors import LengthMismatch, NonpositiveThreshold, TooLarge

MIN_THRESHOLD_TOL = 1e-6


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    max_served: float
    total: float
    m: float
    violating: tuple | None = None  # object subset I with sum(rho_I) > m * span(I)
    excess: float | None = None  # sum(rho_I) - m * span(I) for that subset
    flow: np.ndarray | None = None  # per (object, node) flow, aligned with alloc.indices

    def __bool__(self):
        return self.feasible

    def node_loads(self, alloc: StorageAllocation) -> np.ndarray:
        if self.flow is None:
            raise ValueError("verdict carries no flow assignment")
        return np.bincount(alloc.indices, weights=self.flow, minlength=alloc.n_nodes)

    def describe(self) -> str:
        if self.feasible:
            return "feasible"
        return "infeasible I={" + ",".join(map(str, self.violating)) + "}"


def _validate(alloc, rho, m):
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or rho.size != alloc.n_objects:
        raise LengthMismatch(f"demand vector has length {rho.size}, allocation has {alloc.n_objects} objects")
    if not np.all(np.isfinite(rho)) or np.any(rho < 0):
        raise ValueError("demands must be finite and nonnegative")
    if not m > 0:
        raise NonpositiveThreshold(f"threshold m must be > 0, got {m}")
    return rho


def check_flow(alloc: StorageAllocation, rho, m: float) -> FeasibilityVerdict:
    rho = _validate(alloc, rho, m)
    total = float(rho.sum())
    flow, edge_flow, reach = _core.max_flow(alloc.n_nodes, alloc.indptr, alloc.indices, rho, float(m))
    tol = _core.tolerance(total)
    if flow >= total - tol:
        return FeasibilityVerdict(True, flow, total, m, flow=edge_flow)
    # source side of the min cut: its objects need more than their span offers
    subset = tuple(int(i) for i in np.flatnonzero(reach))
    excess = float(rho[list(subset)].sum()) - m * span(alloc, subset) if subset else 0.0
    if not excess > 0:
        # rounding left the cut ambiguous; fall back to the largest-excess subset
        subset, excess = _best_subset(alloc, rho, m)
    return FeasibilityVerdict(False, flow, total, m, subset, excess, edge_flow)


def _subset_tables(alloc, rho):
    k = alloc.n_objects
    size = 1 << k
    sums = np.zeros(size)
    unions = np.zeros((size, alloc._packed.shape[1]), dtype=np.uint64)
    for i in range(k):
        lo = 1 << i
        sums[lo : 2 * lo] = sums[:lo] + rho[i]
        unions[lo : 2 * lo] = unions[:lo] | alloc._packed[i]
    spans = np.bitwise_count(unions).sum(axis=1)
    return sums, spans


def _best_subset(alloc, rho, m):
    if alloc.n_objects > _core.MAX_SUBSET_OBJECTS:
        raise TooLarge("cannot enumerate subsets for a witness")
    sums, spans = _subset_tables(alloc, rho)
    ex = sums - m * spans
    mask = int(np.argmax(ex))
    return tuple(i for i in range(alloc.n_objects) if mask >> i & 1), float(ex[mask])


def check_subsets(alloc: StorageAllocation, rho, m: float) -> FeasibilityVerdict:
    rho = _validate(alloc, rho, m)
    k = alloc.n_objects
    if k > _core.MAX_SUBSET_OBJECTS:
        raise TooLarge(f"{k} objects is too many for subset enumeration (max {_core.MAX_SUBSET_OBJECTS})")
    total = float(rho.sum())
    mask = _core.first_violating_subset(alloc.n_nodes, alloc.indptr, alloc.indices, rho, float(m))
    # max served = total minus the worst excess over subsets (empty subset gives 0)
    sums, spans = _subset_tables(alloc, rho)
    served = total - max(0.0, float(np.max(sums - m * spans)))
    if mask < 0:
        return FeasibilityVerdict(True, served, total, m)
    subset = tuple(i for i in range(k) if mask >> i & 1)
    excess = float(rho[list(subset)].sum()) - m * span(alloc, subset)
    return FeasibilityVerdict(False, served, total, m, subset, excess)


def min_threshold(alloc: StorageAllocation, rho, tol: float = MIN_THRESHOLD_TOL) -> float:
    """Smallest m under which ``rho`` is servable, to within ``tol``."""
    rho = _validate(alloc, rho, 1.0)
    total = float(rho.sum())
    if total == 0:
        return 0.0
    degs = np.diff(alloc.indptr)
    lo = max(total / alloc.n_nodes, float(np.max(rho / degs)))
    hi = total
    if _served(alloc, rho, lo):
        return lo
    while hi - lo > tol * 0.5:
        mid = 0.5 * (lo + hi)
        if _served(alloc, rho, mid):
            hi = mid
        else:
            lo = mid
    return hi


def _served(alloc, rho, m):
    return bool(_core.feasible_batch(alloc.n_nodes, alloc.indptr, alloc.indices, rho[None, :], m)[0])
