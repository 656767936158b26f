"""Replicated storage allocations.

An allocation stores ``k`` objects on ``n`` nodes; object ``i`` is kept on the
node set ``C_i`` (its service choices). This module builds the named d-choice
designs and answers structural questions about an allocation: spans,
cumulative overlaps, r-gap membership and overlap statistics.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _core
from .errors import (
    AlreadyStored,
    BudgetExceeded,
    IndexOutOfRange,
    InfeasibleConstraint,
    NoBlockDesign,
    NotStored,
    ParameterMismatch,
)

ENUM_BUDGET = 10**7
CONSTRAINED_RETRIES = 64
_COMBO_BATCH = 1 << 15


class Kind(str, enum.Enum):
    SINGLE_CHOICE = "single-choice"
    CLUSTERING = "clustering"
    CYCLIC = "cyclic"
    BLOCK = "block"
    RANDOM = "random"
    RANDOM_BLOCK_APPROX = "random-block-approx"
    CONSTRAINED_RANDOM = "constrained-random"

    @property
    def randomized(self) -> bool:
        return self in (Kind.RANDOM, Kind.RANDOM_BLOCK_APPROX, Kind.CONSTRAINED_RANDOM)


@dataclass(frozen=True)
class DesignKind:
    """A design family plus its own parameter (``b`` or ``v_max``) if it has one."""

    kind: Kind
    b: int = 1
    v_max: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.b < 1 or self.v_max < 0:
            raise ValueError("design parameters must be nonnegative (b >= 1)")

    def __str__(self):
        if self.kind is Kind.SINGLE_CHOICE:
            return f"single-choice:b={self.b}"
        if self.kind is Kind.CONSTRAINED_RANDOM:
            return f"constrained-random:v_max={self.v_max}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str | Kind | DesignKind) -> DesignKind:
        """Accept ``cyclic``, ``single-choice:b=2``, ``constrained-random:v_max=2``."""
        if isinstance(text, DesignKind):
            return text
        if isinstance(text, Kind):
            return cls(text)
        name, _, rest = text.strip().partition(":")
        kw = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, val = item.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in ("b", "v_max"):
                raise ValueError(f"bad design parameter {item!r}")
            kw[key] = int(val)
        try:
            kind = Kind(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown design kind {name!r}") from None
        return cls(kind, **kw)


@dataclass(frozen=True)
class OverlapProfile:
    """Pairwise overlap sizes.

    ``by_size`` maps an overlap size >= 1 to its share among the pairs that
    overlap at all; ``zero_fraction`` is the share of all pairs that do not.
    """

    by_size: dict
    zero_fraction: float
    pairs: int

    def unconditional(self) -> dict:
        """Shares over all pairs, including size 0; these sum to 1."""
        out = {0: self.zero_fraction}
        for s, f in self.by_size.items():
            out[s] = f * (1.0 - self.zero_fraction)
        return out


@dataclass(frozen=True)
class StorageAllocation:
    n_nodes: int
    choices: tuple
    kind: str = "custom"
    seed: int | None = None
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        ch = tuple(tuple(int(p) for p in c) for c in self.choices)
        object.__setattr__(self, "choices", ch)
        if self._checked:
            return
        if self.n_nodes < 1:
            raise ValueError("need at least one node")
        for i, c in enumerate(ch):
            if not c:
                raise ValueError(f"object {i} has no service choices")
            if len(set(c)) != len(c):
                raise ValueError(f"object {i} has duplicate service choices {c}")
            if min(c) < 0 or max(c) >= self.n_nodes:
                raise IndexOutOfRange(f"object {i} uses a node outside [0, {self.n_nodes})")

    @property
    def n_objects(self) -> int:
        return len(self.choices)

    @cached_property
    def d(self) -> int | None:
        """Replication factor if every object has the same number of copies."""
        sizes = {len(c) for c in self.choices}
        return sizes.pop() if len(sizes) == 1 else None

    @cached_property
    def node_contents(self) -> tuple:
        nodes = [[] for _ in range(self.n_nodes)]
        for i, c in enumerate(self.choices):
            for p in c:
                nodes[p].append(i)
        return tuple(tuple(x) for x in nodes)

    @cached_property
    def loads(self) -> np.ndarray:
        """Number of distinct objects stored on each node."""
        return np.bincount(self.indices, minlength=self.n_nodes)

    @property
    def is_balanced(self) -> bool:
        return self.d is not None and bool(np.all(self.loads == self.loads[0]))

    @cached_property
    def indptr(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([len(c) for c in self.choices])]).astype(np.int64)

    @cached_property
    def indices(self) -> np.ndarray:
        return np.fromiter(itertools.chain.from_iterable(self.choices), dtype=np.int64,
                           count=int(self.indptr[-1]))

    @cached_property
    def choice_array(self) -> np.ndarray:
        """``(k, d)`` array of choices; only for regular allocations."""
        if self.d is None:
            raise ValueError("allocation is not regular")
        return self.indices.reshape(self.n_objects, self.d)

    @cached_property
    def incidence(self) -> np.ndarray:
        """``(k, n)`` 0/1 matrix with a 1 where object i is stored on node j."""
        M = np.zeros((self.n_objects, self.n_nodes), dtype=np.int32)
        rows = np.repeat(np.arange(self.n_objects), np.diff(self.indptr))
        M[rows, self.indices] = 1
        return M

    @cached_property
    def _packed(self) -> np.ndarray:
        # (k, words) uint64 bitmasks of each C_i
        words = (self.n_nodes + 63) // 64
        out = np.zeros((self.n_objects, words), dtype=np.uint64)
        for i, c in enumerate(self.choices):
            for p in c:
                out[i, p >> 6] |= np.uint64(1) << np.uint64(p & 63)
        return out

    # serialization

    def to_text(self) -> str:
        d = self.d if self.d is not None else "mixed"
        lines = [f"nodes={self.n_nodes} objects={self.n_objects} d={d} kind={self.kind} seed={self.seed}"]
        lines += [f"{i}: {','.join(map(str, c))}" for i, c in enumerate(self.choices)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> StorageAllocation:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty allocation file")
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        n = int(header["nodes"])
        k = int(header["objects"])
        choices = []
        for ln in lines[1:]:
            idx, _, rest = ln.partition(":")
            if int(idx) != len(choices):
                raise ValueError(f"object lines out of order at {ln!r}")
            choices.append(tuple(int(x) for x in rest.split(",")))
        if len(choices) != k:
            raise ValueError(f"header says {k} objects, found {len(choices)}")
        seed = header.get("seed", "None")
        return cls(n, tuple(choices), header.get("kind", "custom"), None if seed == "None" else int(seed))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> StorageAllocation:
        return cls.from_text(Path(path).read_text())


# construction


def build(kind, n: int, d: int, seed: int | None = None) -> StorageAllocation:
    """Build a d-choice allocation of the given design on ``n`` nodes."""
    dk = DesignKind.parse(kind)
    if not (isinstance(n, (int, np.integer)) and isinstance(d, (int, np.integer))):
        raise TypeError("n and d must be integers")
    n, d = int(n), int(d)
    if d < 1 or n < d:
        raise ParameterMismatch(f"need n >= d >= 1, got n={n}, d={d}")
    if dk.kind.randomized and seed is None:
        raise ValueError(f"{dk} needs a seed")
    rng = np.random.default_rng(seed) if seed is not None else None
    k = dk.kind
    if k is Kind.SINGLE_CHOICE:
        if d != 1:
            raise ParameterMismatch("single-choice allocation has d = 1")
        choices = [(i // dk.b,) for i in range(n * dk.b)]
    elif k is Kind.CLUSTERING:
        if n % d:
            raise ParameterMismatch(f"clustering needs d | n, got n={n}, d={d}")
        choices = [tuple(range((i // d) * d, (i // d) * d + d)) for i in range(n)]
    elif k is Kind.CYCLIC:
        choices = [tuple((i + j) % n for j in range(d)) for i in range(n)]
    elif k is Kind.BLOCK:
        v = d * d - d + 1
        if n % v:
            raise ParameterMismatch(f"block design needs n a multiple of d^2 - d + 1 = {v}, got {n}")
        D = difference_set(d)
        # n > v: disjoint copies of the v-node design side by side
        choices = [tuple(sorted((i // v) * v + (i + x) % v for x in D)) for i in range(n)]
    elif k is Kind.RANDOM:
        choices = [tuple(sorted(c)) for c in random_subsets(rng, n, n, d)]
    elif k is Kind.RANDOM_BLOCK_APPROX:
        choices = _approx_block(n, d, seed)
    else:
        choices = _constrained_random(n, d, dk.v_max, rng)
    return StorageAllocation(n, tuple(choices), str(dk), seed)


def random_subsets(rng, rows: int, n: int, d: int) -> np.ndarray:
    """``rows`` independent uniform d-subsets of ``range(n)`` as a ``(rows, d)`` array."""
    if d == n:
        return np.tile(np.arange(n), (rows, 1))
    return np.argpartition(rng.random((rows, n)), d - 1, axis=1)[:, :d]


def difference_set(d: int) -> tuple:
    """A perfect difference set of size d in Z_n, n = d^2 - d + 1.

    Every nonzero residue is hit exactly once as a difference of two members.
    Backtracking with 0 and 1 fixed as the smallest members.
    """
    n = d * d - d + 1
    if d == 1:
        return (0,)
    if d == 2:
        return (0, 1)
    seen = [False] * n
    chosen = [0, 1]
    seen[1] = seen[n - 1] = True

    def extend(last):
        if len(chosen) == d:
            return True
        for x in range(last + 1, n):
            diffs = []
            ok = True
            for y in chosen:
                for e in ((x - y) % n, (y - x) % n):
                    if seen[e] or e in diffs:
                        ok = False
                        break
                    diffs.append(e)
                if not ok:
                    break
            if not ok:
                continue
            for e in diffs:
                seen[e] = True
            chosen.append(x)
            if extend(x):
                return True
            chosen.pop()
            for e in diffs:
                seen[e] = False
        return False

    if not extend(1):
        raise NoBlockDesign(f"no cyclic symmetric design with d={d} (n={n})")
    return tuple(chosen)


def _approx_block(n, d, seed):
    copies = np.repeat(np.arange(n, dtype=np.int64), d)
    max_pops = 200 * n * d + 1000
    size = 8 * n * d + 64
    while True:
        # regenerate from the seed so a longer draw buffer extends the shorter one
        rng = np.random.default_rng(seed)
        queue = rng.permutation(copies)
        draws = rng.random(size)
        contents, used = _core.approx_block(n, d, queue, draws, max_pops)
        if contents is not None:
            break
        if used == -1:
            raise InfeasibleConstraint(f"approximate block construction did not settle (n={n}, d={d})")
        size *= 4
    choices = [[] for _ in range(n)]
    for j in range(n):
        for obj in contents[j]:
            choices[obj].append(j)
    return [tuple(c) for c in choices]


def _siblings(k, d):
    # d-hop siblings: same residue class mod d, excluding self
    return [[j for j in range(i % d, k, d) if j != i] for i in range(k)]


def _constrained_random(n, d, v_max, rng):
    k = n
    sib = _siblings(k, d)
    for _ in range(CONSTRAINED_RETRIES):
        sets = [set() for _ in range(k)]
        over = [set() for _ in range(k)]  # siblings each object currently overlaps
        node_objs = [set() for _ in range(n)]
        ok = True
        for i in range(k):
            sib_i = set(sib[i])
            for _slot in range(d):
                suitable = []
                for p in range(n):
                    if p in sets[i]:
                        continue
                    new = (node_objs[p] & sib_i) - over[i]
                    if len(over[i]) + len(new) > v_max:
                        continue
                    if any(len(over[j]) + 1 > v_max for j in new):
                        continue
                    suitable.append(p)
                if not suitable:
                    ok = False
                    break
                p = suitable[int(rng.integers(len(suitable)))]
                new = (node_objs[p] & sib_i) - over[i]
                for j in new:
                    over[i].add(j)
                    over[j].add(i)
                sets[i].add(p)
                node_objs[p].add(i)
            if not ok:
                break
        if ok:
            return [tuple(sorted(s)) for s in sets]
    raise InfeasibleConstraint(
        f"constrained random design could not place all objects with v_max={v_max} "
        f"after {CONSTRAINED_RETRIES} attempts"
    )


def sibling_overlaps(alloc: StorageAllocation, d: int | None = None) -> np.ndarray:
    """``v_i``: how many d-hop siblings of object i share a node with it."""
    d = d or alloc.d
    O = alloc.incidence @ alloc.incidence.T
    idx = np.arange(alloc.n_objects)
    same = (idx[:, None] - idx[None, :]) % d == 0
    np.fill_diagonal(same, False)
    return ((O > 0) & same).sum(axis=1)


# structure queries


def _check_objects(alloc, objects):
    objs = sorted(set(int(o) for o in objects))
    if not objs:
        raise ValueError("need a nonempty set of objects")
    if objs[0] < 0 or objs[-1] >= alloc.n_objects:
        raise IndexOutOfRange(f"object index outside [0, {alloc.n_objects})")
    return objs


def span(alloc: StorageAllocation, objects) -> int:
    """Number of distinct nodes holding at least one of ``objects``."""
    objs = _check_objects(alloc, objects)
    return len(set().union(*(alloc.choices[i] for i in objs)))


def _combos(k, t):
    it = itertools.combinations(range(k), t)
    dt = np.dtype((np.int64, t))
    while True:
        block = np.fromiter(itertools.islice(it, _COMBO_BATCH), dtype=dt)
        if block.size == 0:
            return
        yield block.reshape(-1, t)


def _check_t(alloc, t, lo):
    if not lo <= t <= alloc.n_objects:
        raise IndexOutOfRange(f"t must lie in [{lo}, {alloc.n_objects}], got {t}")
    count = math.comb(alloc.n_objects, t)
    return count


def _subset_sizes(alloc, t, reduce):
    """Yield |op(C_i)| for every t-subset in lexicographic order, batch by batch."""
    count = _check_t(alloc, t, 1)
    if count > ENUM_BUDGET:
        raise BudgetExceeded(f"C({alloc.n_objects},{t}) = {count} subsets exceeds the budget {ENUM_BUDGET}")
    packed = alloc._packed
    for block in _combos(alloc.n_objects, t):
        merged = reduce.reduce(packed[block], axis=1)
        yield np.bitwise_count(merged).sum(axis=1, dtype=np.int64)


def cum_overlap(alloc: StorageAllocation, t: int, method: str = "enumerate") -> int:
    """Sum over all t-subsets of objects of the size of their common node set.

    ``method="nodes"`` uses the per-node count instead: each node holding ``L``
    objects contributes C(L, t).
    """
    if t < 2:
        raise IndexOutOfRange("cumulative overlap needs t >= 2")
    if method == "nodes":
        _check_t(alloc, t, 2)
        return int(sum(math.comb(int(L), t) for L in alloc.loads))
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    return int(sum(int(s.sum()) for s in _subset_sizes(alloc, t, np.bitwise_and)))


def cum_span(alloc: StorageAllocation, t: int) -> int:
    """Sum over all t-subsets of objects of their span."""
    return int(sum(int(s.sum()) for s in _subset_sizes(alloc, t, np.bitwise_or)))


def move_object(alloc: StorageAllocation, obj: int, from_node: int, to_node: int) -> StorageAllocation:
    """Relocate the copy of ``obj`` held on ``from_node`` to ``to_node``."""
    if not 0 <= obj < alloc.n_objects:
        raise IndexOutOfRange(f"object {obj} out of range")
    if not (0 <= from_node < alloc.n_nodes and 0 <= to_node < alloc.n_nodes):
        raise IndexOutOfRange("node index out of range")
    c = alloc.choices[obj]
    if from_node not in c:
        raise NotStored(f"object {obj} is not stored on node {from_node}")
    if to_node in c:
        raise AlreadyStored(f"object {obj} is already stored on node {to_node}")
    choices = list(alloc.choices)
    choices[obj] = tuple(to_node if p == from_node else p for p in c)
    return StorageAllocation(alloc.n_nodes, tuple(choices), "custom", None, _checked=True)


def overlap_matrix(alloc: StorageAllocation) -> np.ndarray:
    """``|C_i ∩ C_j|`` for every pair of objects."""
    # float32 goes through BLAS; entries are at most d, so the product is exact
    M = alloc.incidence.astype(np.float32)
    return (M @ M.T).astype(np.int64)


def is_r_gap(alloc: StorageAllocation, r: int) -> bool:
    """True iff objects more than ``r`` apart (circularly) never share a node."""
    k = alloc.n_objects
    idx = np.arange(k)
    gap = np.abs(idx[:, None] - idx[None, :])
    far = np.minimum(gap, k - gap) > r
    return not np.any((overlap_matrix(alloc) > 0) & far)


def overlap_profile(alloc: StorageAllocation) -> OverlapProfile:
    k = alloc.n_objects
    iu = np.triu_indices(k, 1)
    sizes = overlap_matrix(alloc)[iu]
    pairs = sizes.size
    nz = sizes[sizes > 0]
    counts = np.bincount(nz) if nz.size else np.zeros(1, dtype=np.int64)
    by_size = {int(s): int(c) / nz.size for s, c in enumerate(counts) if s > 0 and c > 0}
    zero = 1.0 - nz.size / pairs if pairs else 0.0
    return OverlapProfile(by_size, zero, pairs)


def _sample_subsets(rng, k, t, samples):
    if 2 * t > k:
        return np.argpartition(rng.random((samples, k)), t - 1, axis=1)[:, :t]
    out = rng.integers(0, k, size=(samples, t))
    while True:
        s = np.sort(out, axis=1)
        bad = np.flatnonzero(np.any(s[:, 1:] == s[:, :-1], axis=1)) if t > 1 else np.array([], int)
        if bad.size == 0:
            return out
        out[bad] = rng.integers(0, k, size=(bad.size, t))


def span_t_distribution(alloc: StorageAllocation, t: int, method: str = "exact",
                        samples: int = 100_000, seed: int = 0) -> dict:
    """Distribution of the span of a uniformly random t-subset of objects."""
    if method == "exact":
        counts = Counter()
        total = 0
        for s in _subset_sizes(alloc, t, np.bitwise_or):
            vals, c = np.unique(s, return_counts=True)
            counts.update(dict(zip(vals.tolist(), c.tolist())))
            total += s.size
        return {v: c / total for v, c in sorted(counts.items())}
    if method != "sampled":
        raise ValueError(f"unknown method {method!r}")
    _check_t(alloc, t, 1)
    rng = np.random.default_rng(seed)
    picks = _sample_subsets(rng, alloc.n_objects, t, samples)
    merged = np.bitwise_or.reduce(alloc._packed[picks], axis=1)
    spans = np.bitwise_count(merged).sum(axis=1)
    vals, c = np.unique(spans, return_counts=True)
    return {int(v): int(n) / samples for v, n in zip(vals, c)}


def sample_choice_arrays(kind, n: int, d: int, rows: int, rng) -> np.ndarray:
    """Fresh allocations of a randomized design, one per row, as ``(rows, n, d)``."""
    dk = DesignKind.parse(kind)
    if dk.kind is Kind.RANDOM:
        return np.sort(random_subsets(rng, rows * n, n, d).reshape(rows, n, d), axis=2)
    seeds = rng.integers(0, 2**63 - 1, size=rows)
    return np.stack([build(dk, n, d, int(s)).choice_array for s in seeds])
