"""Analytic bounds on P, each returned as a ``BoundReport``.

Scan-statistic bounds are evaluated by Monte Carlo (``method="mc"``, the
default), by the Naus product approximation, or by the Poisson form. The
Monte Carlo route draws the same demand sequences as ``estimate_P`` for the
same seed, so a bound and a simulated P are compared sample by sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import demand as dm
from . import occupancy as occ
from . import scanstat as sc
from .allocation import ENUM_BUDGET, DesignKind, Kind, span_t_distribution
from .errors import BadMode, BadPartition, BadWindow, Diverges, NonpositiveDemandModel, ParameterMismatch
from .robustness import Design, clustering_formula

DEFAULT_TRIALS = 10_000
SPAN_SAMPLES = 100_000
OCCUPANCY_DRAWS = 100_000
GOLDEN_TOL = 1e-8
_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class BoundReport:
    name: str
    kind: str  # "lower" or "upper"
    value: float
    params: dict = field(default_factory=dict)
    asymptotic: bool = False
    approximate: bool = False  # not a guaranteed bound (e.g. mean-occupancy substitution)

    def __post_init__(self):
        if self.kind not in ("lower", "upper"):
            raise ValueError(f"bound kind must be lower or upper, got {self.kind!r}")
        v = min(1.0, max(0.0, float(self.value)))
        object.__setattr__(self, "value", v)


class _Scan:
    """Evaluates P(S_s^(c) <= x) for one (model, n), reusing Monte Carlo samples."""

    def __init__(self, model, n, method="mc", trials=DEFAULT_TRIALS, seed=0, workers=1):
        if method not in ("mc", "naus", "poisson"):
            raise BadMode(f"unknown scan method {method!r}")
        self.model, self.n, self.method = model, n, method
        self.trials, self.seed, self.workers = trials, seed, workers
        self._samples = {}

    def prepare(self, windows):
        if self.method != "mc":
            return
        todo = [(s, True) for s in windows if (s, True) not in self._samples]
        if todo:
            self._samples.update(sc.scan_samples(self.model, self.n, todo, self.trials, self.seed, self.workers))

    def prob(self, s, x):
        if not 1 <= s <= self.n:
            raise BadWindow(f"window s={s} outside [1, {self.n}]")
        q = sc.ScanQuery(self.n, s, x, circular=True)
        if self.method == "poisson":
            return sc.scan_cdf_poisson(self.model, q)
        if self.method == "naus":
            return sc.scan_cdf_naus(self.model, q, self.trials, self.seed)
        self.prepare([s])
        vals = self._samples[(s, True)]
        return float(np.count_nonzero(sc.leq(vals, x))) / vals.size

    @property
    def asymptotic(self):
        return self.method == "poisson"

    def params(self, **kw):
        out = {"method": self.method}
        if self.method != "poisson":
            out["trials"] = self.trials
            out["seed"] = self.seed
        out.update(kw)
        return out


def default_s_values(n: int, d: int) -> list[int]:
    return sorted({s for s in (1, d, 2 * d, math.ceil(n / 4)) if 1 <= s <= n})


# any design


def ub_span_based(alloc, model, m: float, t_values=None, method: str = "auto",
                  samples: int = SPAN_SAMPLES, seed: int = 0) -> BoundReport:
    """min over t of E[F_t(m * span_t)], span_t the span of a random t-subset.

    ``alloc`` is a built allocation, or a random ``Design``, in which case the
    span law is the occupancy law of ``t`` random complexes.
    """
    if isinstance(alloc, Design):
        if alloc.kind.kind is not Kind.RANDOM:
            raise ParameterMismatch("pass a built allocation for non-random designs")
        k, d = alloc.n, alloc.d
    else:
        k, d = alloc.n_objects, alloc.d or max(len(c) for c in alloc.choices)
    if t_values is None:
        t_values = range(1, min(k, 2 * d) + 1)
    best, best_t, used = 1.0, None, {}
    for t in t_values:
        if not 1 <= t <= k:
            raise BadWindow(f"t={t} outside [1, {k}]")
        if isinstance(alloc, Design):
            dist = occ.occupancy_pmf_exact(occ.OccupancyQuery(alloc.n, alloc.d, t))
            how = "occupancy"
        else:
            how = method
            if how == "auto":
                how = "exact" if math.comb(k, t) <= ENUM_BUDGET else "sampled"
            dist = span_t_distribution(alloc, t, how, samples, seed)
        used[t] = how
        val = sum(p * dm.sum_cdf(model, t, m * s) for s, p in dist.items())
        if best_t is None or val < best:
            best, best_t = val, t
    return BoundReport("span_ub", "upper", best, {"m": m, "t": best_t, "span_method": used})


def scan_ub_any(n: int, d: int, model, m: float, s_values=None, method: str = "mc",
                trials: int = DEFAULT_TRIALS, seed: int = 0, workers: int = 1) -> BoundReport:
    """min over s of P(S_s^(c) <= s m d); holds for every d-choice design."""
    s_values = default_s_values(n, d) if s_values is None else list(s_values)
    ev = _Scan(model, n, method, trials, seed, workers)
    ev.prepare(s_values)
    vals = {s: ev.prob(s, s * m * d) for s in s_values}
    s_best = min(vals, key=lambda s: (vals[s], s))
    return BoundReport("scan_ub_any", "upper", vals[s_best], ev.params(m=m, s=s_best), ev.asymptotic)


def any_design_poisson_ub(n: int, d: int, model, m: float) -> BoundReport:
    """Poisson form of P(S_d^(c) <= m d^2): exp(-(n - d + 1) Q_d(m d^2))."""
    return BoundReport("scan_ub_any_poisson", "upper", _poisson(model, n, d, m * d * d), {"m": m}, True)


def _poisson(model, n, u, x):
    return math.exp(-(n - u + 1) * dm.sum_tail(model, u, x))


# r-gap, cyclic, block


def rgap_bounds(n: int, d: int, r: int, model, m: float, s: int | None = None, method: str = "mc",
                trials: int = DEFAULT_TRIALS, seed: int = 0, workers: int = 1):
    """P(S_{r+1}^(c) <= m d) <= P <= P(S_s^(c) <= m (s + 2r))."""
    if r < d - 1:
        raise BadWindow(f"an r-gap design has r >= d - 1, got r={r}, d={d}")
    s = d if s is None else s
    if not 1 <= s <= n - 2 * r:
        raise BadWindow(f"s must lie in [1, n - 2r] = [1, {n - 2 * r}], got {s}")
    if r + 1 > n:
        raise BadWindow("r + 1 exceeds n")
    ev = _Scan(model, n, method, trials, seed, workers)
    ev.prepare([r + 1, s])
    lo = BoundReport("rgap_lb", "lower", ev.prob(r + 1, m * d), ev.params(m=m, r=r), ev.asymptotic)
    hi = BoundReport("rgap_ub", "upper", ev.prob(s, m * (s + 2 * r)), ev.params(m=m, r=r, s=s), ev.asymptotic)
    return lo, hi


def _subgaussian(consts):
    try:
        a, b, g, mu = (float(consts[k]) for k in ("alpha", "beta", "gamma", "mu"))
    except (KeyError, TypeError):
        raise BadMode("subgaussian mode needs constants alpha, beta, gamma and mu") from None
    if min(a, b, g) <= 0:
        raise BadMode("alpha, beta, gamma must be > 0")
    return a, b, g, mu


def _needs_positive(model, name):
    if model.has_atom_at_zero:
        raise NonpositiveDemandModel(f"{name} asymptotic bounds need strictly positive demands; {model.spec()} has an atom at 0")


def cyclic_bounds(n: int, d: int, model, m: float, mode: str = "finite", s_values=None,
                  constants=None, trials: int = DEFAULT_TRIALS, seed: int = 0, workers: int = 1,
                  method: str = "mc"):
    """Lower and upper bound for the cyclic design.

    finite: P(S_d^(c) <= m d) and min_s P(S_s^(c) <= m (s + d - 1)).
    asymptotic: the Poisson forms of the same two quantities.
    subgaussian: closed forms in user-supplied alpha, beta, gamma and mean mu.
    """
    if mode == "finite":
        s_values = default_s_values(n, d) if s_values is None else list(s_values)
        s_values = [s for s in s_values if 1 <= s <= n - d + 1]
        ev = _Scan(model, n, method, trials, seed, workers)
        ev.prepare([d] + s_values)
        vals = {s: ev.prob(s, m * (s + d - 1)) for s in s_values}
        s_best = min(vals, key=lambda s: (vals[s], s))
        lo = BoundReport("cyclic_lb", "lower", ev.prob(d, m * d), ev.params(m=m), ev.asymptotic)
        hi = BoundReport("cyclic_ub", "upper", vals[s_best], ev.params(m=m, s=s_best), ev.asymptotic)
        return lo, hi
    if mode == "asymptotic":
        _needs_positive(model, "cyclic")
        s_values = default_s_values(n, d) if s_values is None else list(s_values)
        s_values = [s for s in s_values if 1 <= s <= n - d + 1]
        vals = {s: _poisson(model, n, s, m * (s + d - 1)) for s in s_values}
        s_best = min(vals, key=lambda s: (vals[s], s))
        lo = BoundReport("cyclic_poisson_lb", "lower", _poisson(model, n, d, m * d), {"m": m}, True)
        hi = BoundReport("cyclic_poisson_ub", "upper", vals[s_best], {"m": m, "s": s_best}, True)
        return lo, hi
    if mode == "asymptotic-simple":
        _needs_positive(model, "cyclic")
        lo = BoundReport("cyclic_poisson_lb", "lower", _poisson(model, n, d, m * d), {"m": m}, True)
        hi = BoundReport("cyclic_poisson_simple_ub", "upper", _poisson(model, n, d, 2 * m * d), {"m": m}, True)
        return lo, hi
    if mode == "subgaussian":
        a, b, g, mu = _subgaussian(constants)
        if m < mu:
            raise BadMode("subgaussian cyclic bounds need m >= mu")
        w = n - d + 1
        p = {"m": m, "alpha": a, "beta": b, "gamma": g, "mu": mu}
        lo = math.exp(-w * g * math.exp(-d * b * (m - mu) ** 2))
        hi = math.exp(-w * math.exp(-d * a * (2 * m - mu) ** 2))
        return (BoundReport("cyclic_subgaussian_lb", "lower", lo, p, True),
                BoundReport("cyclic_subgaussian_ub", "upper", hi, p, True))
    raise BadMode(f"unknown mode {mode!r}")


def block_bounds(n: int, d: int, model, m: float, mode: str = "finite", constants=None,
                 trials: int = DEFAULT_TRIALS, seed: int = 0, workers: int = 1, method: str = "mc"):
    """P(S_d^(c) <= m d / 2) <= P <= P(S_d^(c) <= m (d^2 - d)) and their limits.

    Only for a single copy of the design, n = d^2 - d + 1.
    """
    if n != d * d - d + 1:
        raise ParameterMismatch(f"block bounds need n = d^2 - d + 1 = {d * d - d + 1}, got {n}")
    if mode == "finite":
        ev = _Scan(model, n, method, trials, seed, workers)
        ev.prepare([d])
        lo = BoundReport("block_lb", "lower", ev.prob(d, m * d / 2), ev.params(m=m), ev.asymptotic)
        hi = BoundReport("block_ub", "upper", ev.prob(d, m * (d * d - d)), ev.params(m=m), ev.asymptotic)
        return lo, hi
    if mode == "asymptotic":
        _needs_positive(model, "block")
        return (BoundReport("block_poisson_lb", "lower", _poisson(model, n, d, m * d / 2), {"m": m}, True),
                BoundReport("block_poisson_ub", "upper", _poisson(model, n, d, m * (d * d - d)), {"m": m}, True))
    if mode == "subgaussian":
        a, b, g, mu = _subgaussian(constants)
        if m < mu:
            raise BadMode("subgaussian block bounds need m >= mu")
        w = n - d + 1
        p = {"m": m, "alpha": a, "beta": b, "gamma": g, "mu": mu}
        lo = math.exp(-w * g * math.exp(-d * b * (m / 2 - mu) ** 2))
        hi = math.exp(-w * math.exp(-d * a * (m * (d - 1) - mu) ** 2))
        return (BoundReport("block_subgaussian_lb", "lower", lo, p, True),
                BoundReport("block_subgaussian_ub", "upper", hi, p, True))
    raise BadMode(f"unknown mode {mode!r}")


# clustering


def _golden_max(g, a, b, tol=GOLDEN_TOL):
    c = b - _INV_PHI * (b - a)
    e = a + _INV_PHI * (b - a)
    gc, ge = g(c), g(e)
    while b - a > tol:
        if gc < ge:
            a, c, gc = c, e, ge
            e = a + _INV_PHI * (b - a)
            ge = g(e)
        else:
            b, e, ge = e, c, gc
            c = b - _INV_PHI * (b - a)
            gc = g(c)
    s = (a + b) / 2
    return s, g(s)


def chernoff_exponent(model, m: float) -> tuple[float, float]:
    """sup over s > 0 of m s - ln E[exp(s rho)]; returns (s*, value).

    The value is +inf when demand never exceeds m.
    """
    if isinstance(model, dm.Pareto):
        raise Diverges("Pareto demand has no finite MGF for s > 0; no Chernoff bound")

    def g(s):
        try:
            return m * s - math.log(dm.mgf(model, s))
        except (Diverges, OverflowError, ValueError):
            return -math.inf

    if isinstance(model, dm.Exp):
        hi = model.mu / model.scale
        # g is concave on (0, mu); stop just short of the pole
        s, val = _golden_max(g, 0.0, hi * (1 - 1e-12))
        return s, max(val, 0.0)
    lam = model.lam * model.scale
    if model.p == 0 or m > lam:
        return math.inf, math.inf
    if model.p == 1:
        return math.inf, math.inf if m >= lam else 0.0
    if m == lam:
        # g increases to -ln p as s grows
        return math.inf, -math.log(model.p)
    hi = 1.0 / lam
    while g(2 * hi) > g(hi):
        hi *= 2
    s, val = _golden_max(g, 0.0, 2 * hi)
    return s, max(val, 0.0)


def clustering_bounds(n: int, d: int, model, m: float, mode: str = "chernoff", constants=None):
    """Chernoff lower bound (upper is None), or sub-gaussian lower and upper."""
    if mode == "chernoff":
        s_star, expo = chernoff_exponent(model, m)
        inner = 1.0 - math.exp(-d * expo) if math.isfinite(expo) else 1.0
        val = max(inner, 0.0) ** (n / d)
        return BoundReport("clustering_chernoff_lb", "lower", val, {"m": m, "s": s_star}), None
    if mode == "subgaussian":
        a, b, g, mu = _subgaussian(constants)
        if not m > mu:
            raise BadMode("subgaussian clustering bounds need m > mu")
        p = {"m": m, "alpha": a, "beta": b, "gamma": g, "mu": mu}
        lo = max(0.0, 1 - g * math.exp(-d * b * (m - mu) ** 2)) ** (n / d)
        hi = (1 - math.exp(-d * a * (m - mu) ** 2)) ** (n / d)
        return (BoundReport("clustering_subgaussian_lb", "lower", lo, p),
                BoundReport("clustering_subgaussian_ub", "upper", hi, p))
    raise BadMode(f"unknown mode {mode!r}")


# random designs


def _parse_partition(n, partition):
    if isinstance(partition, str):
        name, _, val = partition.partition(":")
        if name.strip() != "even" or not val:
            raise BadPartition(f"bad partition {partition!r}; use a list of sizes or 'even:<u>'")
        partition = int(val)
    if isinstance(partition, (int, np.integer)):
        u = int(partition)
        if not 1 <= u <= n:
            raise BadPartition(f"part size u={u} outside [1, {n}]")
        return {u: n / u}
    parts = [int(u) for u in partition]
    if not parts or min(parts) < 1 or sum(parts) != n:
        raise BadPartition(f"part sizes must be positive and sum to n={n}, got {parts}")
    out = {}
    for u in parts:
        out[u] = out.get(u, 0) + 1
    return out


def random_ub(n: int, d: int, model, m: float, partition=None, method: str = "exact-mc",
              draws: int = OCCUPANCY_DRAWS, seed: int = 0) -> BoundReport:
    """Product over parts of E[F_u(m N_{n,d,u})] for the random design.

    ``partition`` is a list of part sizes summing to n, or an int / 'even:u'
    for n/u parts of size u (the exponent n/u may be fractional).
    ``method``: 'exact-mc' samples the occupancy; 'exact' uses its exact law;
    'mean-approx' plugs in E[N], which is an approximation, not a bound.
    """
    parts = _parse_partition(n, d if partition is None else partition)
    total = 1.0
    for u, times in sorted(parts.items()):
        q = occ.OccupancyQuery(n, d, u)
        if method == "mean-approx":
            val = dm.sum_cdf(model, u, m * occ.mean_occupancy(q))
        elif method == "exact":
            val = sum(p * dm.sum_cdf(model, u, m * N) for N, p in occ.occupancy_pmf_exact(q).items())
        elif method == "exact-mc":
            pmf = occ.occupancy_pmf_mc(q, draws, seed)
            val = sum(p * dm.sum_cdf(model, u, m * N) for N, p in pmf.items())
        else:
            raise BadMode(f"unknown method {method!r}")
        total *= val**times
    return BoundReport("random_ub", "upper", total,
                       {"m": m, "partition": dict(sorted(parts.items())), "method": method},
                       approximate=method == "mean-approx")


def random_limit_approx(n: int, d: int, model, m: float) -> BoundReport:
    """Large-n form F_d(m d^2) ** (n / d) of the mean-occupancy approximation."""
    return BoundReport("random_limit_approx", "upper", dm.sum_cdf(model, d, m * d * d) ** (n / d),
                       {"m": m}, asymptotic=True, approximate=True)


def constrained_random_lb(n: int, d: int, v_max: int, model, m: float, method: str = "mc",
                          trials: int = DEFAULT_TRIALS, seed: int = 0, workers: int = 1) -> BoundReport:
    """P(S_d^(c) <= m d / v_max) for the constrained random design."""
    if v_max < 1:
        raise ValueError("v_max must be >= 1")
    ev = _Scan(model, n, method, trials, seed, workers)
    return BoundReport("constrained_random_lb", "lower", ev.prob(d, m * d / v_max),
                       ev.params(m=m, v_max=v_max), ev.asymptotic)


# limits


def d_from_rule(n: int, c: float = 1.0, gamma: float = 1.0) -> int:
    """d = ceil(c * log(n) ** gamma), at least 1."""
    return max(1, math.ceil(c * math.log(n) ** gamma - 1e-12))


def limit_trend(design, model, m: float, n_grid, c: float = 1.0, gamma: float = 1.0,
                quantity: str | None = None):
    """Evaluate a closed form or bound along d = ceil(c log(n)^gamma).

    Returns rows ``(n, d, value)``. ``quantity`` defaults per design:
    clustering -> exact P, cyclic -> Poisson lower bound, block -> Poisson
    lower bound, random -> mean-occupancy approximation, any -> the universal
    Poisson upper bound.
    """
    grid = list(n_grid)
    if grid != sorted(grid):
        raise ValueError("n_grid must be ascending")
    kind = design if design == "any" else DesignKind.parse(design).kind.value
    quantity = quantity or {"clustering": "exact", "cyclic": "poisson_lb", "block": "poisson_lb",
                            "random": "mean_approx", "any": "any_ub"}.get(kind)
    if quantity is None:
        raise BadMode(f"no default trend quantity for {design!r}")
    rows = []
    for n in grid:
        d = d_from_rule(n, c, gamma)
        if quantity == "exact":
            val = clustering_formula(n, d, model, m)
        elif quantity == "poisson_lb":
            val = _poisson(model, n, d, m * d / 2 if kind == "block" else m * d)
        elif quantity == "poisson_ub":
            val = _poisson(model, n, d, m * (d * d - d) if kind == "block" else 2 * m * d)
        elif quantity == "mean_approx":
            val = dm.sum_cdf(model, d, m * occ.mean_occupancy(occ.OccupancyQuery(n, d, d))) ** (n / d)
        elif quantity == "any_ub":
            val = _poisson(model, n, d, m * d * d)
        else:
            raise BadMode(f"unknown quantity {quantity!r}")
        rows.append((n, d, float(val)))
    return rows
