"""Object demand distributions.

Three i.i.d. families are supported: exponential, Pareto and scaled
Bernoulli. Each model can draw demand vectors and evaluate ``F_u``, the CDF of
the sum of ``u`` independent demands, which every bound in the package is
written in terms of.

Models carry an optional ``scale`` multiplier: a scaled model draws
``scale * rho`` and its sum CDF is ``F_u(x / scale)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats

from .errors import Diverges

# Pareto sum CDFs come from a scrambled Sobol sample of this size (2**18).
PARETO_QMC_LOG2 = 18
_PARETO_QMC_BATCH_LOG2 = 14


@dataclass(frozen=True)
class Exp:
    mu: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("Exp rate mu must be > 0")
        _check_scale(self.scale)

    @property
    def mean(self) -> float:
        return self.scale / self.mu

    @property
    def has_atom_at_zero(self) -> bool:
        return False

    def spec(self) -> str:
        return _with_scale(f"exp:mu={self.mu!r}", self.scale)

    def _draw(self, rng, shape):
        return rng.exponential(1.0 / self.mu, size=shape)

    def _cdf(self, u, x):
        return float(special.gammainc(u, self.mu * x))

    def _mgf(self, t):
        if t >= self.mu:
            raise Diverges(f"Exp({self.mu}) MGF is infinite at t={t}")
        return self.mu / (self.mu - t)


@dataclass(frozen=True)
class Pareto:
    lam: float
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.lam > 0 or not self.alpha > 0:
            raise ValueError("Pareto needs lambda > 0 and alpha > 0")
        _check_scale(self.scale)

    @property
    def mean(self) -> float:
        if self.alpha <= 1:
            return math.inf
        return self.scale * self.alpha * self.lam / (self.alpha - 1)

    @property
    def has_atom_at_zero(self) -> bool:
        return False

    def spec(self) -> str:
        return _with_scale(f"pareto:lambda={self.lam!r},alpha={self.alpha!r}", self.scale)

    def _draw(self, rng, shape):
        # numpy's pareto is Lomax; shift and scale to a classic Pareto(lam, alpha)
        return self.lam * (1.0 + rng.pareto(self.alpha, size=shape))

    def _cdf(self, u, x):
        if x < u * self.lam:
            return 0.0
        if u == 1:
            return 1.0 - (self.lam / x) ** self.alpha
        sums = _pareto_sorted_sums(u, self.alpha, self.lam)
        return np.searchsorted(sums, x, side="right") / sums.size

    def _mgf(self, t):
        if t > 0:
            raise Diverges("Pareto MGF is infinite for t > 0")
        if t == 0:
            return 1.0
        a, lam = self.alpha, self.lam
        val, _ = integrate.quad(lambda x: math.exp(t * x) * a * lam**a / x ** (a + 1), lam, math.inf)
        return val


@dataclass(frozen=True)
class Bernoulli:
    """Scaled Bernoulli: ``lam`` with probability ``p``, else 0."""

    lam: float
    p: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("Bernoulli scale lambda must be > 0")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("Bernoulli p must lie in [0, 1]")
        _check_scale(self.scale)

    @property
    def mean(self) -> float:
        return self.scale * self.lam * self.p

    @property
    def has_atom_at_zero(self) -> bool:
        return self.p < 1.0

    def spec(self) -> str:
        return _with_scale(f"bern:lambda={self.lam!r},p={self.p!r}", self.scale)

    def _draw(self, rng, shape):
        return self.lam * (rng.random(size=shape) < self.p)

    def _cdf(self, u, x):
        # right-continuous: P(S <= x); the small slack keeps exact multiples of lam on the atom
        j = math.floor(x / self.lam + 1e-9)
        if j >= u:
            return 1.0
        return float(stats.binom.cdf(j, u, self.p))

    def _mgf(self, t):
        return 1.0 - self.p + self.p * math.exp(t * self.lam)


DemandModel = Exp | Pareto | Bernoulli


def _check_scale(scale):
    if not scale > 0:
        raise ValueError("scale must be > 0")


def _with_scale(text, scale):
    return text if scale == 1.0 else f"{text},scale={scale!r}"


def sample(model: DemandModel, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one demand vector of length ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return model.scale * model._draw(rng, k)


def sample_matrix(model: DemandModel, rows: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``rows`` independent demand vectors as a ``(rows, k)`` array."""
    return model.scale * model._draw(rng, (rows, k))


def sum_cdf(model: DemandModel, u: int, x: float) -> float:
    """``F_u(x) = P(rho_1 + ... + rho_u <= x)``."""
    if u < 1:
        raise ValueError("u must be >= 1")
    if x < 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return float(model._cdf(u, x / model.scale))


def sum_tail(model: DemandModel, u: int, x: float) -> float:
    """``Q_u(x) = 1 - F_u(x)``."""
    if isinstance(model, Exp) and x >= 0:
        return float(special.gammaincc(u, model.mu * x / model.scale))
    return 1.0 - sum_cdf(model, u, x)


def mgf(model: DemandModel, t: float) -> float:
    """Moment generating function ``E[exp(t * rho)]``."""
    return model._mgf(t * model.scale)


@lru_cache(maxsize=64)
def _pareto_sorted_sums(u: int, alpha: float, lam: float) -> np.ndarray:
    engine = stats.qmc.Sobol(d=u, scramble=True, seed=0x5EED)
    total = 1 << PARETO_QMC_LOG2
    batch = 1 << _PARETO_QMC_BATCH_LOG2
    out = np.empty(total)
    for start in range(0, total, batch):
        pts = engine.random(batch)
        # inverse CDF on 1 - U avoids U = 0 blowing up
        out[start : start + batch] = (lam * (1.0 - pts) ** (-1.0 / alpha)).sum(axis=1)
    out.sort()
    out.setflags(write=False)
    return out


def parse_model(text: str) -> DemandModel:
    """Parse ``exp:mu=1.0``, ``pareto:lambda=1.0,alpha=2.5`` or ``bern:lambda=2.0,p=0.3``.

    Any of them may carry a trailing ``scale=<c>``.
    """
    name, _, rest = text.strip().partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"bad model parameter {item!r} in {text!r}")
        params[key.strip()] = float(val)
    scale = params.pop("scale", 1.0)
    name = name.lower()
    try:
        if name == "exp":
            model = Exp(params.pop("mu"), scale)
        elif name == "pareto":
            model = Pareto(params.pop("lambda"), params.pop("alpha"), scale)
        elif name in ("bern", "bernoulli"):
            model = Bernoulli(params.pop("lambda"), params.pop("p"), scale)
        else:
            raise ValueError(f"unknown demand model {name!r}")
    except KeyError as exc:
        raise ValueError(f"model {text!r} is missing parameter {exc}") from None
    if params:
        raise ValueError(f"model {text!r} has unknown parameters {sorted(params)}")
    return model
