"""Parametric nonnegative distributions with closed-form LSTs.

Five families are supported: exponential, deterministic, Erlang,
hyperexponential and uniform.  Each exposes its CDF, density (where one
exists), mean, sampler and the Laplace-Stieltjes transform together with its
Taylor coefficients ("jet") at any point ``s >= 0``.  The jets let the
transform calculus evaluate the residual operator at its removable
singularity exactly instead of by finite differences.

Serialization is a tagged record, e.g. ``{"family": "erlang", "shape": 2,
"rate": 3.0}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, ClassVar

import numpy as np
from scipy import special, stats

from .errors import DomainError

__all__ = [
    "DistributionSpec",
    "Exponential",
    "Deterministic",
    "Erlang",
    "HyperExponential",
    "Uniform",
    "from_dict",
]


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _check_s(s: float) -> float:
    s = float(s)
    if not s >= 0:
        raise DomainError(f"LST argument must be nonnegative, got {s!r}")
    return s


class DistributionSpec:
    """Abstract nonnegative distribution.

    Subclasses are frozen dataclasses; instances are hashable and can be used
    as cache keys.
    """

    family: ClassVar[str] = ""
    has_density: ClassVar[bool] = True

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def lst(self, s):
        """E[exp(-s X)]; accepts a scalar or an array of nonnegative reals."""
        arr = np.asarray(s, dtype=float)
        if np.any(~(arr >= 0)):
            raise DomainError("LST argument must be nonnegative")
        out = self._lst(arr)
        return float(out) if out.ndim == 0 else out

    def _lst(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jet(self, s: float, order: int) -> np.ndarray:
        """Taylor coefficients ``[F*(s), F*'(s), F*''(s)/2!, ...]`` up to ``order``."""
        return self._jet(_check_s(s), int(order))

    def _jet(self, s: float, order: int) -> np.ndarray:
        raise NotImplementedError

    def poisson_weights(self, rate: float, tol: float = 1e-20) -> np.ndarray:
        """``P(N(X) = j)`` for a Poisson process of ``rate`` run for a time ``X``.

        Truncated once the neglected tail mass is below ``tol``.  Every entry
        is computed directly (no subtraction from one), so small values keep
        full relative precision.
        """
        return _poisson_weights(self, _positive("rate", rate), float(tol))

    def _poisson_pmf(self, rate: float, j: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


_POISSON_CAP = 1 << 20


@lru_cache(maxsize=512)
def _poisson_weights(dist: DistributionSpec, rate: float, tol: float) -> np.ndarray:
    n = 64
    while True:
        w = dist._poisson_pmf(rate, np.arange(n))
        last, prev = w[-1], w[-2]
        ratio = last / prev if prev > 0 else 0.0
        if last == 0.0 or (ratio < 1.0 and last / (1.0 - ratio) < tol) or n >= _POISSON_CAP:
            break
        n *= 2
    tail = np.cumsum(w[::-1])[::-1]
    keep = np.nonzero(tail >= tol)[0]
    out = w[: (keep[-1] + 1 if keep.size else 1)].copy()
    out.setflags(write=False)
    return out


def _exp_jet(rate: float, s: float, order: int) -> np.ndarray:
    # r/(r+s+e) = r/(r+s) * sum_j (-e/(r+s))^j
    base = rate + s
    j = np.arange(order + 1)
    return (rate / base) * (-1.0 / base) ** j


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    rate: float

    family: ClassVar[str] = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def _lst(self, s):
        return self.rate / (self.rate + s)

    def _jet(self, s, order):
        return _exp_jet(self.rate, s, order)

    def _poisson_pmf(self, rate, j):
        p = self.rate / (self.rate + rate)
        return p * np.exp(j * math.log1p(-p))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def sample(self, rng, size):
        return rng.standard_exponential(size) / self.rate

    def to_dict(self):
        return {"family": self.family, "rate": self.rate}


@dataclass(frozen=True)
class Deterministic(DistributionSpec):
    value: float

    family: ClassVar[str] = "deterministic"
    has_density: ClassVar[bool] = False

    def __post_init__(self):
        object.__setattr__(self, "value", _positive("value", self.value))

    @property
    def mean(self) -> float:
        return self.value

    def _lst(self, s):
        return np.exp(-s * self.value)

    def _jet(self, s, order):
        out = np.empty(order + 1)
        out[0] = math.exp(-s * self.value)
        for j in range(1, order + 1):
            out[j] = out[j - 1] * (-self.value / j)
        return out

    def _poisson_pmf(self, rate, j):
        return stats.poisson.pmf(j, rate * self.value)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.value, 1.0, 0.0)

    def pdf(self, x):
        raise DomainError("deterministic distribution has no density")

    def sample(self, rng, size):
        return np.full(size, self.value)

    def to_dict(self):
        return {"family": self.family, "value": self.value}


@dataclass(frozen=True)
class Erlang(DistributionSpec):
    shape: int
    rate: float

    family: ClassVar[str] = "erlang"

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise DomainError(f"Erlang shape must be a positive integer, got {self.shape!r}")
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def _lst(self, s):
        return (self.rate / (self.rate + s)) ** self.shape

    def _jet(self, s, order):
        base = self.rate + s
        out = np.empty(order + 1)
        out[0] = (self.rate / base) ** self.shape
        for j in range(1, order + 1):
            out[j] = out[j - 1] * (-(self.shape + j - 1) / (j * base))
        return out

    def _poisson_pmf(self, rate, j):
        return stats.nbinom.pmf(j, self.shape, self.rate / (self.rate + rate))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, special.gammainc(self.shape, self.rate * np.maximum(x, 0.0)), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        logp = (self.shape * math.log(self.rate) + (self.shape - 1) * np.log(np.where(xp > 0, xp, 1.0))
                - self.rate * xp - math.lgamma(self.shape))
        dens = np.exp(logp)
        if self.shape > 1:
            dens = np.where(xp > 0, dens, 0.0)
        return np.where(x >= 0, dens, 0.0)

    def sample(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def to_dict(self):
        return {"family": self.family, "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class HyperExponential(DistributionSpec):
    probs: tuple[float, ...]
    rates: tuple[float, ...]

    family: ClassVar[str] = "hyperexponential"

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        rates = tuple(_positive("rate", r) for r in self.rates)
        if not probs or len(probs) != len(rates):
            raise DomainError("hyperexponential needs equally many probs and rates (at least one)")
        if any(p < 0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError(f"hyperexponential probs must be nonnegative and sum to 1, got {probs}")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "rates", rates)

    @property
    def mean(self) -> float:
        return math.fsum(p / r for p, r in zip(self.probs, self.rates))

    def _lst(self, s):
        return sum(p / (1.0 + s / r) for p, r in zip(self.probs, self.rates))  # exact at s = 0

    def _jet(self, s, order):
        return sum(p * _exp_jet(r, s, order) for p, r in zip(self.probs, self.rates))

    def _poisson_pmf(self, rate, j):
        return sum(p * Exponential(r)._poisson_pmf(rate, j) for p, r in zip(self.probs, self.rates))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        val = sum(p * -np.expm1(-r * xp) for p, r in zip(self.probs, self.rates))
        return np.where(x > 0, val, 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        val = sum(p * r * np.exp(-r * xp) for p, r in zip(self.probs, self.rates))
        return np.where(x >= 0, val, 0.0)

    def sample(self, rng, size):
        idx = rng.choice(len(self.probs), size=size, p=np.asarray(self.probs))
        return rng.standard_exponential(size) / np.asarray(self.rates)[idx]

    def to_dict(self):
        return {"family": self.family, "probs": list(self.probs), "rates": list(self.rates)}


@lru_cache(maxsize=64)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    lo: float
    hi: float

    family: ClassVar[str] = "uniform"

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (0 <= lo < hi and math.isfinite(hi)):
            raise DomainError(f"uniform requires 0 <= lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def _lst(self, s):
        width = self.hi - self.lo
        z = s * width
        safe = np.where(z > 0, z, 1.0)
        # -expm1(-z)/z -> 1 as z -> 0
        ratio = np.where(z > 1e-8, -np.expm1(-safe) / safe, 1.0 - 0.5 * z + z * z / 6.0)
        return np.exp(-s * self.lo) * ratio

    def _jet(self, s, order):
        out = np.empty(order + 1)
        out[0] = float(self._lst(np.asarray(s)))
        if order == 0:
            return out
        # a_j = (-1)^j / (hi-lo) * int_lo^hi t^j/j! e^{-s t} dt, by Gauss-Legendre
        n = max(40, order + 30 + int(math.ceil(s * (self.hi - self.lo))))
        x, w = _legendre(min(n, 2000))
        half = 0.5 * (self.hi - self.lo)
        t = self.lo + half * (x + 1.0)
        logt = np.log(np.where(t > 0, t, 1e-300))
        for j in range(1, order + 1):
            terms = np.exp(j * logt - math.lgamma(j + 1) - s * t)
            out[j] = (-1) ** j * half * np.dot(w, terms) / (self.hi - self.lo)
        return out

    def _poisson_pmf(self, rate, j):
        # (1/w) int_lo^hi Poi(j; rate t) dt = P(lo rate < Gamma(j+1) <= hi rate) / (rate w)
        a, b = rate * self.lo, rate * self.hi
        upper = stats.poisson.sf(j, b) - stats.poisson.sf(j, a)
        lower = stats.poisson.cdf(j, a) - stats.poisson.cdf(j, b)
        return np.where(j < a, lower, upper) / (b - a)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def to_dict(self):
        return {"family": self.family, "lo": self.lo, "hi": self.hi}


_FAMILIES: dict[str, type[DistributionSpec]] = {
    cls.family: cls for cls in (Exponential, Deterministic, Erlang, HyperExponential, Uniform)
}
_FIELDS = {
    "exponential": ("rate",),
    "deterministic": ("value",),
    "erlang": ("shape", "rate"),
    "hyperexponential": ("probs", "rates"),
    "uniform": ("lo", "hi"),
}


def from_dict(record: dict[str, Any]) -> DistributionSpec:
    """Build a distribution from its tagged record; unknown keys are rejected."""
    if not isinstance(record, dict) or "family" not in record:
        raise DomainError(f"distribution record needs a 'family' tag: {record!r}")
    family = str(record["family"]).lower()
    if family not in _FAMILIES:
        raise DomainError(f"unknown distribution family {family!r}")
    fields = _FIELDS[family]
    extra = set(record) - set(fields) - {"family"}
    missing = set(fields) - set(record)
    if extra or missing:
        raise DomainError(f"{family} record: unexpected {sorted(extra)}, missing {sorted(missing)}")
    kwargs = {k: record[k] for k in fields}
    if family == "hyperexponential":
        kwargs = {k: tuple(v) for k, v in kwargs.items()}
    return _FAMILIES[family](**kwargs)


def lst_eval(d: DistributionSpec, s: float) -> float:
    """Closed-form E[exp(-sX)] for a scalar ``s >= 0``."""
    return float(d.lst(_check_s(s)))
