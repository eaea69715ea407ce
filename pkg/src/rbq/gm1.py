"""Stable G/M/1 queue: geometric ratio, steady state and residual inter-arrival law."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec
from .errors import DomainError, InstabilityError, NumericError, RootBracketError
from .transforms import Transform, d_operator

SIGMA_EPS = 1e-9
SIGMA_TOL = 1e-12
MAX_ITER = 200
ARRAY_CAP = 10_000


@dataclass(frozen=True)
class Gm1Model:
    inter_arrival: DistributionSpec
    mu: float

    def __post_init__(self):
        mu = float(self.mu)
        if not (mu > 0 and math.isfinite(mu)):
            raise DomainError(f"service rate must be positive, got {mu!r}")
        object.__setattr__(self, "mu", mu)

    @property
    def arrival_rate(self) -> float:
        return 1.0 / self.inter_arrival.mean

    @property
    def rho(self) -> float:
        return self.arrival_rate / self.mu

    def check_stable(self) -> None:
        if not self.rho < 1.0:
            raise InstabilityError(
                f"G/M/1 requires lambda < mu; got lambda={self.arrival_rate:.6g}, mu={self.mu:.6g}")


@dataclass(frozen=True)
class Gm1Solution:
    """Closed-form steady state of a G/M/1 queue.

    ``a_n`` and ``pi_n`` hold the arrival-epoch and time-average
    probabilities up to the first index where ``sigma**n < 1e-12``.
    """

    model: Gm1Model
    sigma: float
    rho: float
    sojourn_rate: float
    residual: Transform
    a_n: np.ndarray = field(repr=False)
    pi_n: np.ndarray = field(repr=False)

    def a(self, n: int) -> float:
        return (1.0 - self.sigma) * self.sigma ** n

    def pi(self, n: int) -> float:
        if n == 0:
            return 1.0 - self.rho
        return self.rho * (1.0 - self.sigma) * self.sigma ** (n - 1)

    @property
    def mean_sojourn(self) -> float:
        return 1.0 / self.sojourn_rate


def solve_sigma(model: Gm1Model) -> float:
    """Unique root of ``sigma = G*(mu (1 - sigma))`` in (0, 1).

    Safeguarded hybrid: a bisection bracket on ``(eps, 1 - eps)`` is kept
    throughout and fixed-point steps are accepted only while they stay
    inside it and shrink it fast enough.
    """
    model.check_stable()
    g, mu = model.inter_arrival, model.mu

    def resid(x):
        return g.lst(mu * (1.0 - x)) - x

    lo, hi = SIGMA_EPS, 1.0 - SIGMA_EPS
    f_lo, f_hi = resid(lo), resid(hi)
    if not (f_lo > 0 > f_hi):
        raise RootBracketError(f"no sign change for sigma on ({lo}, {hi}): {f_lo}, {f_hi}")
    x = g.lst(mu)  # first fixed-point iterate from 0
    width = hi - lo
    for _ in range(MAX_ITER):
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = resid(x)
        if fx > 0:
            lo = x
        elif fx < 0:
            hi = x
        if abs(fx) <= 1e-3 * SIGMA_TOL or hi - lo <= 4e-16:
            return x
        step = g.lst(mu * (1.0 - x))
        if hi - lo > 0.5 * width:
            step = 0.5 * (lo + hi)  # fixed point too slow, bisect
        width = hi - lo
        x = step
    if abs(resid(x)) <= SIGMA_TOL:
        return x
    raise NumericError(f"sigma iteration did not converge in {MAX_ITER} steps")


def residual_lst(model: Gm1Model, sigma: float) -> Transform:
    """Residual inter-arrival transform at departures, D(mu (1 - sigma), G)."""
    return d_operator(model.inter_arrival, model.mu * (1.0 - sigma))


def residual_closed_form(model: Gm1Model, sigma: float, s: float) -> float:
    """``mu (G*(s) - sigma) / (mu (1 - sigma) - s)``; singular at ``s = mu (1 - sigma)``."""
    return model.mu * (model.inter_arrival.lst(s) - sigma) / (model.mu * (1.0 - sigma) - s)


def truncation_index(sigma: float, eps: float = 1e-12, cap: int = ARRAY_CAP) -> int:
    if sigma <= 0:
        return 1
    return min(cap, max(1, math.ceil(math.log(eps) / math.log(sigma))))


def steady_state(model: Gm1Model) -> Gm1Solution:
    sigma = solve_sigma(model)
    rho = model.rho
    n_top = truncation_index(sigma)
    a = np.empty(n_top + 1)
    a[0] = 1.0 - sigma
    for n in range(1, n_top + 1):
        a[n] = a[n - 1] * sigma
    pi = np.empty(n_top + 1)
    pi[0] = 1.0 - rho
    pi[1:] = rho * a[:-1]  # rho (1 - sigma) sigma^(n-1)
    return Gm1Solution(
        model=model,
        sigma=sigma,
        rho=rho,
        sojourn_rate=model.mu * (1.0 - sigma),
        residual=residual_lst(model, sigma),
        a_n=a,
        pi_n=pi,
    )
