"""G/Mn/1 queue: general renewal arrivals, queue-length dependent exponential service.

The residual inter-arrival transforms ``R*_n`` (seen at departures that leave
``n`` customers behind) satisfy the backward recursion

    R*_n = (1 - G*(mu_{n+1})) D(mu_{n+1}, G) + G*(mu_{n+1}) D(mu_{n+1}, R_{n+1}),

anchored at the head length ``N`` of the rate schedule, where every later
rate equals the tail rate and ``R_N`` is the plain G/M/1 residual.  The
steady state follows from the two-step balance

    a_{n-1} G*(mu_n) = a_n (1 - R*_n(mu_n))

and level crossing ``lambda a_{n-1} = mu_n pi_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gm1
from .distributions import DistributionSpec
from .errors import DomainError, InstabilityError, NormalizationError
from .schedule import RateSchedule
from .transforms import Transform, affine, d_operator, estimate_gamma, inverse_d, mix


@dataclass(frozen=True)
class Gmn1Model:
    inter_arrival: DistributionSpec
    mu: RateSchedule

    def __post_init__(self):
        if self.mu.offset != 1:
            raise DomainError("service schedules are indexed from n = 1")

    @property
    def arrival_rate(self) -> float:
        return 1.0 / self.inter_arrival.mean

    @property
    def head_length(self) -> int:
        return len(self.mu.head)

    def rate(self, n: int) -> float:
        return self.mu.rate(n)

    def tail_model(self) -> gm1.Gm1Model:
        return gm1.Gm1Model(self.inter_arrival, self.mu.tail)

    def check_stable(self) -> None:
        if not self.arrival_rate < self.mu.tail:
            raise InstabilityError(
                "G/Mn/1 requires lambda < tail service rate; got "
                f"lambda={self.arrival_rate:.6g}, mu_tail={self.mu.tail:.6g}")


@dataclass(frozen=True)
class Gmn1Solution:
    model: Gmn1Model
    residuals: list[Transform] = field(repr=False)
    a_n: np.ndarray = field(repr=False)
    pi_n: np.ndarray = field(repr=False)
    sigma_tail: float
    ratios: np.ndarray = field(repr=False)

    def residual(self, n: int) -> Transform:
        """``R*_n``; indices past the head reuse the tail transform."""
        return self.residuals[min(n, len(self.residuals) - 1)]

    def a(self, n: int) -> float:
        if n < len(self.a_n):
            return float(self.a_n[n])
        return float(self.a_n[-1]) * self.sigma_tail ** (n - len(self.a_n) + 1)

    def pi(self, n: int) -> float:
        if n == 0:
            return float(self.pi_n[0])
        return self.model.arrival_rate * self.a(n - 1) / self.model.rate(n)


def first_departure_prob(model: Gmn1Model, n: int) -> float:
    """Probability that a departure leaving ``n`` behind is the first in its inter-arrival time."""
    if n < 0:
        raise DomainError("queue length must be nonnegative")
    return 1.0 - model.inter_arrival.lst(model.rate(n + 1))


def recursion_step(g: DistributionSpec, rate: float, upper: Transform) -> Transform:
    """One backward step: the residual one level below ``upper``, where service runs at ``rate``."""
    p_stay = g.lst(rate)
    return mix([1.0 - p_stay, p_stay], [d_operator(g, rate), d_operator(upper, rate)])


def residuals_gmn1(model: Gmn1Model) -> list[Transform]:
    """``[R*_0, ..., R*_N]`` with ``N`` the head length; later indices equal ``R*_N``."""
    model.check_stable()
    tail = model.tail_model()
    sigma = gm1.solve_sigma(tail)
    top = gm1.residual_lst(tail, sigma)
    out = [top]
    g = model.inter_arrival
    fresh: dict[float, Transform] = {}
    for n in range(model.head_length - 1, -1, -1):
        rate = model.rate(n + 1)
        if rate not in fresh:
            fresh[rate] = d_operator(g, rate)
        p_stay = g.lst(rate)
        out.append(mix([1.0 - p_stay, p_stay], [fresh[rate], d_operator(out[-1], rate)]))
    out.reverse()
    return out


def reverse_step(model: Gmn1Model, lower: Transform, n: int, gamma: float | None = None) -> Transform:
    """Recover ``R*_{n+1}`` from ``R*_n`` by solving the recursion and inverting D.

    ``gamma`` is the density at zero of D(mu_{n+1}, R_{n+1}); when omitted it
    is estimated from the initial-value limit, which is approximate.
    """
    g = model.inter_arrival
    rate = model.rate(n + 1)
    p_stay = g.lst(rate)
    if p_stay <= 0:
        raise DomainError("G*(mu_{n+1}) = 0: the upper residual does not enter the recursion")
    h = affine([1.0 / p_stay, -(1.0 - p_stay) / p_stay], [lower, d_operator(g, rate)])
    if gamma is None:
        gamma = estimate_gamma(h)
    return inverse_d(h, gamma, rate)


def shift_model(model: Gmn1Model, k: int) -> Gmn1Model:
    """Model with service rates ``mu^(k)_n = mu_{n+k}``."""
    if k < 0:
        raise DomainError("shift must be nonnegative")
    return Gmn1Model(model.inter_arrival, model.mu.shifted(k))


def build_gmc(inter_arrival: DistributionSpec, c: int, mu: float) -> Gmn1Model:
    """G/M/c as a G/Mn/1 queue with ``mu_n = min(n, c) mu``."""
    if int(c) != c or c < 1:
        raise DomainError(f"number of servers must be a positive integer, got {c!r}")
    c = int(c)
    model = Gmn1Model(inter_arrival, RateSchedule(tuple(k * mu for k in range(1, c)), c * mu))
    model.check_stable()
    return model


def steady_state_gmn1(model: Gmn1Model) -> Gmn1Solution:
    model.check_stable()
    residuals = residuals_gmn1(model)
    sigma_tail = gm1.solve_sigma(model.tail_model())
    if not sigma_tail < 1.0:
        raise NormalizationError(f"tail ratio {sigma_tail} >= 1")
    head = model.head_length
    extra = max(50, math.ceil(math.log(1e-12) / math.log(sigma_tail))) if sigma_tail > 0 else 50
    n_top = head + extra
    g = model.inter_arrival
    lam = model.arrival_rate

    ratios = np.empty(n_top + 1)
    ratios[0] = np.nan
    for n in range(1, n_top + 1):
        if n <= head:
            rate = model.rate(n)
            denom = 1.0 - residuals[n].eval(rate)
            ratios[n] = g.lst(rate) / denom
        else:
            ratios[n] = sigma_tail
    if np.any(ratios[1:] <= 0) or not np.all(np.isfinite(ratios[1:])):
        raise NormalizationError("non-positive or non-finite two-step ratio")

    a = np.empty(n_top + 1)
    a[0] = 1.0
    for n in range(1, n_top + 1):
        a[n] = a[n - 1] * ratios[n]
    tail_mass = a[-1] * sigma_tail / (1.0 - sigma_tail)
    total = math.fsum(a) + tail_mass
    a /= total
    tail_mass /= total

    pi = np.empty(n_top + 1)
    for n in range(1, n_top + 1):
        pi[n] = lam * a[n - 1] / model.rate(n)
    # pi_{n} for n > n_top: lam a_{n-1} / mu_tail
    pi_tail = lam * (a[-1] + tail_mass) / model.mu.tail
    pi[0] = 1.0 - math.fsum(pi[1:]) - pi_tail
    if pi[0] < 0:
        raise NormalizationError(f"time-average probabilities exceed 1 (pi_0 = {pi[0]:.3g})")
    return Gmn1Solution(model=model, residuals=residuals, a_n=a, pi_n=pi,
                        sigma_tail=sigma_tail, ratios=ratios)
