"""Mn/Gn/1 queue: state-dependent Poisson arrivals, service law fixed at commencement.

A service that starts with ``n`` customers present is drawn from ``G_n``.
The residual service transforms at arrivals finding ``n`` customers obey
the forward recursion

    R_1 = D(lambda_1, G_1),
    R_n = (1 - G*_n(lambda_n)) D(lambda_n, G_n) + G*_n(lambda_n) D(lambda_n, R_{n-1}),

and the time-average probabilities the birth-death-like balance

    pi_{n-1} lambda_{n-1} (1 - R*_{n-1}(lambda_n)) = pi_n lambda_n G*_n(lambda_n),

with ``R*_0 = G*_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec
from .errors import DomainError, InstabilityError, NormalizationError, NumericError
from .schedule import RateSchedule
from .transforms import Transform, base, d_operator, mix

N_MAX = 500
STABLE_TOL = 1e-10
STABLE_RUN = 10


@dataclass(frozen=True)
class MnGn1Model:
    lam: RateSchedule
    services: tuple[DistributionSpec, ...]
    service_tail: DistributionSpec

    def __post_init__(self):
        if self.lam.offset != 0:
            raise DomainError("arrival schedules are indexed from n = 0")
        object.__setattr__(self, "services", tuple(self.services))

    def arrival_rate(self, n: int) -> float:
        return self.lam.rate(n)

    def service(self, n: int) -> DistributionSpec:
        if n < 1:
            raise DomainError("service laws are indexed from n = 1")
        return self.services[n - 1] if n <= len(self.services) else self.service_tail

    @property
    def constant_from(self) -> int:
        """First ``n`` from which both ``lambda_n`` and ``G_n`` are constant."""
        return max(self.lam.last_head_index + 1, len(self.services) + 1, 1)

    @property
    def tail_load(self) -> float:
        return self.lam.tail * self.service_tail.mean

    def check_stable(self) -> None:
        if not self.tail_load < 1.0:
            raise InstabilityError(
                f"Mn/Gn/1 requires lambda_tail * mean(G_tail) < 1; got {self.tail_load:.6g}")


@dataclass(frozen=True)
class MnGn1Solution:
    model: MnGn1Model
    residuals: list[Transform] = field(repr=False)  # residuals[n-1] is R*_n
    pi_n: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    tail_ratio: float
    stabilized_at: int

    def residual(self, n: int) -> Transform:
        if n < 1:
            raise DomainError("residual service transforms are indexed from n = 1")
        return self.residuals[n - 1]


def first_arrival_prob(model: MnGn1Model, n: int) -> float:
    """Probability that an arrival finding ``n >= 2`` is the first during the current service."""
    if n < 2:
        raise DomainError("the first-arrival probability is defined for n >= 2")
    return 1.0 - model.service(n).lst(model.arrival_rate(n))


class _Builder:
    """Incrementally extends the forward recursion; shares base D-nodes per (law, rate)."""

    def __init__(self, model: MnGn1Model):
        self.model = model
        self.out: list[Transform] = []
        self._fresh: dict[tuple[DistributionSpec, float], Transform] = {}

    def _fresh_d(self, g: DistributionSpec, rate: float) -> Transform:
        key = (g, rate)
        if key not in self._fresh:
            self._fresh[key] = d_operator(g, rate)
        return self._fresh[key]

    def extend(self, n_max: int) -> list[Transform]:
        m = self.model
        while len(self.out) < n_max:
            n = len(self.out) + 1
            g, rate = m.service(n), m.arrival_rate(n)
            if n == 1:
                self.out.append(self._fresh_d(g, rate))
                continue
            p_done = g.lst(rate)
            self.out.append(mix([1.0 - p_done, p_done],
                                [self._fresh_d(g, rate), d_operator(self.out[-1], rate)]))
        return self.out


def residuals_mngn1(model: MnGn1Model, n_max: int) -> list[Transform]:
    """``[R*_1, ..., R*_{n_max}]``."""
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    return list(_Builder(model).extend(n_max))


def _ratio(model: MnGn1Model, residuals: list[Transform], g1: Transform, n: int) -> float:
    lam_n = model.arrival_rate(n)
    prev = g1 if n == 1 else residuals[n - 2]
    up = model.arrival_rate(n - 1) * (1.0 - prev.eval(lam_n))
    down = lam_n * model.service(n).lst(lam_n)
    return up / down


def steady_state_mngn1(model: MnGn1Model, n_max: int = N_MAX) -> MnGn1Solution:
    """Time-average distribution from the product form, with a geometric tail.

    Ratios ``pi_n / pi_{n-1}`` are computed until, past the non-constant head,
    they change by less than 1e-10 over 10 consecutive ``n``; the remaining
    mass is completed geometrically with the last ratio.
    """
    model.check_stable()
    builder = _Builder(model)
    g1 = base(model.service(1))
    ratios = [math.nan]
    run = 0
    stabilized = None
    for n in range(1, n_max + 1):
        residuals = builder.extend(max(n - 1, 1))
        r = _ratio(model, residuals, g1, n)
        if not (r > 0 and math.isfinite(r)):
            raise NumericError(f"non-positive or non-finite ratio at n={n}: {r!r}")
        ratios.append(r)
        if n > model.constant_from and abs(r - ratios[-2]) < STABLE_TOL:
            run += 1
            if run >= STABLE_RUN:
                stabilized = n
                break
        else:
            run = 0
    if stabilized is None:
        raise NumericError(f"pi ratios did not stabilise within n_max={n_max}")
    tail_ratio = ratios[-1]
    if not tail_ratio < 1.0:
        raise NormalizationError(f"tail ratio {tail_ratio:.6g} >= 1: queue is not stable")

    # extend geometrically until the remaining mass is negligible
    extra = max(0, math.ceil(math.log(1e-14) / math.log(tail_ratio))) if tail_ratio > 0 else 0
    ratios.extend([tail_ratio] * extra)
    ratio_arr = np.asarray(ratios)
    unnorm = np.empty(len(ratio_arr))
    unnorm[0] = 1.0
    for n in range(1, len(unnorm)):
        unnorm[n] = unnorm[n - 1] * ratio_arr[n]
    tail_mass = unnorm[-1] * tail_ratio / (1.0 - tail_ratio)
    pi = unnorm / (math.fsum(unnorm) + tail_mass)
    return MnGn1Solution(model=model, residuals=list(builder.out), pi_n=pi,
                         ratios=ratio_arr, tail_ratio=tail_ratio, stabilized_at=stabilized)
