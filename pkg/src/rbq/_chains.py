"""Stable evaluation of residual-operator trees as mixtures of chains.

Composed residual operators collapse: applying D(r1) and then D(r2) to the
law of ``X`` gives the law of ``X - Y1 - Y2`` given ``X >= Y1 + Y2``, with
independent ``Yi ~ exp(ri)``.  The operator also distributes over mixtures,
reweighting each part by ``1 - F_i*(r)``.  So every tree built from base
laws, residual operators and mixtures equals a finite mixture of *chains*
``(law of X, multiset of rates)``.

A chain is evaluated by uniformisation.  The exponential phases of the sum,
followed by a phase that counts Poisson(s) events, form a pure-birth chain.
Run at a common rate ``L``, it is observed at ``N_L(X)`` jumps, whose law
``P(N_L(X) = j)`` comes from the distribution directly.  All quantities
(survival ``P(X >= S)``, the transform and its Taylor coefficients,
``1 - T*(s)``) are then sums of nonnegative terms.  Nothing is obtained by
subtracting nearly equal numbers, which is what makes long forward
recursions unstable when they are run through divided differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .distributions import DistributionSpec
from .errors import DegenerateInputError

PRUNE = 1e-18
# above this many expected uniformised jumps a large-s path is used instead
_MAX_JUMPS = 400.0


@dataclass(frozen=True)
class Chain:
    dist: DistributionSpec
    rates: tuple[float, ...]

    def extended(self, rate: float) -> "Chain":
        return Chain(self.dist, tuple(sorted(self.rates + (rate,))))


def _weights(dist, lam, m):
    """Poisson mixing weights, truncated relative to the mass beyond ``m`` jumps."""
    beta = dist.poisson_weights(lam)
    tail = math.fsum(beta[m:]) if m < len(beta) else 0.0
    need = 1e-17 * tail
    if need < 1e-20:
        tol = 10.0 ** math.floor(math.log10(max(need, 1e-300)))
        beta = dist.poisson_weights(lam, tol)
    return beta


def _run(dist, rate_lists, s, order):
    """Uniformised pass; returns (acc, M) with acc[t, M + i] = P(X >= S_t, N_s(X - S_t) = i)."""
    T = len(rate_lists)
    M = max(len(r) for r in rate_lists)
    top = max([s] + [max(r) for r in rate_lists if r])
    lam = top if top > 0 else 1.0
    beta = _weights(dist, lam, M)
    W = M + order + 2
    adv = np.zeros((T, W))
    stay = np.ones((T, W))
    v = np.zeros((T, W))
    for t, rs in enumerate(rate_lists):
        r = np.asarray(rs, dtype=float)
        adv[t, M - len(rs):M] = r / lam
        stay[t, M - len(rs):M] = (lam - r) / lam
        v[t, M - len(rs)] = 1.0
    adv[:, M:M + order + 1] = s / lam
    stay[:, M:M + order + 1] = (lam - s) / lam
    acc = beta[0] * v
    for b in beta[1:]:
        flow = v * adv
        v = v * stay
        v[:, 1:] += flow[:, :-1]
        acc += b * v
    return acc, M


def _moments(dist, rate_lists, order):
    """Jets at s = 0 from factorial moments of the jumps left after absorption."""
    T = len(rate_lists)
    M = max(len(r) for r in rate_lists)
    top = max([max(r) for r in rate_lists if r] or [1.0])
    beta = _weights(dist, top, M)
    J = len(beta)
    # a[t, k]: probability that the sum is complete exactly at jump k
    a = np.zeros((T, J))
    adv = np.zeros((T, M + 1))
    stay = np.ones((T, M + 1))
    v = np.zeros((T, M + 1))
    for t, rs in enumerate(rate_lists):
        r = np.asarray(rs, dtype=float)
        adv[t, M - len(rs):M] = r / top
        stay[t, M - len(rs):M] = (top - r) / top
        v[t, M - len(rs)] = 1.0
    a[:, 0] = v[:, M]
    for k in range(1, J):
        flow = v * adv
        a[:, k] = flow[:, M - 1] if M > 0 else 0.0
        v = v * stay
        v[:, 1:] += flow[:, :-1]
        v[:, M] = 0.0
    d = np.arange(J)
    out = np.empty((T, order + 1))
    surv = None
    for i in range(order + 1):
        weights = special.comb(d, i)
        # g[k] = sum_d beta[k + d] C(d, i)
        g = np.array([np.dot(beta[k:], weights[: J - k]) for k in range(J)])
        mom = a @ g / top ** i
        if i == 0:
            surv = mom
        out[:, i] = (-1) ** i * mom / surv
    return out, surv


def _value_large_s(chain: Chain, s: float, surv: float) -> float:
    # unnormalised transform through divided differences, which contract for s >> rates
    val = chain.dist.lst(s)
    for i, r in enumerate(chain.rates):
        acc, M = _run(chain.dist, [chain.rates[:i]], r, 0)
        val = r * (val - acc[0, M]) / (r - s)
    return val / surv


def _scale(dist: DistributionSpec, rates) -> float:
    return 1.0 / max(1.0 / dist.mean, max(rates, default=0.0))


class Canon:
    """Weighted mixture of chains (weights may be negative for affine solves)."""

    __slots__ = ("weights", "chains", "_surv")

    def __init__(self, weights, chains):
        merged: dict[Chain, float] = {}
        for w, c in zip(weights, chains):
            merged[c] = merged.get(c, 0.0) + float(w)
        self.chains = tuple(c for c, w in merged.items() if abs(w) >= PRUNE)
        self.weights = np.array([merged[c] for c in self.chains])
        self._surv: dict[Chain, float] = {}

    @classmethod
    def of(cls, dist: DistributionSpec) -> "Canon":
        return cls([1.0], [Chain(dist, ())])

    @classmethod
    def combine(cls, weights, canons) -> "Canon":
        ws, cs = [], []
        for w, c in zip(weights, canons):
            ws.extend(w * c.weights)
            cs.extend(c.chains)
        return cls(ws, cs)

    def _groups(self):
        groups: dict[DistributionSpec, list[int]] = {}
        for i, c in enumerate(self.chains):
            groups.setdefault(c.dist, []).append(i)
        return groups

    def terms(self, s: float, order: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-chain jets at ``s`` (normalised) and ``1 - T*(s)``."""
        T = len(self.chains)
        jets = np.empty((T, order + 1))
        killed = np.empty(T)
        for dist, idx in self._groups().items():
            plain = [i for i in idx if not self.chains[i].rates]
            for i in plain:
                jets[i] = self.chains[i].dist.jet(s, order)
                killed[i] = 0.0 if s == 0 else _one_minus_lst(dist, s)
            idx = [i for i in idx if self.chains[i].rates]
            if not idx:
                continue
            rate_lists = [self.chains[i].rates for i in idx]
            if s == 0.0:
                out, surv = _moments(dist, rate_lists, order) if order > 0 else (None, None)
                for k, i in enumerate(idx):
                    jets[i] = out[k] if out is not None else [1.0]
                    killed[i] = 0.0
                continue
            large = order == 0 and s * _scale(dist, [max(r) for r in rate_lists]) > _MAX_JUMPS \
                and all(s > 4.0 * max(r) for r in rate_lists)
            if large:
                for i in idx:
                    val = _value_large_s(self.chains[i], s, self.survival(i))
                    jets[i, 0] = val
                    killed[i] = 1.0 - val
                continue
            acc, M = _run(dist, rate_lists, s, order)
            surv = acc[:, M:].sum(axis=1)
            signs = (-1.0 / s) ** np.arange(order + 1)
            jets[idx] = acc[:, M:M + order + 1] / surv[:, None] * signs
            killed[idx] = acc[:, M + 1:].sum(axis=1) / surv
            for k, i in enumerate(idx):
                self._surv.setdefault(self.chains[i], surv[k])
        return jets, killed

    def survival(self, i: int) -> float:
        c = self.chains[i]
        if c not in self._surv:
            acc, M = _run(c.dist, [c.rates], 0.0, 0)
            self._surv[c] = acc[0, M:].sum()
        return self._surv[c]

    def jet(self, s: float, order: int) -> np.ndarray:
        jets, _ = self.terms(s, order)
        return self.weights @ jets

    def at_rate(self, rate: float) -> tuple[float, float]:
        """``(F*(rate), 1 - F*(rate))`` with the second computed without cancellation."""
        jets, killed = self.terms(rate, 0)
        return float(self.weights @ jets[:, 0]), float(self.weights @ killed)

    def d_op(self, rate: float) -> "Canon":
        _, killed = self.terms(rate, 0)
        w = self.weights * killed
        z = math.fsum(w)
        if not z > 1e-12:
            raise DegenerateInputError(
                f"1 - F*({rate}) = {z!r} is 0: X < Y a.s., the conditioning event is empty")
        return Canon(w / z, [c.extended(rate) for c in self.chains])

    def mean(self) -> float:
        return float(self.weights @ self.terms(0.0, 1)[0][:, 1]) * -1.0


def _one_minus_lst(dist: DistributionSpec, s: float) -> float:
    # P(X > Y) for Y ~ exp(s); a positive sum when the plain difference would cancel
    val = float(dist.lst(s))
    if val < 0.5:
        return 1.0 - val
    beta = dist.poisson_weights(s)
    return float(math.fsum(beta[1:]))
