"""Brute-force references for the analytic modules.

Nothing here calls the transform calculus or the queue solvers; the only
shared code is the distribution family (its density, CDF and closed-form
LST).  Integrals use adaptive Gauss-Kronrod quadrature (``scipy.integrate.quad``),
chains are solved by a dense linear solve, and ``sigma`` by plain bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, special

from .distributions import Deterministic, DistributionSpec, Uniform
from .errors import (DomainError, InstabilityError, NumericError, RootBracketError,
                     TailError)
from .schedule import RateSchedule

QUAD_TOL = 1e-8
QUAD_LIMIT = 100_000


@dataclass(frozen=True)
class DiscreteDist:
    """Probability vector on ``0..N``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < -1e-15) or abs(p.sum() - 1.0) > 1e-10:
            raise DomainError("probabilities must be nonnegative and sum to 1 within 1e-10")
        object.__setattr__(self, "probs", p)

    @property
    def support(self) -> np.ndarray:
        return np.arange(len(self.probs))

    def __getitem__(self, n: int) -> float:
        return float(self.probs[n]) if 0 <= n < len(self.probs) else 0.0

    def __len__(self) -> int:
        return len(self.probs)


def _quad(f, a, b, points=None, epsabs=QUAD_TOL):
    kw = {"points": points} if points is not None and math.isfinite(b) else {}
    val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-10, limit=QUAD_LIMIT, **kw)
    if not math.isfinite(val) or err > max(10 * epsabs, 1e-6):
        raise NumericError(f"quadrature did not converge (estimate {val!r}, error {err!r})")
    return val


def expect(G: DistributionSpec, fun, epsabs: float = 1e-13) -> float:
    """``E[fun(X)]`` for ``X ~ G``, by quadrature against the density."""
    if isinstance(G, Deterministic):
        return float(fun(G.value))
    if isinstance(G, Uniform):
        return _quad(lambda t: fun(t) * G.pdf(t), G.lo, G.hi, epsabs=epsabs)
    # split at a few means so the adaptive scheme sees the bulk
    m = G.mean
    edges = [0.0, m, 4 * m, 16 * m, math.inf]
    return math.fsum(_quad(lambda t: fun(t) * float(G.pdf(t)), a, b, epsabs=epsabs)
                     for a, b in zip(edges[:-1], edges[1:]))


def _inner(F: DistributionSpec, lam: float, u: float) -> float:
    # lam e^{lam u} int_u^inf e^{-lam x} dF(x)
    if isinstance(F, Deterministic):
        return lam * math.exp(-lam * (F.value - u)) if u <= F.value else 0.0
    lo, hi = (F.lo, F.hi) if isinstance(F, Uniform) else (0.0, math.inf)
    a = max(u, lo)
    if a >= hi:
        return 0.0
    return _quad(lambda x: lam * math.exp(-lam * (x - u)) * float(F.pdf(x)), a, hi)


def _mass(F: DistributionSpec, lam: float) -> float:
    mass = 1.0 - float(F.lst(lam))
    if not mass > 1e-12:
        raise DomainError(f"F*({lam}) = 1: the conditioning event is empty")
    return mass


def numeric_d_cdf(F: DistributionSpec, lam: float, w: float) -> float:
    """CDF at ``w`` of the law of ``X - Y`` given ``X >= Y``, by nested quadrature."""
    if not lam > 0 or not w >= 0:
        raise DomainError("need lam > 0 and w >= 0")
    mass = _mass(F, lam)
    # the integrand vanishes past the support; clip so quadrature never samples only zeros
    if isinstance(F, Deterministic):
        w, points = min(w, F.value), None
    elif isinstance(F, Uniform):
        w = min(w, F.hi)
        points = [F.lo] if 0.0 < F.lo < w else None
    else:
        points = None
    val = _quad(lambda u: _inner(F, lam, u), 0.0, w, points=points)
    return min(1.0, val / mass)


def numeric_d_density(F: DistributionSpec, lam: float, w: float) -> float:
    return _inner(F, lam, w) / _mass(F, lam)


def numeric_d_lst(F: DistributionSpec, lam: float, s: float) -> float:
    """LST of the same law, integrating ``exp(-s w)`` against its density."""
    mass = _mass(F, lam)
    if isinstance(F, Deterministic):
        top, pts = F.value, None
    elif isinstance(F, Uniform):
        top, pts = F.hi, [F.lo] if F.lo > 0 else None
    else:
        top, pts = math.inf, None
    if math.isfinite(top):
        return _quad(lambda u: math.exp(-s * u) * _inner(F, lam, u), 0.0, top, points=pts) / mass
    m = F.mean
    edges = [0.0, m, 4 * m, 16 * m, math.inf]
    return math.fsum(_quad(lambda u: math.exp(-s * u) * _inner(F, lam, u), a, b)
                     for a, b in zip(edges[:-1], edges[1:])) / mass


def numeric_d_lst_via_cdf(F: DistributionSpec, lam: float, s_grid, nodes: int = 12,
                          tail: float = 1e-11) -> np.ndarray:
    """LST of the law of ``X - Y`` given ``X >= Y``, taken from :func:`numeric_d_cdf`.

    Uses ``T*(s) = 1 - s int_0^inf exp(-s w) (1 - C(w)) dw`` with Gauss-Legendre
    panels on a doubling grid, extended until ``1 - C`` drops below ``tail``.
    The CDF is evaluated once per node and reused for every ``s``.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    x, wts = np.polynomial.legendre.leggauss(nodes)
    edges = [0.0]
    kinks = []
    if isinstance(F, Deterministic):
        kinks = [F.value]
    elif isinstance(F, Uniform):
        kinks = [F.lo, F.hi] if F.lo > 0 else [F.hi]
    scale = F.mean
    pts, ws = [], []
    b = 0.0
    right = scale / 4
    while True:
        a, b = b, right
        inner = [k for k in kinks if a < k < b]
        for lo, hi in zip([a] + inner, inner + [b]):
            pts.extend(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            ws.extend(0.5 * (hi - lo) * wts)
        edges.append(b)
        if 1.0 - numeric_d_cdf(F, lam, b) < tail or b > 1e4 * scale:
            break
        right = 2 * b
    pts, ws = np.asarray(pts), np.asarray(ws)
    surv = np.array([1.0 - numeric_d_cdf(F, lam, w) for w in pts])
    return np.array([1.0 - s * np.dot(ws, np.exp(-s * pts) * surv) for s in s_grid])


def mc_residual(F: DistributionSpec, lam: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo draws of ``X - Y`` given ``X >= Y`` (rejection)."""
    out = []
    n = 0
    while n < size:
        x = F.sample(rng, size)
        y = rng.exponential(1.0 / lam, size)
        keep = x[x >= y] - y[x >= y]
        out.append(keep)
        n += keep.size
    return np.concatenate(out)[:size]


def sigma_bisect(G: DistributionSpec, mu: float, eps: float = 1e-9, width: float = 1e-14) -> float:
    """Root of ``sigma - G*(mu (1 - sigma))`` on ``(eps, 1 - eps)`` by bisection."""
    f = lambda x: x - float(G.lst(mu * (1.0 - x)))
    lo, hi = eps, 1.0 - eps
    flo, fhi = f(lo), f(hi)
    if not (flo < 0 < fhi):
        raise RootBracketError(f"no sign change on ({lo}, {hi}): f = ({flo:.3g}, {fhi:.3g})")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def default_trunc(rho: float) -> int:
    return max(200, math.ceil(10.0 / (1.0 - rho)))


def _stationary(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    x = linalg.solve(A, b)
    return np.clip(x, 0.0, None) / np.clip(x, 0.0, None).sum()


def _check_tail(p: np.ndarray, tol: float = 1e-10) -> None:
    if p[-5:].sum() > tol:
        raise TailError(f"truncation too small: mass {p[-5:].sum():.3g} in the last states")


def gmc_arrival_chain(G: DistributionSpec, c: int, mu: float, trunc: int | None = None) -> DiscreteDist:
    """Stationary law of the number found by arrivals in a G/M/c queue.

    Transition ``i -> j`` over one inter-arrival time starting from ``i + 1``
    customers: binomial thinning while every customer is in service,
    Poisson(c mu) departures while all servers are busy, and the
    convolution of the two when the inter-arrival time crosses from one
    regime into the other.
    """
    lam = 1.0 / G.mean
    if not lam < c * mu:
        raise InstabilityError(f"G/M/c requires lambda < c mu; got {lam:.6g} >= {c * mu:.6g}")
    N = trunc or default_trunc(lam / (c * mu))
    cm = c * mu
    # all servers busy: k departures at rate c mu
    beta = np.array([expect(G, lambda t, k=k: math.exp(-cm * t + k * math.log(cm * t) - math.lgamma(k + 1))
                            if t > 0 else float(k == 0)) for k in range(N + 2)])
    P = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        n0 = i + 1
        for j in range(0, min(n0, N) + 1):
            if n0 <= c:
                P[i, j] = expect(G, lambda t, j=j, n0=n0: special.comb(n0, j)
                                 * math.exp(-j * mu * t) * (-math.expm1(-mu * t)) ** (n0 - j))
            elif j >= c:
                P[i, j] = beta[n0 - j]
            else:
                P[i, j] = expect(G, lambda t, j=j, n0=n0: _crossing(t, n0, j, c, mu))
    a = _stationary(P)
    _check_tail(a)
    return DiscreteDist(a)


def _crossing(t: float, n0: int, j: int, c: int, mu: float) -> float:
    # reach c after n0 - c departures at rate c mu (time u), then binomial thinning over t - u
    if t <= 0:
        return 0.0
    cm = c * mu
    k = n0 - c

    def dens(u):
        return math.exp(math.log(cm) + (k - 1) * math.log(cm * u) - cm * u - math.lgamma(k)) if u > 0 else (
            cm if k == 1 else 0.0)

    def binom(r):
        return special.comb(c, j) * math.exp(-j * mu * r) * (-math.expm1(-mu * r)) ** (c - j)

    return _quad(lambda u: dens(u) * binom(t - u), 0.0, t, epsabs=1e-14)


def embedded_chain_gmc(G: DistributionSpec, c: int, mu: float, trunc: int | None = None) -> DiscreteDist:
    """Time-average queue-length law of G/M/c from its arrival-epoch chain.

    Level crossing between ``n - 1`` and ``n``: ``lam a_{n-1} = min(n, c) mu pi_n``.
    """
    a = gmc_arrival_chain(G, c, mu, trunc).probs
    lam = 1.0 / G.mean
    n = np.arange(1, len(a) + 1)
    pi_up = lam * a / (np.minimum(n, c) * mu)
    pi = np.concatenate([[1.0 - pi_up.sum()], pi_up])
    return DiscreteDist(pi)


def embedded_chain_mg1(G: DistributionSpec, lam: float, trunc: int | None = None) -> DiscreteDist:
    """Queue length at departures of M/G/1 (equal to the time average by PASTA)."""
    rho = lam * G.mean
    if not rho < 1.0:
        raise InstabilityError(f"M/G/1 requires lam * mean(G) < 1; got {rho:.6g}")
    N = trunc or default_trunc(rho)
    k = np.array([expect(G, lambda t, j=j: math.exp(-lam * t + j * math.log(lam * t) - math.lgamma(j + 1))
                         if t > 0 else float(j == 0)) for j in range(N + 1)])
    P = np.zeros((N + 1, N + 1))
    P[0, :] = k
    for i in range(1, N + 1):
        P[i, i - 1:] = k[: N + 2 - i]
    p = _stationary(P)
    _check_tail(p)
    return DiscreteDist(p)


def birth_death_solve(birth: RateSchedule, death: RateSchedule, trunc: int = 200) -> DiscreteDist:
    """Detailed balance ``pi_{n+1} = pi_n birth_n / death_{n+1}``, truncated at ``trunc``.

    Schedules are read by position: the ``n``-th entry of ``birth`` is the
    rate out of state ``n`` upwards and the ``n``-th entry of ``death`` the
    rate out of state ``n + 1`` downwards, whatever their offsets.
    """
    if not birth.tail < death.tail:
        raise InstabilityError(
            f"birth-death normaliser diverges: tail birth {birth.tail} >= tail death {death.tail}")
    p = np.empty(trunc + 1)
    p[0] = 1.0
    for n in range(trunc):
        p[n + 1] = p[n] * birth.rate(n + birth.offset) / death.rate(n + death.offset)
    return DiscreteDist(p / p.sum())
