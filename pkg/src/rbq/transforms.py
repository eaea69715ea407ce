"""Laplace-Stieltjes transform calculus.

A :class:`Transform` is an immutable expression tree over four node kinds:

* ``base``     -- the closed-form LST of a :class:`DistributionSpec`;
* ``dop``      -- the conditional residual operator D(lam, F): the law of
  ``X - Y`` given ``X >= Y`` with ``Y ~ exp(lam)`` independent of ``X ~ F``;
* ``mixture``  -- a weighted combination of transforms;
* ``inverse``  -- the unique F with D(lam, F) = H, given gamma = h(0).

Every node evaluates *jets* (Taylor coefficients) rather than plain values.
Subtrees made only of base, residual-operator and mixture nodes are kept in
a flattened form (a mixture of operator chains over base laws, see
``_chains``) and evaluated by uniformisation, which is exact at ``s = lam``
and does not amplify rounding error along long recursions.

Above an inverse node the residual operator falls back to the divided
difference ``c * (F(s) - F(lam)) / (lam - s)``.  At ``s = lam`` this is 0/0,
and its jet is read off the parent's jet at ``lam``, shifted by one order.

Evaluation walks the tree with an explicit stack, so recursion depth is not
bounded by Python's frame limit, and caches jets per node and point.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from ._chains import Canon
from .distributions import DistributionSpec, lst_eval
from .errors import DegenerateInputError, DomainError, InvalidDensityError

__all__ = [
    "Transform",
    "base",
    "as_transform",
    "lst_eval",
    "d_operator",
    "residual_mean",
    "inverse_d",
    "mix",
    "estimate_gamma",
    "S_GRID",
]

#: Reference grid {0, 0.1, ..., 10} used by the invariant checks.
S_GRID = np.round(np.arange(0, 101) * 0.1, 10)

_SINGULAR_REL = 1e-6
_CACHE_LIMIT = 4096


class Transform:
    """Evaluable LST of a nonnegative random variable."""

    kind: str = ""

    def __init__(self, mean, parents: tuple["Transform", ...] = (), canon: Canon | None = None):
        self._mean = mean
        self._parents = parents
        self._canon = canon
        self._jets: dict[float, np.ndarray] = {}

    # -- public surface -------------------------------------------------
    @property
    def mean(self) -> float:
        if self._mean is None:
            self._mean = self._canon.mean()
        return float(self._mean)

    @property
    def parents(self) -> tuple["Transform", ...]:
        return self._parents

    def eval(self, s):
        """LST value at ``s >= 0``; arrays are evaluated elementwise."""
        arr = np.asarray(s, dtype=float)
        if arr.ndim == 0:
            return float(self.jet(float(arr), 0)[0])
        return np.array([self.jet(float(x), 0)[0] for x in arr.ravel()]).reshape(arr.shape)

    __call__ = eval

    def derivative(self, s: float) -> float:
        return float(self.jet(s, 1)[1])

    def jet(self, s: float, order: int) -> np.ndarray:
        """Taylor coefficients ``[T(s), T'(s), T''(s)/2!, ...]`` up to ``order``."""
        s = float(s)
        if not s >= 0:
            raise DomainError(f"LST argument must be nonnegative, got {s!r}")
        order = int(order)
        _evaluate(self, s, order)
        return self._jets[s][: order + 1].copy()

    def depth(self) -> int:
        seen: dict[int, int] = {}
        stack = [self]
        while stack:
            node = stack[-1]
            if id(node) in seen:
                stack.pop()
                continue
            todo = [p for p in node._parents if id(p) not in seen]
            if todo:
                stack.extend(todo)
                continue
            seen[id(node)] = 1 + max((seen[id(p)] for p in node._parents), default=0)
            stack.pop()
        return seen[id(self)]

    # -- node protocol --------------------------------------------------
    def _needs(self, s: float, order: int) -> list[tuple["Transform", float, int]]:
        if self._canon is not None:
            return []
        return [(p, s, order) for p in self._parents]

    def _compute(self, s: float, order: int) -> np.ndarray:
        raise NotImplementedError

    def _cached(self, s: float, order: int) -> bool:
        jet = self._jets.get(s)
        return jet is not None and len(jet) > order

    def _store(self, s: float, jet: np.ndarray) -> None:
        if len(self._jets) >= _CACHE_LIMIT:
            self._jets.clear()
        self._jets[s] = jet

    def _parent_jet(self, parent: "Transform", s: float, order: int) -> np.ndarray:
        return parent._jets[s][: order + 1]


def _evaluate(root: Transform, s: float, order: int) -> None:
    stack = [(root, s, order)]
    while stack:
        node, x, k = stack[-1]
        if node._cached(x, k):
            stack.pop()
            continue
        missing = [(p, y, m) for p, y, m in node._needs(x, k) if not p._cached(y, m)]
        if missing:
            stack.extend(missing)
            continue
        jet = node._canon.jet(x, k) if node._canon is not None else node._compute(x, k)
        node._store(x, jet)
        stack.pop()


class _Base(Transform):
    kind = "base"

    def __init__(self, dist: DistributionSpec):
        super().__init__(dist.mean, canon=Canon.of(dist))
        self.dist = dist

    def _needs(self, s, order):
        return []

    def _compute(self, s, order):
        return self.dist.jet(s, order)

    def __repr__(self):
        return f"Base({self.dist!r})"


class _DOp(Transform):
    kind = "dop"

    def __init__(self, parent: Transform, rate: float):
        self.rate = rate
        if parent._canon is not None:
            self.at_rate, killed = parent._canon.at_rate(rate)
            super().__init__(None, (parent,), parent._canon.d_op(rate))
            return
        at_rate = parent.eval(rate)
        if at_rate >= 1.0 - 1e-12:
            raise DegenerateInputError(
                f"F*({rate}) = {at_rate!r} is 1: X < Y a.s., the conditioning event is empty")
        self.at_rate = at_rate
        self.scale = rate / (1.0 - at_rate)
        super().__init__(parent.mean / (1.0 - at_rate) - 1.0 / rate, (parent,))

    def _singular(self, s: float) -> bool:
        return abs(s - self.rate) < _SINGULAR_REL * max(1.0, self.rate)

    def _needs(self, s, order):
        (p,) = self._parents
        if self._singular(s):
            return [(p, self.rate, order + 2)]
        return [(p, s, order)]

    def _compute(self, s, order):
        (p,) = self._parents
        c = self.scale
        if self._singular(s):
            pj = self._parent_jet(p, self.rate, order + 2)
            d = -c * pj[1:]  # jet of D at the rate itself, order + 1 terms
            e = s - self.rate
            if e == 0.0:
                return d[: order + 1].copy()
            out = np.zeros(order + 1)
            for j in range(order + 1):
                for i in range(j, len(d)):
                    out[j] += d[i] * math.comb(i, j) * e ** (i - j)
            return out
        q = self._parent_jet(p, s, order).copy()
        q[0] -= self.at_rate
        delta = self.rate - s
        out = np.empty(order + 1)
        prev = 0.0
        for j in range(order + 1):
            prev = (c * q[j] + prev) / delta
            out[j] = prev
        return out

    def __repr__(self):
        return f"DOp({self._parents[0]!r}, rate={self.rate})"


class _Mixture(Transform):
    kind = "mixture"

    def __init__(self, weights: Sequence[float], parts: Sequence[Transform]):
        self.weights = tuple(float(w) for w in weights)
        if all(p._canon is not None for p in parts):
            canon = Canon.combine(self.weights, [p._canon for p in parts])
            super().__init__(None, tuple(parts), canon)
            return
        super().__init__(math.fsum(w * p.mean for w, p in zip(self.weights, parts)), tuple(parts))

    def _compute(self, s, order):
        out = np.zeros(order + 1)
        for w, p in zip(self.weights, self._parents):
            if w != 0.0:
                out += w * self._parent_jet(p, s, order)
        return out

    def _needs(self, s, order):
        if self._canon is not None:
            return []
        return [(p, s, order) for w, p in zip(self.weights, self._parents) if w != 0.0]

    def __repr__(self):
        return f"Mixture({list(self.weights)}, {list(self._parents)!r})"


class _Inverse(Transform):
    kind = "inverse"

    def __init__(self, parent: Transform, gamma: float, rate: float):
        self.gamma = gamma
        self.rate = rate
        super().__init__((rate * parent.mean + 1.0) / (rate + gamma), (parent,))

    def _compute(self, s, order):
        (h,) = self._parents
        hj = self._parent_jet(h, s, order)
        out = hj * (self.rate - s)
        out[1:] -= hj[:-1]
        out[0] += self.gamma
        return out / (self.rate + self.gamma)

    def __repr__(self):
        return f"Inverse({self._parents[0]!r}, gamma={self.gamma}, rate={self.rate})"


def _positive_rate(lam: float) -> float:
    lam = float(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"rate must be positive and finite, got {lam!r}")
    return lam


def base(d: DistributionSpec) -> Transform:
    return _Base(d)


def as_transform(f) -> Transform:
    if isinstance(f, Transform):
        return f
    if isinstance(f, DistributionSpec):
        return _Base(f)
    raise TypeError(f"expected a Transform or DistributionSpec, got {type(f).__name__}")


def d_operator(f, lam: float) -> Transform:
    """Transform of D(lam, F): the law of ``X - Y`` given ``X >= Y``.

    Args:
        f: parent transform (or a distribution, wrapped as a base node).
        lam: rate of the independent exponential ``Y``.

    Raises:
        DegenerateInputError: if ``F*(lam)`` is 1 within 1e-12.
    """
    return _DOp(as_transform(f), _positive_rate(lam))


def residual_mean(f, lam: float) -> float:
    """Mean of D(lam, F): ``mean(F) / (1 - F*(lam)) - 1/lam``."""
    return d_operator(f, lam).mean


def inverse_d(h, gamma: float, lam: float) -> Transform:
    """The unique F with D(lam, F) = H, given the density of H at zero.

    ``F*(s) = (H*(s) (lam - s) + gamma) / (lam + gamma)``, so that
    ``F*(lam) = gamma / (lam + gamma)``.
    """
    h = as_transform(h)
    lam = _positive_rate(lam)
    gamma = float(gamma)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise InvalidDensityError(f"h(0) must lie in (0, inf), got {gamma!r}")
    if abs(h.eval(0.0) - 1.0) > 1e-10:
        raise DomainError("inverse_d needs a proper transform with H*(0) = 1")
    return _Inverse(h, gamma, lam)


def _check_parts(weights, parts) -> tuple[list[float], list[Transform]]:
    weights = [float(w) for w in weights]
    parts = [as_transform(p) for p in parts]
    if not parts or len(weights) != len(parts):
        raise DomainError("mixture needs equally many weights and parts (at least one)")
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        raise DomainError(f"mixture weights must sum to 1, got {math.fsum(weights)!r}")
    return weights, parts


def mix(weights: Iterable[float], parts: Iterable) -> Transform:
    """Convex combination of transforms (weights nonnegative, summing to 1)."""
    weights, parts = _check_parts(list(weights), list(parts))
    if any(w < 0 for w in weights):
        raise DomainError("mixture weights must be nonnegative")
    return _Mixture(weights, parts)


def affine(weights: Iterable[float], parts: Iterable) -> Transform:
    """Affine combination (weights sum to 1 but may be negative).

    Used to solve a mixture identity for one of its components; the result
    is a transform only when the identity genuinely holds.
    """
    weights, parts = _check_parts(list(weights), list(parts))
    return _Mixture(weights, parts)


def estimate_gamma(h, s: float = 1e6) -> float:
    """Approximate the density at zero of H from ``s H*(s)`` as ``s -> inf``.

    Uses one Richardson step on ``s`` and ``2s`` to cancel the ``1/s`` term of
    the initial-value limit; the result is approximate (relative error of
    order ``1/s**2`` for smooth densities).
    """
    h = as_transform(h)
    g1 = s * h.eval(s)
    g2 = 2.0 * s * h.eval(2.0 * s)
    return 2.0 * g2 - g1
