"""phi-entropies and the inequalities built on them.

``H_phi(Z) = E[phi(Z)] - phi(E[Z])`` for ``phi`` in the class of convex
functions with concave ``1/phi''``.  This module evaluates H_phi on finite
distributions and measures the slack of

* the duality (variational) formula,
* the symmetrisation bounds with ``phi'`` and with ``psi(x) = (phi(x)-phi(0))/x``,
* tensorisation over a product space,
* the modified phi-Sobolev inequalities for monotone convex transforms, and
* the generalised Efron-Stein moment recursions they imply.

All ``*_gap`` functions return RHS - LHS, so a valid inequality gives a
nonnegative number (up to rounding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .increments import Functional, IncrementTable
from .product_space import ProductSpace

__all__ = [
    "PhiSpec",
    "FiniteDistribution",
    "Wrap",
    "phi_entropy",
    "duality_value",
    "symmetrization_gaps",
    "tensorization_gap",
    "sobolev_gap",
    "generalized_es_gap",
    "SOBOLEV_KINDS",
    "GES_KINDS",
]

SOBOLEV_KINDS = ("thm5_vplus", "thm5_v", "thm6_v", "thm6_vplus", "thm6_vminus")
GES_KINDS = ("lemma3_v", "lemma3_vplus", "lemma3_vminus", "lemma4", "lemma5_v", "lemma5_vplus")

_HYP_TOL = 1e-9


@dataclass(frozen=True)
class PhiSpec:
    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.p is None or not 1.0 < self.p <= 2.0:
                raise ValueError(f"power kind needs p in (1, 2], got {self.p}")
        elif self.kind not in ("square", "xlogx"):
            raise ValueError(f"unknown phi kind {self.kind!r}")

    @classmethod
    def square(cls):
        return cls("square")

    @classmethod
    def xlogx(cls):
        return cls("xlogx")

    @classmethod
    def power(cls, p: float):
        return cls("power", float(p))

    @property
    def nonnegative_only(self) -> bool:
        return self.kind != "square"

    def check_domain(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if self.nonnegative_only and np.any(x < 0):
            raise ValueError(f"{self} is defined on nonnegative values only; got min {x.min()}")

    # phi and its derivatives; values at 0 follow the continuous extension
    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return x * x
        if self.kind == "power":
            return x ** self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return 2.0 * x
        if self.kind == "power":
            return self.p * x ** (self.p - 1.0)
        with np.errstate(divide="ignore"):
            return np.log(x) + 1.0

    def d2phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return np.full_like(x, 2.0)
        with np.errstate(divide="ignore"):
            if self.kind == "power":
                return self.p * (self.p - 1.0) * x ** (self.p - 2.0)
            return 1.0 / x

    def psi(self, x):
        """``(phi(x) - phi(0)) / x``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return x
        if self.kind == "power":
            return x ** (self.p - 1.0)
        with np.errstate(divide="ignore"):
            return np.log(x)

    def dpsi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return np.ones_like(x)
        with np.errstate(divide="ignore"):
            if self.kind == "power":
                return (self.p - 1.0) * x ** (self.p - 2.0)
            return 1.0 / x


@dataclass(frozen=True)
class FiniteDistribution:
    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0 or len(self.values) != len(self.weights):
            raise ValueError("distribution needs matching, nonempty values and weights")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {math.fsum(self.weights)!r}, not 1")

    @classmethod
    def of(cls, values: Sequence[float], weights: Sequence[float] | None = None) -> "FiniteDistribution":
        values = tuple(float(v) for v in values)
        if weights is None:
            weights = [1.0 / len(values)] * len(values)
        return cls(values, tuple(float(w) for w in weights))

    @classmethod
    def normalized(cls, values, weights) -> "FiniteDistribution":
        w = np.asarray(weights, dtype=float)
        return cls.of(values, w / math.fsum(w))

    def arrays(self):
        return np.asarray(self.values, dtype=float), np.asarray(self.weights, dtype=float)


def _expect(values, weights) -> float:
    return math.fsum(np.asarray(values, dtype=float) * weights)


def _entropy(values, weights, phi: PhiSpec) -> float:
    phi.check_domain(values)
    mean = _expect(values, weights)
    return _expect(phi.phi(values), weights) - float(phi.phi(mean))


def phi_entropy(dist: FiniteDistribution, phi: PhiSpec) -> float:
    z, w = dist.arrays()
    return _entropy(z, w, phi)


def _times(a, b):
    """Product with the convention 0 * inf = 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a * b
    return np.where((a == 0) | (b == 0), 0.0, out)


def duality_value(joint, phi: PhiSpec) -> float:
    """``E[(phi'(T) - phi'(E T))(Z - T) + phi(T)] - phi(E T)`` for coupled atoms.

    ``joint`` is an iterable of ``(z, t, weight)`` or a ``(k, 3)`` array.  Where
    ``phi'(T)`` is infinite (``T = 0`` for x log x) the term is ``-inf`` unless
    ``Z = T``, following the extended expectation.
    """
    arr = np.asarray(joint, dtype=float).reshape(-1, 3)
    z, t, w = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
        raise ValueError("coupling weights must be a probability vector")
    phi.check_domain(z)
    phi.check_domain(t)
    et = _expect(t, w)
    if phi.nonnegative_only and et <= 0:
        if np.any(z[w > 0] != 0):
            raise ValueError("E[T] = 0 while Z is not identically 0; pass T = 1 instead")
        return 0.0
    slope = phi.dphi(t) - float(phi.dphi(et))
    terms = _times(slope, z - t) + phi.phi(t)
    terms = np.where(w > 0, terms, 0.0)
    if np.any(np.isneginf(terms)):
        return -math.inf
    return _expect(terms, w) - float(phi.phi(et))


def symmetrization_gaps(dist: FiniteDistribution, phi: PhiSpec) -> tuple[float, float]:
    """Slack of the two symmetrisation bounds under the product coupling.

    Returns ``(slope_gap, psi_gap)`` with
    ``slope_gap = 1/2 E[(Z - Z')(phi'(Z) - phi'(Z'))] - H_phi(Z)`` and ``psi_gap``
    the same with ``psi`` in place of ``phi'``.
    """
    z, w = dist.arrays()
    h = _entropy(z, w, phi)
    dz = z[:, None] - z[None, :]
    ww = (w[:, None] * w[None, :]).reshape(-1)

    def rhs(g):
        gz = g(z)
        with np.errstate(invalid="ignore"):
            dg = gz[:, None] - gz[None, :]
        # atoms with Z = Z' contribute nothing, even where g is infinite
        terms = np.where(dz == 0, 0.0, _times(dz, dg)).reshape(-1)
        if np.any(np.isposinf(terms[ww > 0])):
            return math.inf
        return 0.5 * _expect(terms, ww)

    return rhs(phi.dphi) - h, rhs(phi.psi) - h


def tensorization_gap(space: ProductSpace, f: Functional, phi: PhiSpec, table: IncrementTable | None = None) -> float:
    """``sum_i E[H_phi(Z | X^(i))] - H_phi(Z)`` by enumeration."""
    t = table or IncrementTable.exact(space, f)
    z = t.z
    if phi.nonnegative_only and np.any(z < 0):
        raise ValueError(f"functional takes negative values (min {z.min()}); {phi.kind} needs F >= 0")
    h = _entropy(z, t.weights, phi)
    fz = phi.phi(z)
    total = []
    for i in range(space.n):
        cond = t.conditional_mean(fz, i) - phi.phi(t.conditional_mean(z, i))
        total.append(_expect(cond, t.weights))
    return math.fsum(total) - h


# -- monotone convex transforms ---------------------------------------------

@dataclass(frozen=True)
class Wrap:
    """A nonnegative convex transform ``f`` with its (right) derivative."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    monotone: str  # "increasing" or "decreasing"

    @classmethod
    def power_plus(cls, c: float, alpha: float) -> "Wrap":
        """``(z - c)_+^alpha``, alpha >= 1."""
        if alpha < 1:
            raise ValueError("alpha must be >= 1 for a convex transform")

        def f(z):
            return np.maximum(np.asarray(z, dtype=float) - c, 0.0) ** alpha

        def df(z):
            u = np.asarray(z, dtype=float) - c
            out = alpha * np.maximum(u, 0.0) ** (alpha - 1.0)
            # right derivative: 0 below c, and at c unless alpha == 1
            return np.where(u > 0, out, 1.0 if alpha == 1 else 0.0) * (u >= 0)

        return cls(f"(z-{c:g})_+^{alpha:g}", f, df, "increasing")

    @classmethod
    def power_minus(cls, c: float, alpha: float) -> "Wrap":
        """``(z - c)_-^alpha = (c - z)_+^alpha``, alpha >= 1."""
        if alpha < 1:
            raise ValueError("alpha must be >= 1 for a convex transform")

        def f(z):
            return np.maximum(c - np.asarray(z, dtype=float), 0.0) ** alpha

        def df(z):
            u = c - np.asarray(z, dtype=float)
            out = -alpha * np.maximum(u, 0.0) ** (alpha - 1.0)
            return np.where(u > 0, out, 0.0)

        return cls(f"(z-{c:g})_-^{alpha:g}", f, df, "decreasing")

    @classmethod
    def exponential(cls, lam: float) -> "Wrap":
        def f(z):
            return np.exp(lam * np.asarray(z, dtype=float))

        def df(z):
            return lam * np.exp(lam * np.asarray(z, dtype=float))

        return cls(f"exp({lam:g} z)", f, df, "increasing" if lam >= 0 else "decreasing")


def _convex_on(points: np.ndarray, g: Callable[[np.ndarray], np.ndarray]) -> bool:
    """Discrete convexity of ``g`` on the sorted distinct realised points."""
    x = np.unique(points)
    if x.size < 3:
        return True
    with np.errstate(invalid="ignore", divide="ignore"):
        y = g(x)
    if not np.all(np.isfinite(y)):
        # an infinite value at an endpoint (e.g. log 0) is fine for convexity only at the left end
        finite = np.isfinite(y)
        if not np.all(finite[1:]):
            return False
        x, y = x[1:], y[1:]
        if x.size < 3:
            return True
    slopes = np.diff(y) / np.diff(x)
    scale = max(1.0, float(np.max(np.abs(slopes))))
    return bool(np.all(np.diff(slopes) >= -_HYP_TOL * scale))


def _check_hypotheses(wrap: Wrap, phi: PhiSpec, inequality: str, points: np.ndarray) -> None:
    fx = wrap.f(points)
    if np.any(fx < 0):
        raise ValueError(f"hypothesis violated: {wrap.name} must be nonnegative")
    want = "increasing" if inequality.startswith("thm5") else "decreasing"
    if wrap.monotone != want:
        raise ValueError(f"hypothesis violated: {inequality} needs a {want} transform, {wrap.name} is {wrap.monotone}")
    if not _convex_on(points, wrap.f):
        raise ValueError(f"hypothesis violated: {wrap.name} is not convex on the realised range")
    if inequality in ("thm5_v", "thm6_v"):
        comp, label = (lambda x: phi.dphi(wrap.f(x))), "phi' o f"
    else:
        comp, label = (lambda x: phi.psi(wrap.f(x))), "psi o f"
    if not _convex_on(points, comp):
        raise ValueError(f"hypothesis violated: {label} is not convex on the realised range")


def sobolev_gap(space: ProductSpace, f_base: Functional, phi: PhiSpec, wrap: Wrap, inequality: str,
                table: IncrementTable | None = None) -> float:
    """Slack of a modified phi-Sobolev inequality for ``H_phi(wrap(Z))``.

    ``thm5_vplus``: ``E[V+ f'^2(Z) psi'(f(Z))]``;
    ``thm5_v``: ``1/2 E[V f'^2(Z) phi''(f(Z))]`` (needs ``Z_i <= Z``);
    ``thm6_v`` / ``thm6_vplus``: as above but evaluated at ``Z~``;
    ``thm6_vminus``: ``E[V- f'^2(Z) psi'(f(Z))]``.

    ``Z~`` is the smallest value reachable by a reduction or a single-coordinate
    resample (and not above ``Z``); for infimum reductions with ``Z_i <= Z``
    this is ``min_i Z_i``.
    """
    if inequality not in SOBOLEV_KINDS:
        raise ValueError(f"unknown inequality {inequality!r}; expected one of {SOBOLEV_KINDS}")
    t = table or IncrementTable.exact(space, f_base)
    z = t.z
    if inequality in ("thm5_v", "thm6_v", "thm6_vplus") and not t.reduction_below():
        raise ValueError(f"hypothesis violated: {inequality} needs Z_i <= Z")
    if inequality.startswith("thm6") and inequality != "thm6_vminus":
        zt = np.minimum(t.zi_min, t.resample_min)
        zt = np.minimum(zt, z)
    else:
        zt = z
    points = np.concatenate([t.on_support(z), t.on_support(zt)])
    _check_hypotheses(wrap, phi, inequality, points)

    fz = wrap.f(z)
    phi.check_domain(fz)
    lhs = _entropy(fz, t.weights, phi)
    dfz = wrap.df(zt)
    fzt = wrap.f(zt)
    if inequality in ("thm5_v", "thm6_v"):
        weight = 0.5 * t.v
        curv = phi.d2phi(fzt)
    else:
        weight = {"thm5_vplus": t.v_plus, "thm6_vplus": t.v_plus, "thm6_vminus": t.v_minus}[inequality]
        curv = phi.dpsi(fzt)
    terms = _times(_times(weight, dfz * dfz), curv)
    terms = np.where(t.weights > 0, terms, 0.0)
    if np.any(np.isposinf(terms)):
        return math.inf
    return _expect(terms, t.weights) - lhs


def generalized_es_gap(space: ProductSpace, f: Functional, q: float, alpha: float, which: str,
                       table: IncrementTable | None = None) -> float:
    """Slack of a moment recursion ``E[Y^q] <= E[Y^alpha]^(q/alpha) + c E[W Y'^(q-2)]``.

    ``Y`` is ``(Z - EZ)_+`` (lemma3_v, lemma3_vplus), ``(Z - EZ)_-``
    (lemma3_vminus, lemma5_*), or ``Z`` (lemma4).
    """
    if which not in GES_KINDS:
        raise ValueError(f"unknown inequality {which!r}; expected one of {GES_KINDS}")
    q = float(q)
    alpha = float(alpha)
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    if not q / 2 - 1e-12 <= alpha <= q - 1 + 1e-12:
        raise ValueError(f"alpha must lie in [q/2, q-1] = [{q / 2}, {q - 1}], got {alpha}")
    t = table or IncrementTable.exact(space, f)
    w = t.weights
    z = t.z
    ez = t.ez.value
    c = z - ez
    if which == "lemma4":
        if not t.reduction_below() or not np.all(t.on_support(t.zi_nonneg)):
            raise ValueError("hypothesis violated: lemma4 needs 0 <= Z_i <= Z")
        y = z
        inner = z
        weight, coef = t.v, q * (q - alpha) / 2
    elif which in ("lemma3_v", "lemma3_vplus"):
        if which == "lemma3_v" and not t.reduction_below():
            raise ValueError("hypothesis violated: lemma3_v needs Z_i <= Z")
        y = np.maximum(c, 0.0)
        inner = y
        weight, coef = (t.v, q * (q - alpha) / 2) if which == "lemma3_v" else (t.v_plus, alpha * (q - alpha))
    elif which == "lemma3_vminus":
        y = np.maximum(-c, 0.0)
        inner = y
        weight, coef = t.v_minus, alpha * (q - alpha)
    else:
        y = np.maximum(-c, 0.0)
        if which == "lemma5_v":
            if not t.reduction_below():
                raise ValueError("hypothesis violated: lemma5_v needs Z_i <= Z")
            m = np.maximum(t.m_reduction, 0.0)
            weight, coef = t.v, q * (q - alpha) / 2
        else:
            m = t.m_resample
            weight, coef = t.v_plus, alpha * (q - alpha)
        inner = np.maximum(-(c - m), 0.0)
    if np.any(y < 0):
        raise ValueError("hypothesis violated: lemma4 needs Z >= 0")
    lhs = _expect(y ** q, w)
    first = _expect(y ** alpha, w) ** (q / alpha)
    # 0^0 = 1 when q = 2
    second = coef * _expect(weight * inner ** (q - 2), w)
    return first + second - lhs
