"""Sums, suprema of empirical processes, and conditional Rademacher averages.

A finite :class:`FunctionClass` is a list of functions, each given as a value
table over the support of every coordinate, so ``f_k(X_i)`` is a lookup.
Countable classes are handled by truncation, which can only shrink suprema.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import BoundResult
from .constants import KAPPA, K, constant
from .increments import Functional, IncrementTable, Reduction
from .product_space import ProductSpace, rademacher

__all__ = [
    "FunctionClass",
    "EPStats",
    "khinchine_bound",
    "marcinkiewicz_bound",
    "rosenthal_bounds",
    "sum_functional",
    "sum_stats",
    "ep_functional",
    "ep_values",
    "ep_stats",
    "ep_bounds",
    "lemma7_check",
    "lemma8_check",
    "conditional_rademacher",
    "cond_rademacher_functional",
    "thm13_bounds",
    "linear_class",
]

_EPS_ENUM_MAX = 20


# -- sums ----------------------------------------------------------------------

def _integer_q(name: str, q: float, minimum: int = 2) -> None:
    if q != int(q) or q < minimum:
        raise ValueError(f"{name} needs an integer q >= {minimum}, got {q}")


def khinchine_bound(a: Sequence[float], q: float) -> list[BoundResult]:
    """Bounds on ``||Z_+||_q`` and ``||Z||_q`` for ``Z = sum a_i X_i``, Rademacher X."""
    a = np.abs(np.asarray(a, dtype=float))
    if a.size == 0:
        raise ValueError("weight vector is empty")
    _integer_q("thm7", q)
    norm_a = math.sqrt(math.fsum(a * a))
    core = math.sqrt(2.0 * K * q) * norm_a
    consts = (("K", K),)
    return [
        BoundResult("thm7", q, core, consts, "upper_plus", "plus"),
        BoundResult("thm7", q, 2.0 ** (1.0 / q) * core, consts, "raw_norm", "norm"),
    ]


def marcinkiewicz_bound(q: float, norm_sumsq: float) -> BoundResult:
    """``||sum X_i||_q`` for centred X from ``||sum X_i^2||_{q/2}``."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    value = 2.0 ** (1.0 + 1.0 / q) * math.sqrt(2.0 * K * q) * math.sqrt(norm_sumsq)
    return BoundResult("thm7", q, value, (("K", K),), "raw_norm", "marcinkiewicz")


def sum_functional(weights: Sequence[float] | None = None, drop_term: bool = True) -> Functional:
    """``Z = sum a_i X_i`` with the drop-the-term reduction ``Z_i = sum_{j != i} a_j X_j``."""

    def func(c):
        a = np.ones(c.shape[1]) if weights is None else np.asarray(weights, dtype=float)
        return (c * a).sum(axis=1)

    def rule(c, i):
        a = np.ones(c.shape[1]) if weights is None else np.asarray(weights, dtype=float)
        kept = np.delete(c * a, i, axis=1)
        return kept.sum(axis=1)

    return Functional(func, Reduction.user(rule) if drop_term else Reduction(), "sum")


def sum_stats(space: ProductSpace, q: float, table: IncrementTable | None = None) -> dict:
    """Moments needed by the Rosenthal-type bounds for ``Z = sum X_i``."""
    means = [m.mean() for m in space.marginals]
    second = [m.second_moment() for m in space.marginals]
    t = table or IncrementTable.exact(space, sum_functional())
    x = t.configs
    max_x = x.max(axis=1)
    max_abs = np.abs(x).max(axis=1)
    return {
        "EZ": math.fsum(means),
        "sum_EX2": math.fsum(second),
        "sigma": math.sqrt(math.fsum(s - m * m for s, m in zip(second, means))),
        "norm_max_q": t.norm(max_x, q).value,
        "norm_Y_q": t.norm(max_abs, q).value,
    }


def rosenthal_bounds(kind: str, stats: dict, q: float, theta: float) -> list[BoundResult]:
    """Rosenthal-type bounds for sums of independent nonnegative or centred variables.

    ``nonneg_thm8`` needs ``EZ``, ``sum_EX2`` and ``norm_max_q`` (``||max X_i||_q``);
    ``centered_thm9`` needs ``sigma`` and ``norm_Y_q`` (``||max |X_i| ||_q``).
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    _integer_q(kind, q)
    if kind == "nonneg_thm8":
        ez, s2, w = stats["EZ"], stats["sum_EX2"], stats["norm_max_q"]
        kc = (("kappa", KAPPA),)
        return [
            BoundResult("thm8", q, math.sqrt(2.0 * KAPPA * q * w * ez) + KAPPA * q * w, kc, "upper_plus", "plus"),
            BoundResult("thm8", q, math.sqrt(K * q * s2), (("K", K),), "upper_minus", "minus"),
            BoundResult("thm8", q, (1.0 + theta) * ez + 0.5 * KAPPA * q * (1.0 + 1.0 / theta) * w, kc,
                        "raw_norm", "norm"),
        ]
    if kind == "centered_thm9":
        sigma, y = stats["sigma"], stats["norm_Y_q"]
        value = sigma * math.sqrt(2.0 * KAPPA * (2.0 + theta) * q) + q * KAPPA * math.sqrt(1.0 + 1.0 / theta) * y
        return [BoundResult("thm9", q, value, (("kappa", KAPPA),), "upper_plus", "plus")]
    raise ValueError(f"unknown Rosenthal kind {kind!r}")


# -- empirical processes ------------------------------------------------------------

@dataclass(frozen=True)
class FunctionClass:
    """``tables[k][i][a]`` is ``f_k`` evaluated at support value ``a`` of coordinate ``i``.

    ``absolute`` selects ``sup_f |sum f(X_i)|`` over ``sup_f sum f(X_i)``; it
    defaults to ``centered``.
    """

    tables: tuple[tuple[tuple[float, ...], ...], ...]
    centered: bool = False
    absolute: bool | None = None

    def __post_init__(self):
        if len(self.tables) == 0:
            raise ValueError("function class is empty")
        n = len(self.tables[0])
        if any(len(t) != n for t in self.tables):
            raise ValueError("every function needs a table for each coordinate")
        if self.absolute is None:
            object.__setattr__(self, "absolute", self.centered)

    @classmethod
    def from_arrays(cls, tables, centered: bool = False, absolute: bool | None = None) -> "FunctionClass":
        tup = tuple(tuple(tuple(float(v) for v in row) for row in f) for f in tables)
        return cls(tup, centered, absolute)

    @property
    def size(self) -> int:
        return len(self.tables)

    @property
    def n(self) -> int:
        return len(self.tables[0])

    def validate(self, space: ProductSpace) -> None:
        if self.n != space.n:
            raise ValueError(f"class is defined on {self.n} coordinates, space has {space.n}")
        for k, f in enumerate(self.tables):
            for i, (row, m) in enumerate(zip(f, space.marginals)):
                if not m.is_finite:
                    raise ValueError("function classes need finite marginals")
                if len(row) != m.size:
                    raise ValueError(f"f_{k} at coordinate {i}: {len(row)} values for a support of size {m.size}")
                if self.centered:
                    mean = math.fsum(v * p for v, p in zip(row, m.probabilities))
                    if abs(mean) > 1e-10:
                        raise ValueError(f"f_{k} is not centred at coordinate {i} (mean {mean:g})")

    def values(self, space: ProductSpace, configs: np.ndarray) -> np.ndarray:
        """``f_k(X_i)`` as an array of shape ``(N, |F|, n)``."""
        configs = np.atleast_2d(configs)
        out = np.empty((configs.shape[0], self.size, self.n))
        for i, m in enumerate(space.marginals):
            support = m.values()
            order = np.argsort(support)
            pos = np.searchsorted(support[order], configs[:, i])
            pos = np.minimum(pos, support.size - 1)
            idx = order[pos]
            if not np.array_equal(support[idx], configs[:, i]):
                raise ValueError(f"coordinate {i} holds values outside its support")
            for k in range(self.size):
                out[:, k, i] = np.asarray(self.tables[k][i])[idx]
        return out

    def second_moments(self, space: ProductSpace) -> np.ndarray:
        """``E[f_k(X_i)^2]``, shape ``(|F|, n)``."""
        out = np.empty((self.size, self.n))
        for k, f in enumerate(self.tables):
            for i, (row, m) in enumerate(zip(f, space.marginals)):
                out[k, i] = math.fsum(v * v * p for v, p in zip(row, m.probabilities))
        return out


def linear_class(vectors: Sequence[Sequence[float]], space: ProductSpace) -> FunctionClass:
    """``f_t(X_i) = t_i X_i`` — the class behind ``sup_t sum t_i X_i``."""
    tables = []
    for t in vectors:
        tables.append([[ti * x for x in m.support] for ti, m in zip(t, space.marginals)])
    centered = all(abs(m.mean()) < 1e-12 for m in space.marginals)
    return FunctionClass.from_arrays(tables, centered=centered, absolute=False)


def _sup_sum(vals: np.ndarray, absolute: bool) -> np.ndarray:
    s = vals.sum(axis=2)
    return (np.abs(s) if absolute else s).max(axis=1)


def ep_values(space: ProductSpace, fc: FunctionClass, configs: np.ndarray) -> np.ndarray:
    return _sup_sum(fc.values(space, configs), fc.absolute)


def ep_functional(space: ProductSpace, fc: FunctionClass) -> Functional:
    """``Z`` with the drop-the-term reduction ``Z_i = sup_f |sum_{j != i} f(X_j)|``."""
    fc.validate(space)

    def func(c):
        return _sup_sum(fc.values(space, c), fc.absolute)

    def rule(c, i):
        vals = fc.values(space, c)
        vals[:, :, i] = 0.0
        return _sup_sum(vals, fc.absolute)

    return Functional(func, Reduction.user(rule), "ep_sup")


@dataclass(frozen=True)
class EPStats:
    sigma2: float
    Sigma2: float
    EZ: float
    M_norms: dict = field(default_factory=dict)
    sup_single_l2: float = 0.0
    EM2: float = 0.0
    method: str = "exact"
    halfwidths: dict = field(default_factory=dict)


def ep_stats(space: ProductSpace, fc: FunctionClass, mode="exact", qs: Sequence[float] = (2.0,),
             table: IncrementTable | None = None) -> EPStats:
    """Weak/strong variance, ``E[Z]`` and norms of ``M = sup_{i,f} |f(X_i)|``.

    ``mode`` is ``"exact"`` or ``("mc", seed, count)``.
    """
    fc.validate(space)
    f = ep_functional(space, fc)
    if table is None:
        if mode == "exact":
            table = IncrementTable.exact(space, f)
        else:
            _, seed, count = mode
            table = IncrementTable.sampled(space, f, seed, count)
    sq = fc.second_moments(space)
    sigma2 = float(max(math.fsum(row) for row in sq))
    vals = fc.values(space, table.configs)
    strong = (vals ** 2).sum(axis=2).max(axis=1)
    m = np.abs(vals).max(axis=(1, 2))
    s2 = table.expect(strong)
    ez = table.ez
    em2 = table.expect(m * m)
    norms = {}
    hw = {"Sigma2": s2.halfwidth, "EZ": ez.halfwidth, "EM2": em2.halfwidth}
    for q in qs:
        est = table.norm(m, q)
        norms[float(q)] = est.value
        hw[f"M_{float(q):g}"] = est.ci_halfwidth
    return EPStats(sigma2, s2.value, ez.value, norms, math.sqrt(float(sq.max())), em2.value,
                   table.method, hw)


def ep_bounds(stats: EPStats, q: float, which: str, theta: float | None = None) -> BoundResult:
    """``thm10_plus``, ``thm10_minus``, ``thm11``, ``thm12_first`` or ``thm12_second``.

    For ``thm10_*`` the class must be linear in Rademacher variables, so that
    ``sigma = sup_t ||t||_2`` and ``sup_single_l2 = sup_{i,t} |t_i|``.
    """
    q = float(q)
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    mq = stats.M_norms.get(q)
    sigma = math.sqrt(stats.sigma2)
    if which == "thm10_plus":
        _integer_q("thm10", q)
        return BoundResult("thm10", q, math.sqrt(2.0 * K * q) * sigma, (("K", K),), "upper_plus", "plus")
    if which == "thm10_minus":
        _integer_q("thm10", q)
        c1 = constant("C1").value
        value = max(math.sqrt(2.0 * c1 * q) * sigma, 2.0 * math.sqrt(c1 * q) * stats.sup_single_l2)
        return BoundResult("thm10", q, value, (("C1", c1),), "upper_minus", "minus")
    if mq is None:
        raise ValueError(f"stats carry no ||M||_q for q={q}")
    if which == "thm11":
        if theta is None or not 0.0 < theta <= 1.0:
            raise ValueError(f"thm11 needs theta in (0, 1], got {theta}")
        value = (1.0 + theta) * stats.EZ + 0.5 * KAPPA * q * (1.0 + 1.0 / theta) * mq
        return BoundResult("thm11", q, value, (("kappa", KAPPA),), "raw_norm", "norm")
    if which == "thm12_first":
        value = math.sqrt(2.0 * KAPPA * q) * (math.sqrt(stats.Sigma2) + sigma) + \
            2.0 * KAPPA * q * (mq + stats.sup_single_l2)
        return BoundResult("thm12", q, value, (("kappa", KAPPA),), "upper_plus", "first")
    if which == "thm12_second":
        value = 2.0 * stats.EZ + 2.0 * sigma * math.sqrt(2.0 * KAPPA * q) + 20.0 * KAPPA * q * mq + \
            4.0 * math.sqrt(KAPPA * q) * math.sqrt(stats.EM2)
        return BoundResult("thm12", q, value, (("kappa", KAPPA),), "raw_norm", "second")
    raise ValueError(f"unknown empirical-process bound {which!r}")


def lemma7_check(stats: EPStats, EM2: float | None = None) -> tuple[float, float]:
    """``(Sigma^2, sigma^2 + 32 sqrt(E M^2) E Z + 8 E M^2)``."""
    em2 = stats.EM2 if EM2 is None else EM2
    return stats.Sigma2, stats.sigma2 + 32.0 * math.sqrt(em2) * stats.EZ + 8.0 * em2


def _sign_patterns(n: int) -> np.ndarray:
    if n > _EPS_ENUM_MAX:
        raise ValueError(f"exact sign enumeration limited to n <= {_EPS_ENUM_MAX}")
    return np.array(list(itertools.product((-1.0, 1.0), repeat=n)))


def _rademacher_average(vals: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """``E_eps sup_k |sum_i eps_i vals[:, k, i]|`` for each row; exact sign average."""
    out = np.empty(vals.shape[0])
    for r in range(vals.shape[0]):
        # explicit broadcast-sum (no BLAS) keeps results independent of thread count
        s = (signs[:, None, :] * vals[r][None, :, :]).sum(axis=2)
        out[r] = math.fsum(np.abs(s).max(axis=1)) / signs.shape[0]
    return out


def lemma8_check(space: ProductSpace, fc: FunctionClass, lam: float, mode="exact") -> tuple[float, float]:
    """Truncated symmetrised square sum versus ``E[M^2] / (1 - 2/sqrt(lambda))^2``.

    The indicator is taken per coordinate: ``1{sup_f |f(X_i)| > t_0}``.
    """
    if not lam > 4:
        raise ValueError(f"lambda must exceed 4, got {lam}")
    fc.validate(space)
    if mode == "exact":
        configs, weights = space.grid()
    else:
        _, seed, count = mode
        configs, weights = space.sample(seed, count), None
    vals = fc.values(space, configs)
    m = np.abs(vals).max(axis=(1, 2))

    def mean(x):
        return math.fsum(x * weights) if weights is not None else math.fsum(x) / x.size

    em2 = mean(m * m)
    t0 = math.sqrt(lam * em2)
    big = np.abs(vals).max(axis=1) > t0  # (N, n)
    g = vals ** 2 * big[:, None, :]
    lhs = mean(_rademacher_average(g, _sign_patterns(space.n)))
    rhs = em2 / (1.0 - 2.0 / math.sqrt(lam)) ** 2
    return lhs, rhs


# -- conditional Rademacher averages ------------------------------------------------

def conditional_rademacher(space: ProductSpace, fc: FunctionClass, config, inner_mode="exact") -> float:
    """``E_eps sup_f |sum eps_i f(x_i)|`` at one configuration."""
    vals = fc.values(space, np.asarray(config, dtype=float).reshape(1, -1))
    if inner_mode == "exact":
        return float(_rademacher_average(vals, _sign_patterns(space.n))[0])
    _, seed, count = inner_mode
    signs = rademacher(space.n).sample(seed, count)
    return float(_rademacher_average(vals, signs)[0])


def cond_rademacher_functional(space: ProductSpace, fc: FunctionClass) -> Functional:
    """``Z`` as a functional of the data, with ``Z_i`` dropping the i-th summand."""
    signs = _sign_patterns(space.n)

    def func(c):
        return _rademacher_average(fc.values(space, c), signs)

    def rule(c, i):
        vals = fc.values(space, c)
        vals[:, :, i] = 0.0
        return _rademacher_average(vals, signs)

    return Functional(func, Reduction.user(rule), "cond_rademacher")


def thm13_bounds(EZ: float, norm_M_q: float, q: float) -> tuple[BoundResult, BoundResult]:
    """Upper and lower moment bounds with ``M = sup_{i,f} |f(X_i)|``."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    upper = math.sqrt(2.0 * KAPPA * q * norm_M_q * EZ) + KAPPA * q * norm_M_q
    c2 = constant("C2").value
    lower = math.sqrt(2.0 * c2) * (math.sqrt(q * norm_M_q * EZ) + 2.0 * q * norm_M_q)
    return (BoundResult("thm13", q, upper, (("kappa", KAPPA),), "upper_plus", "plus"),
            BoundResult("thm13", q, lower, (("C2", c2),), "upper_minus", "minus"))
