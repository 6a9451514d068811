"""Increment statistics of a functional Z = F(X_1, ..., X_n).

For every configuration we compute

* ``V+ = E[sum_i (Z - Z'_i)_+^2 | X]`` and ``V-`` (resampled increments),
* ``V = sum_i (Z - Z_i)^2`` for a coordinate-reduction rule ``Z_i = F_i(X^(i))``,
* the two flavours of the maximal increment ``M``.

Exact mode enumerates the whole product space and resums coordinate ``i``
over its support; Monte Carlo mode draws outer samples through the
counter-keyed generator and resums finite coordinates exactly (sampler
coordinates use an inner resampling budget).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .product_space import EnumerationUnavailable, ProductSpace, derive_seed, keyed_uniforms

__all__ = [
    "Reduction",
    "Functional",
    "IncrementProfile",
    "Estimate",
    "MomentEstimate",
    "IncrementTable",
    "profile_at",
    "exact_norm",
    "mc_norm",
    "efron_stein_gap",
    "QUANTITIES",
    "Z_CRIT",
]

# two-sided 99.9% normal quantile
Z_CRIT = 3.2905267314918945

QUANTITIES = ("z", "z_centered", "z_plus", "z_minus", "v_plus", "v_minus", "v", "m_resample", "m_reduction")

ReductionRule = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class Reduction:
    """How ``Z_i`` is formed from the configuration with coordinate ``i`` removed.

    ``drop_to_infimum``: ``Z_i = min_x F(X with X_i = x)`` over the support.
    ``baseline``: ``Z_i = F(X with X_i = baseline[i])``.
    ``user_supplied``: ``Z_i = rule(configs, i)``; must ignore column ``i``.
    """

    kind: str = "drop_to_infimum"
    baseline: tuple[float, ...] | None = None
    rule: ReductionRule | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("drop_to_infimum", "baseline", "user_supplied"):
            raise ValueError(f"unknown reduction kind {self.kind!r}")
        if self.kind == "baseline" and self.baseline is None:
            raise ValueError("baseline reduction needs one value per coordinate")
        if self.kind == "user_supplied" and self.rule is None:
            raise ValueError("user_supplied reduction needs a rule")

    @classmethod
    def infimum(cls) -> "Reduction":
        return cls("drop_to_infimum")

    @classmethod
    def at_baseline(cls, values) -> "Reduction":
        return cls("baseline", baseline=tuple(float(v) for v in values))

    @classmethod
    def user(cls, rule: ReductionRule) -> "Reduction":
        return cls("user_supplied", rule=rule)


@dataclass(frozen=True)
class Functional:
    """A vectorised map ``(N, n) -> (N,)`` together with its reduction rule."""

    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    reduction: Reduction = field(default_factory=Reduction)
    name: str = "F"

    @classmethod
    def pointwise(cls, fn: Callable[[np.ndarray], float], reduction: Reduction | None = None, name: str = "F"):
        """Wrap a scalar function of one configuration (slow, but convenient)."""

        def func(configs):
            return np.array([fn(row) for row in configs], dtype=float)

        return cls(func, reduction or Reduction(), name)

    def evaluate(self, configs: np.ndarray) -> np.ndarray:
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        out = np.asarray(self.func(configs), dtype=float).reshape(-1)
        if out.shape[0] != configs.shape[0]:
            raise ValueError(f"{self.name}: expected {configs.shape[0]} values, got {out.shape[0]}")
        return out

    def with_reduction(self, reduction: Reduction) -> "Functional":
        return Functional(self.func, reduction, self.name)


@dataclass(frozen=True)
class IncrementProfile:
    z: float
    v_plus: float
    v_minus: float
    v: float
    m: float
    m_flavor: str = "resample"


@dataclass(frozen=True)
class Estimate:
    """A scalar expectation with its 99.9% CI half-width (0 when exact)."""

    value: float
    halfwidth: float = 0.0

    @property
    def lower(self) -> float:
        return self.value - self.halfwidth

    @property
    def upper(self) -> float:
        return self.value + self.halfwidth


@dataclass(frozen=True)
class MomentEstimate:
    q: float
    value: float
    method: str
    samples: int = 0
    ci_halfwidth: float = 0.0

    @property
    def lower(self) -> float:
        return max(self.value - self.ci_halfwidth, 0.0)

    @property
    def upper(self) -> float:
        return self.value + self.ci_halfwidth


def _fsum_dot(values: np.ndarray, weights: np.ndarray) -> float:
    # exactly rounded, hence independent of any evaluation order
    return math.fsum(np.asarray(values, dtype=float) * weights)


def _positive(x):
    return np.maximum(x, 0.0)


class IncrementTable:
    """Lazily computed per-configuration statistics over a set of configurations.

    ``method == "exact"``: the configurations are the full grid, weighted by
    their probabilities.  ``method == "mc"``: i.i.d. samples with equal weight.
    ``method == "pointwise"``: arbitrary configurations, no expectations.
    """

    def __init__(self, space: ProductSpace, f: Functional, configs: np.ndarray, weights=None, *,
                 method: str = "exact", seed: int | None = None, inner: int = 64):
        self.space = space
        self.f = f
        self.configs = np.atleast_2d(np.asarray(configs, dtype=float))
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.method = method
        self.seed = seed
        self.inner = int(inner)
        self._is_grid = method == "exact"
        if f.reduction.kind == "drop_to_infimum":
            bad = [i for i, m in enumerate(space.marginals) if not m.is_finite]
            if bad:
                raise ValueError(f"drop_to_infimum needs finite marginals; coordinates {bad} are samplers")
        if f.reduction.kind == "baseline" and len(f.reduction.baseline) != space.n:
            raise ValueError("baseline reduction needs one value per coordinate")

    # -- constructors ------------------------------------------------------
    @classmethod
    def exact(cls, space: ProductSpace, f: Functional) -> "IncrementTable":
        configs, weights = space.grid()
        return cls(space, f, configs, weights, method="exact")

    @classmethod
    def sampled(cls, space: ProductSpace, f: Functional, seed: int, count: int, inner: int = 64) -> "IncrementTable":
        if count < 100:
            raise ValueError(f"Monte Carlo estimation needs count >= 100, got {count}")
        return cls(space, f, space.sample(seed, count), None, method="mc", seed=seed, inner=inner)

    @classmethod
    def at(cls, space: ProductSpace, f: Functional, configs) -> "IncrementTable":
        if not space.is_finite:
            raise EnumerationUnavailable("exact conditional expectations need finite marginals")
        return cls(space, f, configs, None, method="pointwise")

    @property
    def size(self) -> int:
        return self.configs.shape[0]

    # -- primary values ------------------------------------------------------
    @functools.cached_property
    def z(self) -> np.ndarray:
        return self.f.evaluate(self.configs)

    def _replaced(self, i: int, value) -> np.ndarray:
        c = self.configs.copy()
        c[:, i] = value
        return self.f.evaluate(c)

    def _support_slices(self, i: int):
        """Yield ``(p, Z with coordinate i set to support value a)`` for every atom."""
        m = self.space.marginals[i]
        if self._is_grid:
            zt = self.z.reshape(self.space.shape)
            for a, p in enumerate(m.probabilities):
                if p > 0:
                    sl = np.take(zt, [a], axis=i)
                    yield p, np.broadcast_to(sl, zt.shape).reshape(-1)
        elif m.is_finite:
            for x, p in zip(m.support, m.probabilities):
                if p > 0:
                    yield p, self._replaced(i, x)
        else:
            # sampler coordinate: inner resampling draws keyed by (outer sample, r)
            inner_seed = derive_seed(self.seed or 0, 2)
            base = np.arange(self.size, dtype=np.uint64) * np.uint64(self.inner)
            for r in range(self.inner):
                x = m.transform(keyed_uniforms(inner_seed, base + np.uint64(r), i))
                yield 1.0 / self.inner, self._replaced(i, x)

    @functools.cached_property
    def _resample(self) -> dict:
        z = self.z
        vp = np.zeros_like(z)
        vm = np.zeros_like(z)
        mr = np.zeros_like(z)
        zr_min = z.copy()
        for i in range(self.space.n):
            for p, zr in self._support_slices(i):
                d = z - zr
                vp += p * _positive(d) ** 2
                vm += p * _positive(-d) ** 2
                np.maximum(mr, d, out=mr)
                np.minimum(zr_min, zr, out=zr_min)
        return {"v_plus": vp, "v_minus": vm, "m_resample": mr, "resample_min": zr_min}

    def reduced(self, i: int) -> np.ndarray:
        """``Z_i`` for every configuration."""
        red = self.f.reduction
        if red.kind == "drop_to_infimum":
            out = None
            for _, zr in self._support_slices(i):
                out = zr.copy() if out is None else np.minimum(out, zr)
            return out
        if red.kind == "baseline":
            return self._replaced(i, red.baseline[i])
        return np.asarray(red.rule(self.configs, i), dtype=float).reshape(-1)

    @functools.cached_property
    def _reduction(self) -> dict:
        z = self.z
        v = np.zeros_like(z)
        m_red = np.full_like(z, -np.inf)
        inc_min = np.full_like(z, np.inf)
        inc_sum = np.zeros_like(z)
        zi_min = np.full_like(z, np.inf)
        zi_nonneg = np.ones(z.shape, dtype=bool)
        for i in range(self.space.n):
            zi = self.reduced(i)
            d = z - zi
            v += d * d
            np.maximum(m_red, d, out=m_red)
            np.minimum(inc_min, d, out=inc_min)
            inc_sum += d
            np.minimum(zi_min, zi, out=zi_min)
            zi_nonneg &= zi >= 0
        return {"v": v, "m_reduction": m_red, "increment_min": inc_min, "increment_sum": inc_sum,
                "zi_min": zi_min, "zi_nonneg": zi_nonneg}

    def __getattr__(self, name):
        # expose the lazily computed arrays as attributes
        if name in ("v_plus", "v_minus", "m_resample", "resample_min"):
            return self._resample[name]
        if name in ("v", "m_reduction", "increment_min", "increment_sum", "zi_min", "zi_nonneg"):
            return self._reduction[name]
        raise AttributeError(name)

    def reduction_below(self, tol: float = 0.0) -> bool:
        """True when ``Z_i <= Z`` on every configuration of positive weight."""
        return bool(np.all(self.on_support(self.increment_min) >= -tol))

    def on_support(self, values: np.ndarray) -> np.ndarray:
        if self.weights is None:
            return values
        return values[self.weights > 0]

    def ess_sup(self, values: np.ndarray) -> float:
        return float(np.max(self.on_support(values)))

    def ess_inf(self, values: np.ndarray) -> float:
        return float(np.min(self.on_support(values)))

    # -- expectations ----------------------------------------------------------
    def expect(self, values: np.ndarray) -> Estimate:
        values = np.asarray(values, dtype=float)
        if self.method == "exact":
            return Estimate(_fsum_dot(values, self.weights), 0.0)
        if self.method != "mc":
            raise ValueError("pointwise tables carry no expectation")
        n = values.shape[0]
        mean = math.fsum(values) / n
        var = math.fsum((values - mean) ** 2) / max(n - 1, 1)
        return Estimate(mean, Z_CRIT * math.sqrt(var / n))

    def conditional_mean(self, values: np.ndarray, i: int) -> np.ndarray:
        """``E[values | X^(i)]`` broadcast back to the grid (exact mode only)."""
        if not self._is_grid:
            raise ValueError("conditional means need the exact grid")
        shape = self.space.shape
        p = self.space.marginals[i].weights()
        vt = np.asarray(values, dtype=float).reshape(shape)
        pshape = [1] * len(shape)
        pshape[i] = shape[i]
        cm = np.sum(vt * p.reshape(pshape), axis=i, keepdims=True)
        return np.broadcast_to(cm, shape).reshape(-1)

    @functools.cached_property
    def ez(self) -> Estimate:
        """E[Z]; Monte Carlo uses a dedicated pass with 4x the sample budget."""
        if self.method != "mc":
            return self.expect(self.z)
        extra = self.space.sample(derive_seed(self.seed or 0, 1), 4 * self.size)
        return IncrementTable(self.space, self.f, extra, None, method="mc").expect(
            self.f.evaluate(extra))

    def quantity(self, name: str) -> np.ndarray:
        if name == "z":
            return self.z
        if name in ("z_centered", "z_plus", "z_minus"):
            c = self.z - self.ez.value
            return {"z_centered": c, "z_plus": _positive(c), "z_minus": _positive(-c)}[name]
        if name in QUANTITIES:
            return getattr(self, name)
        raise ValueError(f"unknown quantity {name!r}; expected one of {QUANTITIES}")

    def norm(self, values: Union[str, np.ndarray], q: float) -> MomentEstimate:
        """``||values||_q`` with a CI propagated through the 1/q power."""
        centered = isinstance(values, str) and values in ("z_centered", "z_plus", "z_minus")
        if isinstance(values, str):
            values = self.quantity(values)
        q = float(q)
        if not q > 0:
            raise ValueError(f"norm exponent must be positive, got {q}")
        powered = np.abs(values) ** q
        est = self.expect(powered)
        value = max(est.value, 0.0) ** (1.0 / q)
        if self.method == "exact":
            return MomentEstimate(q, value, "exact")
        hi = (est.value + est.halfwidth) ** (1.0 / q) - value
        lo = value - max(est.value - est.halfwidth, 0.0) ** (1.0 / q)
        hw = max(hi, lo)
        if centered:
            # ||(Z - a)_+||_q is 1-Lipschitz in a, so the centering error adds linearly
            hw += self.ez.halfwidth
        return MomentEstimate(q, value, "mc", self.size, hw)


def profile_at(space: ProductSpace, f: Functional, config, m_flavor: str = "resample") -> IncrementProfile:
    """Increment statistics at a single configuration, by exact resummation."""
    if m_flavor not in ("resample", "reduction"):
        raise ValueError("m_flavor must be 'resample' or 'reduction'")
    config = np.asarray(config, dtype=float).reshape(1, -1)
    if config.shape[1] != space.n:
        raise ValueError(f"configuration has {config.shape[1]} coordinates, space has {space.n}")
    t = IncrementTable.at(space, f, config)
    m = t.m_resample[0] if m_flavor == "resample" else max(t.m_reduction[0], 0.0)
    return IncrementProfile(float(t.z[0]), float(t.v_plus[0]), float(t.v_minus[0]), float(t.v[0]),
                            float(m), m_flavor)


def exact_norm(space: ProductSpace, f: Functional, quantity, q: float) -> MomentEstimate:
    """Exact ``||quantity||_q``; ``quantity`` is a name or a callable of the table."""
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    t = IncrementTable.exact(space, f)
    return t.norm(quantity(t) if callable(quantity) else quantity, q)


def mc_norm(space: ProductSpace, f: Functional, quantity, q: float, seed: int, count: int,
            inner: int = 64) -> MomentEstimate:
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    t = IncrementTable.sampled(space, f, seed, count, inner)
    return t.norm(quantity(t) if callable(quantity) else quantity, q)


def efron_stein_gap(space: ProductSpace, f: Functional) -> tuple[float, float, float]:
    """``(Var Z, 1/2 E sum (Z - Z'_i)^2, E sum (Z - Z_i)^2)`` by enumeration."""
    t = IncrementTable.exact(space, f)
    ez = t.ez.value
    var = t.expect((t.z - ez) ** 2).value
    es = 0.5 * (t.expect(t.v_plus).value + t.expect(t.v_minus).value)
    variant = t.expect(t.v).value
    return var, es, variant


def check_reduction(space: ProductSpace, f: Functional, configs: np.ndarray, rtol: float = 1e-12) -> None:
    """Spot-check that a user-supplied ``Z_i`` ignores coordinate ``i``."""
    red = f.reduction
    if red.kind != "user_supplied":
        return
    configs = np.atleast_2d(np.asarray(configs, dtype=float))[:64]
    for i, m in enumerate(space.marginals):
        base = np.asarray(red.rule(configs, i), dtype=float).reshape(-1)
        if m.is_finite:
            alternatives = m.support
        else:
            alternatives = m.transform(keyed_uniforms(0, np.arange(3, dtype=np.uint64), i))
        for x in alternatives:
            c = configs.copy()
            c[:, i] = x
            other = np.asarray(red.rule(c, i), dtype=float).reshape(-1)
            scale = max(1.0, float(np.max(np.abs(base), initial=0.0)))
            if np.max(np.abs(other - base), initial=0.0) > rtol * scale:
                raise ValueError(f"reduction rule for coordinate {i} depends on X_{i}")
