"""Product distributions of independent coordinates.

A :class:`ProductSpace` is an ordered tuple of :class:`Marginal` objects.
Finite spaces can be enumerated exactly; every space can be sampled through a
counter-keyed generator, so draw ``(sample j, coordinate i)`` does not depend
on how the sample range is chunked.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import ndtri

__all__ = [
    "Marginal",
    "ProductSpace",
    "EnumerationUnavailable",
    "build_space",
    "rademacher",
    "bernoulli",
    "enumerate_outcomes",
    "sample_outcomes",
    "keyed_uniforms",
    "derive_seed",
    "DEFAULT_ENUMERATION_CAP",
    "CAP_ENV_VAR",
]

DEFAULT_ENUMERATION_CAP = 2**24
CAP_ENV_VAR = "MOMENTBOUNDS_ENUMERATION_CAP"

_SAMPLERS = {"uniform": 2, "gaussian": 2}


class EnumerationUnavailable(RuntimeError):
    """Exact enumeration was requested on a space that does not allow it."""

    def __init__(self, message: str, size: float | None = None):
        super().__init__(message)
        self.size = size


def _default_cap() -> int:
    raw = os.environ.get(CAP_ENV_VAR)
    if raw is None:
        return DEFAULT_ENUMERATION_CAP
    try:
        return int(float(raw))
    except ValueError as exc:
        raise ValueError(f"{CAP_ENV_VAR} must be an integer, got {raw!r}") from exc


@dataclass(frozen=True)
class Marginal:
    """One coordinate's law: a finite table, or a named sampler family."""

    kind: str
    support: tuple[float, ...] = ()
    probabilities: tuple[float, ...] = ()
    sampler: str | None = None
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "finite":
            if len(self.support) == 0 or len(self.support) != len(self.probabilities):
                raise ValueError("finite marginal needs matching, nonempty support and probabilities")
            if len(set(self.support)) != len(self.support):
                raise ValueError(f"support values must be distinct: {self.support}")
            if any(not math.isfinite(v) for v in self.support):
                raise ValueError("support values must be finite")
            if any(p < 0 for p in self.probabilities):
                raise ValueError("probabilities must be nonnegative")
            if abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
                raise ValueError(f"probabilities sum to {math.fsum(self.probabilities)!r}, not 1")
        elif self.kind == "sampler":
            if self.sampler not in _SAMPLERS:
                raise ValueError(f"unknown sampler family {self.sampler!r}")
            if len(self.params) != _SAMPLERS[self.sampler]:
                raise ValueError(f"{self.sampler} takes {_SAMPLERS[self.sampler]} parameters")
            a, b = self.params
            if self.sampler == "uniform" and not a < b:
                raise ValueError("uniform(a, b) requires a < b")
            if self.sampler == "gaussian" and not b > 0:
                raise ValueError("gaussian(mu, sigma) requires sigma > 0")
        else:
            raise ValueError(f"marginal kind must be 'finite' or 'sampler', got {self.kind!r}")

    @classmethod
    def finite(cls, support: Sequence[float], probabilities: Sequence[float] | None = None) -> "Marginal":
        support = tuple(float(v) for v in support)
        if probabilities is None:
            probabilities = [1.0 / len(support)] * len(support)
        return cls("finite", support, tuple(float(p) for p in probabilities))

    @classmethod
    def uniform(cls, a: float, b: float) -> "Marginal":
        return cls("sampler", sampler="uniform", params=(float(a), float(b)))

    @classmethod
    def gaussian(cls, mu: float, sigma: float) -> "Marginal":
        return cls("sampler", sampler="gaussian", params=(float(mu), float(sigma)))

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def size(self) -> int:
        return len(self.support)

    def values(self) -> np.ndarray:
        return np.asarray(self.support, dtype=float)

    def weights(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float)

    def mean(self) -> float:
        if self.is_finite:
            return math.fsum(v * p for v, p in zip(self.support, self.probabilities))
        a, b = self.params
        return 0.5 * (a + b) if self.sampler == "uniform" else a

    def second_moment(self) -> float:
        if self.is_finite:
            return math.fsum(v * v * p for v, p in zip(self.support, self.probabilities))
        a, b = self.params
        if self.sampler == "uniform":
            return (a * a + a * b + b * b) / 3.0
        return a * a + b * b

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on [0, 1) to draws from this marginal."""
        if self.is_finite:
            cdf = np.cumsum(self.weights())
            cdf[-1] = 1.0
            idx = np.searchsorted(cdf, u, side="right")
            return self.values()[np.minimum(idx, self.size - 1)]
        a, b = self.params
        if self.sampler == "uniform":
            return a + (b - a) * u
        # open interval for the inverse normal cdf
        return a + b * ndtri((u * (1.0 - 2.0**-52)) + 2.0**-54)


@dataclass(frozen=True)
class ProductSpace:
    marginals: tuple[Marginal, ...]
    enumeration_cap: int = field(default_factory=_default_cap)

    def __post_init__(self):
        if len(self.marginals) == 0:
            raise ValueError("a product space needs at least one coordinate")

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def is_finite(self) -> bool:
        return all(m.is_finite for m in self.marginals)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(m.size for m in self.marginals)

    @property
    def outcome_count(self) -> float:
        """Number of configurations (``inf`` if any marginal is a sampler)."""
        if not self.is_finite:
            return math.inf
        return math.prod(self.shape)

    @property
    def can_enumerate(self) -> bool:
        return self.is_finite and self.outcome_count <= self.enumeration_cap

    def with_cap(self, cap: int) -> "ProductSpace":
        return ProductSpace(self.marginals, int(cap))

    def check_enumerable(self) -> None:
        if not self.is_finite:
            bad = [i for i, m in enumerate(self.marginals) if not m.is_finite]
            raise EnumerationUnavailable(
                f"exact enumeration needs finite marginals; coordinates {bad} are samplers"
            )
        size = self.outcome_count
        if size > self.enumeration_cap:
            raise EnumerationUnavailable(
                f"space has {size} configurations, above the enumeration cap {self.enumeration_cap}",
                size=size,
            )

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """All configurations in row-major order, and their probabilities.

        Returns ``(configs, weights)`` with shapes ``(N, n)`` and ``(N,)``.
        The last coordinate varies fastest, matching ``itertools.product``.
        """
        self.check_enumerable()
        idx = np.indices(self.shape).reshape(self.n, -1).T
        configs = np.empty(idx.shape, dtype=float)
        weights = np.ones(idx.shape[0], dtype=float)
        for i, m in enumerate(self.marginals):
            configs[:, i] = m.values()[idx[:, i]]
            weights *= m.weights()[idx[:, i]]
        return configs, weights

    def sample(self, seed: int, count: int, start: int = 0) -> np.ndarray:
        """Samples ``start .. start+count-1`` as an ``(count, n)`` array."""
        if count < 1:
            raise ValueError("count must be at least 1")
        j = np.arange(start, start + count, dtype=np.uint64)
        out = np.empty((count, self.n), dtype=float)
        for i, m in enumerate(self.marginals):
            out[:, i] = m.transform(keyed_uniforms(seed, j, i))
        return out


def build_space(marginals: Sequence[Marginal], enumeration_cap: int | None = None) -> ProductSpace:
    marginals = tuple(marginals)
    if not marginals:
        raise ValueError("build_space needs a nonempty list of marginals")
    for m in marginals:
        if not isinstance(m, Marginal):
            raise TypeError(f"expected Marginal, got {type(m).__name__}")
    if enumeration_cap is None:
        return ProductSpace(marginals)
    return ProductSpace(marginals, int(enumeration_cap))


def rademacher(n: int, **kw) -> ProductSpace:
    return build_space([Marginal.finite((-1.0, 1.0), (0.5, 0.5))] * n, **kw)


def bernoulli(n: int, p: float, **kw) -> ProductSpace:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"bernoulli parameter must lie in [0, 1], got {p}")
    return build_space([Marginal.finite((0.0, 1.0), (1.0 - p, p))] * n, **kw)


def enumerate_outcomes(space: ProductSpace) -> Iterator[tuple[tuple[float, ...], float]]:
    """Yield ``(configuration, probability)`` for every configuration once."""
    space.check_enumerable()
    tables = [list(zip(m.support, m.probabilities)) for m in space.marginals]
    for combo in itertools.product(*tables):
        w = 1.0
        for _, p in combo:
            w *= p
        yield tuple(v for v, _ in combo), w


def sample_outcomes(space: ProductSpace, seed: int, count: int) -> Iterator[tuple[float, ...]]:
    chunk = 4096
    for start in range(0, count, chunk):
        block = space.sample(seed, min(chunk, count - start), start=start)
        for row in block:
            yield tuple(row)


# -- counter-keyed uniforms -------------------------------------------------

def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def keyed_uniforms(seed: int, sample_index, coordinate: int, stream: int = 0) -> np.ndarray:
    """Uniforms on [0, 1) that are a pure function of (seed, sample, coordinate, stream)."""
    j = np.atleast_1d(np.asarray(sample_index, dtype=np.uint64))
    golden = np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + golden)
        key = _mix64(key ^ (np.uint64(coordinate) * np.uint64(0xD1B54A32D192ED03) + np.uint64(stream)))
        h = _mix64(key + j * golden)
        h = _mix64(h ^ key)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_seed(seed: int, tag: int) -> int:
    """An independent 64-bit seed for an auxiliary stream (EZ pass, inner draws)."""
    with np.errstate(over="ignore"):
        z = _mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64) ^ _mix64(np.array([tag], dtype=np.uint64)))
    return int(z[0])
