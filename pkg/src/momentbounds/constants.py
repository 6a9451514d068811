"""Named numerical constants used by the moment bounds.

Closed-form constants are evaluated in 40-digit arithmetic and enclosed
between the neighbouring doubles.  Root-defined constants are located by
bisection whose sign tests are also done in high precision, so the returned
bracket is a genuine enclosure of the root.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath

__all__ = [
    "ConstantValue",
    "constant",
    "all_constants",
    "kappa_q",
    "lemma6_x",
    "KAPPA",
    "K",
    "CONSTANT_NAMES",
]

CONSTANT_NAMES = ("kappa", "K", "C1", "C2", "cor1_C")

_DPS = 40
_BRACKET = (1e-3, 64.0)
_WIDTH_TOL = 1e-12


@dataclass(frozen=True)
class ConstantValue:
    name: str
    value: float
    enclosure_low: float
    enclosure_high: float
    method: str  # "closed_form" or "bisection"
    residual: float = 0.0

    def __float__(self) -> float:
        return self.value


def _theorem4_residual(a: int):
    # e^{-1/2} + e^{1/sqrt(x)} / (a x) - 1, strictly decreasing on (0, inf)
    def f(x):
        x = mpmath.mpf(x)
        return mpmath.exp(-0.5) + mpmath.exp(1 / mpmath.sqrt(x)) / (a * x) - 1

    return f


def _cor1_residual(x):
    x = mpmath.mpf(x)
    return mpmath.exp(-0.5) + mpmath.exp(-1 + 1 / x) / (2 * x) - 1


_RESIDUALS = {
    "C1": _theorem4_residual(1),
    "C2": _theorem4_residual(2),
    "cor1_C": _cor1_residual,
}


def _bisect_decreasing(f, lo: float, hi: float) -> tuple[float, float]:
    """Bracket the unique zero of a decreasing function, expanding as needed."""
    with mpmath.workdps(_DPS):
        while f(lo) <= 0:
            lo /= 2.0
        while f(hi) >= 0:
            hi *= 2.0
        while hi - lo > _WIDTH_TOL:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
    return lo, hi


def _closed_form(name: str) -> mpmath.mpf:
    e = mpmath.e
    if name == "kappa":
        return mpmath.sqrt(e) / (2 * (mpmath.sqrt(e) - 1))
    if name == "K":
        return 1 / (e - mpmath.sqrt(e))
    raise KeyError(name)


@functools.lru_cache(maxsize=None)
def constant(name: str) -> ConstantValue:
    """Return the named constant with a certified enclosure.

    Known names: ``kappa``, ``K``, ``C1``, ``C2``, ``cor1_C``.
    """
    if name not in CONSTANT_NAMES:
        raise ValueError(f"unknown constant {name!r}; expected one of {CONSTANT_NAMES}")
    if name in ("kappa", "K"):
        with mpmath.workdps(_DPS):
            exact = _closed_form(name)
            value = float(exact)
            low = value if mpmath.mpf(value) <= exact else math.nextafter(value, -math.inf)
            high = value if mpmath.mpf(value) >= exact else math.nextafter(value, math.inf)
        return ConstantValue(name, value, low, high, "closed_form")

    f = _RESIDUALS[name]
    lo, hi = _bisect_decreasing(f, *_BRACKET)
    value = 0.5 * (lo + hi)
    with mpmath.workdps(_DPS):
        residual = float(abs(f(value)))
    return ConstantValue(name, value, lo, hi, "bisection", residual)


def all_constants() -> list[ConstantValue]:
    return [constant(name) for name in CONSTANT_NAMES]


KAPPA = constant("kappa").value
K = constant("K").value


def kappa_q(q: float) -> float:
    """kappa_q = 1/2 (1 - (1 - 1/q)^{q/2})^{-1} for q >= 2, and 1 on [1, 2].

    Nondecreasing in q with limit ``KAPPA``.
    """
    q = float(q)
    if not q >= 1.0:
        raise ValueError(f"kappa_q requires q >= 1, got {q}")
    if q <= 2.0:
        return 1.0
    return 0.5 / (1.0 - (1.0 - 1.0 / q) ** (q / 2.0))


def lemma6_x(q: int) -> float:
    """The sequence ((q-1)/q)^{q/2} (1 + (1/K) ((q-2)/(q-1))^{(q-2)/2}), q >= 4.

    Bounded by 1 and tends to 1.  Evaluated in log space so that very large
    ``q`` does not lose the approach to the limit.
    """
    if int(q) != q or q < 4:
        raise ValueError(f"lemma6_x requires an integer q >= 4, got {q}")
    q = int(q)
    first = math.exp(0.5 * q * math.log1p(-1.0 / q))
    second = math.exp(0.5 * (q - 2) * math.log1p(-1.0 / (q - 1)))
    return first * (1.0 + second / K)
