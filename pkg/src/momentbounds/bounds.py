"""Closed-form moment bounds for general functionals and tail bounds from moments.

Each bound is a function of a few scalar summaries (``BoundInputs``) of the
functional: norms of ``V+``, ``V-``, ``V``, of a maximal increment ``M``, of a
self-bounding coefficient ``W``, and ``E[Z]``.  The verification layer
computes those summaries exactly or by Monte Carlo and compares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .constants import KAPPA, K, constant, kappa_q

__all__ = [
    "BoundInputs",
    "BoundResult",
    "moment_bound",
    "moment_bounds",
    "tail_from_moments",
    "chaos_tail",
    "boolean_tail",
    "VARIANTS",
    "DEFAULT_Q_GRID",
]

DEFAULT_Q_GRID = tuple(2.0 + 0.5 * k for k in range(61))  # 2, 2.5, ..., 32

# theorem -> {variant: side}
VARIANTS = {
    "thm1": {"plus": "upper_plus", "norm": "raw_norm"},
    "thm2": {"plus_tight": "upper_plus", "plus_relaxed": "upper_plus",
             "minus_tight": "upper_minus", "minus_relaxed": "upper_minus"},
    "thm3": {"plus": "upper_plus"},
    "thm4": {"vplus": "upper_minus", "v": "upper_minus"},
    "cor1": {"norm": "raw_norm", "plus": "upper_plus", "minus": "upper_minus"},
    "cor2": {"minus": "upper_minus"},
    "cor3": {"norm": "raw_norm", "plus": "upper_plus", "minus": "upper_minus"},
}


@dataclass(frozen=True)
class BoundInputs:
    q: float
    c: float | None = None                # a.s. bound on V+ (and V-)
    norm_vplus: float | None = None       # ||V+||_{q/2}
    norm_vminus: float | None = None      # ||V-||_{q/2}
    norm_v: float | None = None           # ||V||_{q/2}
    norm_M_q: float | None = None         # ||M||_q
    expectation_Z: float | None = None
    A: float | None = None
    norm_W_q: float | None = None
    expectation_gZ: float | None = None   # E[g(Z)] with V- <= g(Z)
    theta: float | None = None


@dataclass(frozen=True)
class BoundResult:
    theorem: str
    q: float
    value: float
    constants_used: tuple[tuple[str, float], ...] = ()
    side: str = "upper_plus"
    variant: str = ""
    inputs: Mapping[str, float] = field(default_factory=dict, compare=False)


def _need(inp: BoundInputs, *names: str) -> list[float]:
    out = []
    for name in names:
        v = getattr(inp, name)
        if v is None:
            raise ValueError(f"missing input {name!r}")
        if not math.isfinite(v) and not v == math.inf:
            raise ValueError(f"input {name!r} is not a number")
        if name not in ("expectation_Z",) and v < 0:
            raise ValueError(f"input {name!r} must be nonnegative, got {v}")
        out.append(float(v))
    return out


def _check_q(theorem: str, q: float, integer: bool, minimum: float = 2.0) -> None:
    if not q >= minimum:
        raise ValueError(f"{theorem} needs q >= {minimum:g}, got {q}")
    if integer and q != int(q):
        raise ValueError(f"{theorem} needs an integer q, got {q}")


def moment_bound(theorem: str, inp: BoundInputs, variant: str | None = None) -> BoundResult:
    """One displayed right-hand side.  ``variant`` defaults to the first listed."""
    if theorem not in VARIANTS:
        raise ValueError(f"unknown theorem {theorem!r}; expected one of {sorted(VARIANTS)}")
    variants = VARIANTS[theorem]
    variant = variant or next(iter(variants))
    if variant not in variants:
        raise ValueError(f"{theorem} has variants {sorted(variants)}, not {variant!r}")
    q = float(inp.q)
    consts: list[tuple[str, float]] = []

    if theorem == "thm1":
        _check_q(theorem, q, integer=True)
        (c,) = _need(inp, "c")
        core = math.sqrt(K * q * c)
        consts.append(("K", K))
        if variant == "plus":
            value = core
        else:
            (ez,) = _need(inp, "expectation_Z")
            value = abs(ez) + 2.0 ** (1.0 / q) * core

    elif theorem == "thm2":
        _check_q(theorem, q, integer=False)
        kq = kappa_q(q)
        consts.append(("kappa_q", kq))
        (norm,) = _need(inp, "norm_vplus" if variant.startswith("plus") else "norm_vminus")
        factor = (1.0 - 1.0 / q) if variant.endswith("tight") else 1.0
        value = math.sqrt(factor * 2.0 * kq * q * norm)

    elif theorem == "thm3":
        _check_q(theorem, q, integer=False)
        kq = kappa_q(q)
        consts.append(("kappa_q", kq))
        (norm,) = _need(inp, "norm_v")
        value = math.sqrt(kq * q * norm)

    elif theorem == "thm4":
        _check_q(theorem, q, integer=False)
        name = "C1" if variant == "vplus" else "C2"
        ca = constant(name).value
        consts.append((name, ca))
        norm, m = _need(inp, "norm_vplus" if variant == "vplus" else "norm_v", "norm_M_q")
        value = math.sqrt(ca * q * max(norm, q * m * m))

    elif theorem == "cor1":
        a = _need(inp, "A")[0]
        if a < 1:
            raise ValueError(f"cor1 needs A >= 1, got {a}")
        (ez,) = _need(inp, "expectation_Z")
        if ez < 0:
            raise ValueError("cor1 needs E[Z] >= 0")
        if variant == "norm":
            _check_q(theorem, q, integer=True, minimum=1.0)
            value = ez + a * (q - 1.0) / 2.0
        elif variant == "plus":
            _check_q(theorem, q, integer=False)
            consts.append(("kappa", KAPPA))
            value = math.sqrt(KAPPA) * (math.sqrt(a * q * ez) + a * q / 2.0)
        else:
            _check_q(theorem, q, integer=True)
            cc = constant("cor1_C").value
            consts.append(("cor1_C", cc))
            value = math.sqrt(cc * q * a * ez)

    elif theorem == "cor2":
        _check_q(theorem, q, integer=True)
        (eg,) = _need(inp, "expectation_gZ")
        consts.append(("K", K))
        value = math.sqrt(K * q * eg)

    else:  # cor3
        _check_q(theorem, q, integer=False)
        (ez,) = _need(inp, "expectation_Z")
        (w,) = _need(inp, "norm_W_q")
        if variant == "norm":
            theta = inp.theta
            if theta is None or not 0.0 < theta <= 1.0:
                raise ValueError(f"cor3 needs theta in (0, 1], got {theta}")
            consts.append(("kappa", KAPPA))
            value = (1.0 + theta) * ez + 0.5 * KAPPA * (1.0 + 1.0 / theta) * q * w
        elif variant == "plus":
            consts.append(("kappa", KAPPA))
            value = math.sqrt(2.0 * KAPPA * q * w * max(ez, 0.0)) + KAPPA * q * w
        else:
            c2 = constant("C2").value
            consts.append(("C2", c2))
            (m,) = _need(inp, "norm_M_q")
            value = math.sqrt(c2 * q * max(m * (2.0 * ez + 2.0 * q * w), q * m * m))

    inputs = {k: v for k, v in vars(inp).items() if v is not None}
    return BoundResult(theorem, q, float(value), tuple(consts), variants[variant], variant, inputs)


def moment_bounds(theorem: str, inp: BoundInputs) -> list[BoundResult]:
    """Every variant of ``theorem`` whose inputs and q-constraints are met."""
    out = []
    for variant in VARIANTS[theorem]:
        try:
            out.append(moment_bound(theorem, inp, variant))
        except ValueError:
            continue
    return out


# -- tail bounds ---------------------------------------------------------------

def tail_from_moments(t: float, moments: Mapping[float, float]) -> float:
    """``min(1, min_q (m_q / t)^q)`` — Markov's inequality at the best listed moment."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not moments:
        raise ValueError("moment table is empty")
    best = 1.0
    for q, m in moments.items():
        if m < 0:
            raise ValueError(f"moment bound at q={q} is negative")
        # log space keeps (m/t)^q from overflowing for large q
        if m == 0:
            return 0.0
        best = min(best, math.exp(q * (math.log(m) - math.log(t))))
    return best


def chaos_tail(t: float, EW: Sequence[float], d: int) -> float:
    """Upper-tail bound for a chaos of order d from ``E[W_1], ..., E[W_d]``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if len(EW) != d or d < 1:
        raise ValueError(f"expected {d} values of E[W_j], got {len(EW)}")
    if any(not w > 0 for w in EW):
        raise ValueError("E[W_j] must all be positive")
    inner = min((t / (2.0 * d * EW[j - 1])) ** (2.0 / j) for j in range(1, d + 1))
    return min(1.0, 2.0 * math.exp(-(math.log(2.0) / (4.0 * KAPPA)) * inner))


def boolean_tail(t: float, EZ: float, EM: Sequence[float], d: int) -> float:
    """Upper-tail bound for a nonnegative Boolean polynomial of degree d.

    ``EM[k]`` is ``E[M_k]`` for ``k = 0 .. d-1``; both regimes of the j-th term
    use ``E[M_{d-j}]``.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if len(EM) != d or d < 1:
        raise ValueError(f"expected {d} values E[M_0..M_{d-1}], got {len(EM)}")
    if not EZ > 0 or any(not m > 0 for m in EM):
        raise ValueError("E[Z] and E[M_k] must be positive")
    terms = []
    for j in range(1, d + 1):
        em = EM[d - j]
        a = (t / (4.0 * d * math.sqrt(EZ * em))) ** (2.0 / j)
        b = (t / (4.0 * d * em)) ** (1.0 / j)
        terms.append(min(a, b))
    return min(1.0, math.exp(-(math.log(2.0) / (d * KAPPA)) * min(terms)))
