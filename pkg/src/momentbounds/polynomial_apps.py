"""Suprema of Rademacher chaos and of nonnegative Boolean polynomials.

A :class:`ChaosSpec` lists index sets ``I`` (all of size d) and a finite set of
coefficient vectors ``t``.  For signs we use ``Z = sup_t |sum_I t_I prod_{i in I} X_i|``;
for 0/1 variables ``Z = sup_t sum_I t_I prod X_i`` with ``t >= 0``.

``W_k`` replaces k of the sign factors by unit vectors and is an injective
tensor norm: closed form for k = 1, a spectral norm for k = 2, and only a
lower estimate (alternating maximisation) for k >= 3.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import ndtri

from .bounds import BoundResult
from .constants import KAPPA, K
from .increments import Functional, Reduction
from .product_space import ProductSpace, bernoulli, keyed_uniforms, rademacher

__all__ = [
    "ChaosSpec",
    "WProfile",
    "chaos_space",
    "monomials",
    "chaos_value",
    "chaos_functional",
    "chaos_W",
    "chaos_W_profile",
    "chaos_moment_bound",
    "bonami_bound",
    "boolean_value",
    "boolean_M",
    "boolean_moment_bound",
    "triangle_scenario",
    "TriangleScenario",
    "triangle_good_count",
    "triangle_good_bound",
    "triangle_m1_moment_bound",
    "triangle_cor3_bound",
]

ALT_RESTARTS = 32
ALT_ITERATIONS = 500
ALT_TOL = 1e-10
POWER_RESTARTS = 8
POWER_TOL = 1e-12
POWER_SQUARINGS = 24
POWER_MAX_ITER = 10_000
CERTIFY_TOL = 1e-9


@dataclass(frozen=True)
class ChaosSpec:
    n: int
    d: int
    subsets: np.ndarray = field(compare=False)   # (m, d) int, sorted rows
    coeffs: np.ndarray = field(compare=False)    # (|T|, m)
    kind: str = "rademacher"
    p: float = 0.5

    def __post_init__(self):
        subsets = np.atleast_2d(np.asarray(self.subsets, dtype=np.int64))
        coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "coeffs", coeffs)
        if not 1 <= self.d <= self.n:
            raise ValueError(f"need 1 <= d <= n, got d={self.d}, n={self.n}")
        if subsets.shape[1] != self.d:
            raise ValueError(f"index sets must have size d={self.d}")
        if subsets.size and (subsets.min() < 0 or subsets.max() >= self.n):
            raise ValueError("index out of range")
        if any(len(set(row)) != self.d for row in subsets.tolist()):
            raise ValueError("index sets must have distinct entries")
        if coeffs.shape[0] == 0 or coeffs.shape[1] != subsets.shape[0]:
            raise ValueError("coefficient set must be nonempty with one entry per index set")
        if self.kind not in ("rademacher", "bernoulli"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind == "bernoulli":
            if not 0.0 < self.p < 1.0:
                raise ValueError(f"bernoulli parameter must lie in (0, 1), got {self.p}")
            if np.any(coeffs < 0):
                raise ValueError("Boolean polynomials need nonnegative coefficients")

    @classmethod
    def full(cls, n: int, d: int, coeffs=None, kind: str = "rademacher", p: float = 0.5) -> "ChaosSpec":
        """All ``C(n, d)`` index sets in lexicographic order; default ``t = 1``."""
        subsets = np.array(list(itertools.combinations(range(n), d)), dtype=np.int64)
        if coeffs is None:
            coeffs = np.ones((1, len(subsets)))
        return cls(n, d, subsets, coeffs, kind, p)

    @property
    def boolean(self) -> bool:
        return self.kind == "bernoulli"


def chaos_space(spec: ChaosSpec, **kw) -> ProductSpace:
    return bernoulli(spec.n, spec.p, **kw) if spec.boolean else rademacher(spec.n, **kw)


def monomials(spec: ChaosSpec, configs: np.ndarray) -> np.ndarray:
    """``prod_{i in I} X_i`` for every configuration and index set, shape ``(N, m)``."""
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    out = np.ones((configs.shape[0], spec.subsets.shape[0]))
    for col in range(spec.d):
        out *= configs[:, spec.subsets[:, col]]
    return out


def _weighted_sums(spec: ChaosSpec, mono: np.ndarray) -> np.ndarray:
    # explicit broadcast-sum instead of a BLAS product: bit-stable across thread counts
    return (mono[:, None, :] * spec.coeffs[None, :, :]).sum(axis=2)


def chaos_value(spec: ChaosSpec, configs) -> np.ndarray | float:
    """``Z`` at one configuration (float) or many (array)."""
    arr = np.asarray(configs, dtype=float)
    single = arr.ndim == 1
    s = _weighted_sums(spec, monomials(spec, arr))
    z = s.max(axis=1) if spec.boolean else np.abs(s).max(axis=1)
    return float(z[0]) if single else z


def boolean_value(spec: ChaosSpec, configs):
    if not spec.boolean:
        raise ValueError("boolean_value needs a Bernoulli spec")
    return chaos_value(spec, configs)


def chaos_functional(spec: ChaosSpec) -> Functional:
    """``Z`` as a functional; the reduction drops every monomial containing X_i.

    For 0/1 variables this is ``X_i := 0``; for signs it is the infimum over the
    support of coordinate ``i``.
    """

    def func(c):
        return chaos_value(spec, c)

    if spec.boolean:
        return Functional(func, Reduction.at_baseline([0.0] * spec.n), "boolean")
    return Functional(func, Reduction(), "chaos")


# -- W_k ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WProfile:
    values: np.ndarray      # (N, d)
    methods: tuple[str, ...]
    certified: tuple[bool, ...]


def _form_tensor(spec: ChaosSpec, x: np.ndarray, t: np.ndarray, k: int) -> np.ndarray:
    """Symmetric k-tensor ``A[i_1..i_k] = sum_J prod X_J t_{J + {i}}`` (distinct i's)."""
    n, d = spec.n, spec.d
    a = np.zeros((n,) * k)
    for row, coef in zip(spec.subsets, t):
        if coef == 0:
            continue
        members = tuple(int(v) for v in row)
        for chosen in itertools.permutations(members, k):
            rest = [v for v in members if v not in chosen]
            a[chosen] += coef * math.prod(x[v] for v in rest)
    return a


def _spectral_norm(a: np.ndarray, key: tuple[int, int]) -> tuple[float, bool]:
    """Largest singular value by power iteration on ``A^T A``, checked against LAPACK.

    Steps apply ``(A^T A)^(2^s)`` (repeated squaring) so that nearly equal
    top singular values still separate within a few iterations.
    """
    n = a.shape[0]
    if not np.any(a):
        return 0.0, True
    ata = a.T @ a
    step = ata / np.linalg.norm(ata)
    for _ in range(POWER_SQUARINGS):
        step = step @ step
        step /= np.linalg.norm(step)
    starts = [np.eye(n)[i] for i in range(n)]
    for r in range(POWER_RESTARTS):
        u = keyed_uniforms(key[0], np.arange(n, dtype=np.uint64), key[1], r + 1)
        starts.append(ndtri(u * (1.0 - 2.0**-52) + 2.0**-54))
    best = 0.0
    for v in starts:
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v = v / nv
        rho = float(v @ ata @ v)
        for _ in range(POWER_MAX_ITER):
            w = step @ v
            nw = np.linalg.norm(w)
            if nw == 0:
                break
            v = w / nw
            new = float(v @ ata @ v)
            if abs(new - rho) < POWER_TOL * max(1.0, abs(new)):
                rho = new
                break
            rho = new
        best = max(best, rho)
    value = math.sqrt(max(best, 0.0))
    ref = float(np.linalg.norm(a, 2))
    certified = abs(value - ref) <= CERTIFY_TOL * max(1.0, ref)
    return max(value, ref), certified


def _alternating(a: np.ndarray, key: tuple[int, int]) -> float:
    """Lower estimate of the injective norm of a k-tensor by alternating maximisation."""
    k = a.ndim
    n = a.shape[0]
    if not np.any(a):
        return 0.0
    best = 0.0
    letters = "abcdefghij"[:k]
    for r in range(ALT_RESTARTS):
        vecs = []
        for h in range(k):
            if r == 0:
                v = np.ones(n)
            else:
                u = keyed_uniforms(key[0], np.arange(n, dtype=np.uint64) + np.uint64(n * h), key[1], r)
                v = ndtri(u * (1.0 - 2.0**-52) + 2.0**-54)
            vecs.append(v / np.linalg.norm(v))
        val = 0.0
        for _ in range(ALT_ITERATIONS):
            for h in range(k):
                others = [letters[g] for g in range(k) if g != h]
                expr = letters + "," + ",".join(others) + "->" + letters[h]
                w = np.einsum(expr, a, *[vecs[g] for g in range(k) if g != h])
                nw = np.linalg.norm(w)
                if nw == 0:
                    break
                vecs[h] = w / nw
            new = abs(float(np.einsum(letters + "," + ",".join(letters) + "->", a, *vecs)))
            if abs(new - val) < ALT_TOL * max(1.0, new):
                val = new
                break
            val = new
        best = max(best, val)
    return best


def chaos_W(spec: ChaosSpec, config, k: int, seed: int = 0, config_index: int = 0) -> tuple[float, bool]:
    """``(W_k, certified)`` at one configuration."""
    if not 1 <= k <= spec.d:
        raise ValueError(f"k must lie in 1..{spec.d}, got {k}")
    x = np.asarray(config, dtype=float).reshape(-1)
    best = 0.0
    certified = True
    for ti, t in enumerate(spec.coeffs):
        a = _form_tensor(spec, x, t, k)
        if k == 1:
            val, ok = float(np.sqrt(math.fsum(a * a))), True
        elif k == 2:
            val, ok = _spectral_norm(a, (seed, config_index * 1_000_003 + ti))
        else:
            val, ok = _alternating(a, (seed, config_index * 1_000_003 + ti)), False
        best = max(best, val)
        certified &= ok
    return best, certified


def chaos_W_profile(spec: ChaosSpec, configs: np.ndarray, seed: int = 0) -> WProfile:
    configs = np.atleast_2d(configs)
    vals = np.zeros((configs.shape[0], spec.d))
    cert = [True] * spec.d
    for r, x in enumerate(configs):
        for k in range(1, spec.d + 1):
            if k == spec.d and r > 0:
                # W_d does not depend on the configuration
                vals[r, k - 1] = vals[0, k - 1]
                continue
            v, ok = chaos_W(spec, x, k, seed, r)
            vals[r, k - 1] = v
            cert[k - 1] &= ok
    methods = tuple("closed_form" if k == 1 else "power_iteration" if k == 2 else "alternating"
                    for k in range(1, spec.d + 1))
    return WProfile(vals, methods, tuple(cert))


def chaos_moment_bound(q: float, EW: Sequence[float], d: int) -> list[BoundResult]:
    """Both displayed forms; ``EW[d-1]`` is the constant ``W_d``."""
    if len(EW) != d:
        raise ValueError(f"expected {d} values E[W_j], got {len(EW)}")
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    lead = math.fsum((4.0 * KAPPA * q) ** (j / 2.0) * EW[j - 1] for j in range(1, d))
    first = lead + (4.0 * KAPPA) ** ((d - 1) / 2.0) * math.sqrt(2.0 * K) * q ** (d / 2.0) * EW[d - 1]
    relaxed = lead + (4.0 * KAPPA * q) ** (d / 2.0) * EW[d - 1]
    consts = (("kappa", KAPPA), ("K", K))
    return [BoundResult("thm14", q, first, consts, "upper_plus", "first"),
            BoundResult("thm14", q, relaxed, consts[:1], "upper_plus", "relaxed")]


def bonami_bound(q: float, norm2_Z: float, d: int, as_printed: bool = False) -> float:
    """``||Z||_q`` from ``||Z||_2`` for a chaos of order d.

    Default: the geometric sum ``sum_{j=0}^{d} (4 kappa q d)^{j/2}``.
    ``as_printed`` uses ``(sqrt(4 kappa q d^{d+1}) - 1) / (sqrt(4 kappa q d) - 1)``.
    """
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    r = math.sqrt(4.0 * KAPPA * q * d)
    if as_printed:
        factor = (math.sqrt(4.0 * KAPPA * q * d ** (d + 1)) - 1.0) / (r - 1.0)
    else:
        factor = (r ** (d + 1) - 1.0) / (r - 1.0)
    return factor * norm2_Z


# -- Boolean M_k -------------------------------------------------------------------

def _completion_structure(spec: ChaosSpec, k: int):
    """For every (I, J) with J subset of I, |J| = d-k: the completion indices I \\ J."""
    j_index: dict[tuple[int, ...], int] = {}
    rows, comps, cols = [], [], []
    for r, row in enumerate(spec.subsets.tolist()):
        for J in itertools.combinations(row, spec.d - k):
            col = j_index.setdefault(J, len(j_index))
            rows.append(r)
            cols.append(col)
            comps.append([v for v in row if v not in J])
    comps = np.asarray(comps, dtype=np.int64).reshape(len(rows), k)
    return np.asarray(rows), comps, np.asarray(cols), len(j_index)


def boolean_M(spec: ChaosSpec, configs, k: int, chunk: int = 2048) -> np.ndarray | float:
    """``M_k = max_J sup_t sum_{I >= J} t_I prod_{I \\ J} X``, ``0 <= k <= d-1``."""
    if not spec.boolean:
        raise ValueError("M_k is defined for Boolean specs")
    if not 0 <= k <= spec.d - 1:
        raise ValueError(f"k must lie in 0..{spec.d - 1}, got {k}")
    arr = np.asarray(configs, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    rows, comps, cols, n_j = _completion_structure(spec, k)
    out = np.zeros(arr.shape[0])
    mats = [sp.csr_matrix((t[rows], (np.arange(rows.size), cols)), shape=(rows.size, n_j))
            for t in spec.coeffs]
    for start in range(0, arr.shape[0], chunk):
        x = arr[start:start + chunk]
        mono = np.ones((x.shape[0], rows.size))
        for c in range(k):
            mono *= x[:, comps[:, c]]
        best = np.full(x.shape[0], -np.inf)
        for mat in mats:
            # sparse product: fixed accumulation order, no threading
            vals = np.asarray((sp.csr_matrix(mono) @ mat).todense())
            best = np.maximum(best, vals.max(axis=1))
        out[start:start + chunk] = best
    return float(out[0]) if single else out


def boolean_moment_bound(q: float, EZ: float, EM: Sequence[float], d: int) -> BoundResult:
    """``2 sum_j {(kq)^{j/2} sqrt(d!/(d-j)!) sqrt(EZ EM_{d-j}) + (kq)^j d!/(d-j)! EM_{d-j}}``."""
    if len(EM) != d:
        raise ValueError(f"expected {d} values E[M_0..M_{d-1}], got {len(EM)}")
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    if EZ < 0 or any(m < 0 for m in EM):
        raise ValueError("E[Z] and E[M_k] must be nonnegative")
    terms = []
    for j in range(1, d + 1):
        ff = math.factorial(d) / math.factorial(d - j)
        em = EM[d - j]
        terms.append((KAPPA * q) ** (j / 2.0) * math.sqrt(ff) * math.sqrt(EZ * em) + (KAPPA * q) ** j * ff * em)
    return BoundResult("thm15", q, 2.0 * math.fsum(terms), (("kappa", KAPPA),), "upper_plus", "plus")


# -- triangles ----------------------------------------------------------------------

@dataclass(frozen=True)
class TriangleScenario:
    n_vertices: int
    p: float
    spec: ChaosSpec = field(compare=False)
    edges: tuple[tuple[int, int], ...] = field(compare=False)

    @property
    def EZ(self) -> float:
        return math.comb(self.n_vertices, 3) * self.p ** 3

    @property
    def EM1_upper(self) -> float:
        """Upper bound ``2(log n + n p^2)`` on the expected maximal codegree."""
        return 2.0 * (math.log(self.n_vertices) + self.n_vertices * self.p ** 2)

    def m1(self, configs):
        """Maximal codegree: ``max_{u,v} sum_w X_uw X_vw`` (= ``M_{d-1}``)."""
        return boolean_M(self.spec, configs, self.spec.d - 1)

    def space(self, **kw) -> ProductSpace:
        return chaos_space(self.spec, **kw)


def triangle_scenario(n_vertices: int, p: float) -> TriangleScenario:
    """Triangle count in G(n, p) as a degree-3 Boolean polynomial in the edge variables."""
    if int(n_vertices) != n_vertices or n_vertices < 3:
        raise ValueError(f"need an integer n_vertices >= 3, got {n_vertices}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    n = int(n_vertices)
    edges = list(itertools.combinations(range(n), 2))
    index = {e: i for i, e in enumerate(edges)}
    tri = [(index[(u, v)], index[(u, w)], index[(v, w)]) for u, v, w in itertools.combinations(range(n), 3)]
    spec = ChaosSpec(len(edges), 3, np.array(tri, dtype=np.int64), np.ones((1, len(tri))), "bernoulli", p)
    return TriangleScenario(n, p, spec, tuple(edges))


def triangle_good_count(sc: TriangleScenario, configs) -> np.ndarray:
    """Triangles whose three edges each lie in fewer than ``n p`` triangles."""
    arr = np.atleast_2d(np.asarray(configs, dtype=float))
    mono = monomials(sc.spec, arr)                    # (N, #triangles)
    tri = sc.spec.subsets
    m = len(sc.edges)
    inc = sp.csr_matrix((np.ones(tri.size), (tri.reshape(-1), np.repeat(np.arange(tri.shape[0]), 3))),
                        shape=(m, tri.shape[0]))
    per_edge = np.asarray((sp.csr_matrix(mono) @ inc.T).todense())   # triangles through each edge
    good_edge = per_edge < sc.n_vertices * sc.p
    good_tri = good_edge[:, tri[:, 0]] & good_edge[:, tri[:, 1]] & good_edge[:, tri[:, 2]]
    return (mono * good_tri).sum(axis=1)


def triangle_good_bound(n_vertices: int, p: float, q: float, EZg: float) -> BoundResult:
    """Self-bounding (A = 3, scale n p) bound on ``||(Z^g - E Z^g)_+||_q``."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    npv = n_vertices * p
    value = math.sqrt(KAPPA) * (math.sqrt(3.0 * q * npv * EZg) + 3.0 * q * npv / math.sqrt(2.0))
    return BoundResult("tri_good", q, value, (("kappa", KAPPA),), "upper_plus", "plus")


def triangle_m1_moment_bound(n_vertices: int, EM1: float, q: float) -> BoundResult:
    """``||M_1||_q <= n ^ (E[M_1] + q - 1)`` for integer q >= 1."""
    if q != int(q) or q < 1:
        raise ValueError(f"needs an integer q >= 1, got {q}")
    return BoundResult("tri_m1_moment", q, min(float(n_vertices), EM1 + q - 1.0), (), "raw_norm", "norm")


def triangle_cor3_bound(n_vertices: int, q: float, EM1: float, EZ: float) -> BoundResult:
    """``sqrt(6 kappa q EM1 EZ) + q (sqrt(6 kappa EZ) + 3 kappa (n ^ (EM1 + 3(q-1))))``."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    tail = min(float(n_vertices), EM1 + 3.0 * (q - 1.0))
    value = math.sqrt(6.0 * KAPPA * q * EM1 * EZ) + q * (math.sqrt(6.0 * KAPPA * EZ) + 3.0 * KAPPA * tail)
    return BoundResult("tri_cor3", q, value, (("kappa", KAPPA),), "upper_plus", "plus")
