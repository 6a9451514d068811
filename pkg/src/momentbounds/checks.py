"""Run scenario checks: compute each bound's inputs, its left-hand side, and compare.

Exact mode enumerates the product space and asserts ``lhs <= rhs + 1e-8``.
Monte Carlo mode compares the upper CI end of the left-hand side with the
bound evaluated at the lower CI ends of its inputs (every bound is
nondecreasing in its inputs); a row that is not conclusive is reported as
``not_asserted``, never ``fail``.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import VARIANTS, BoundInputs, boolean_tail, chaos_tail, moment_bound
from .classical_apps import (EPStats, ep_bounds, ep_stats, khinchine_bound, lemma7_check, lemma8_check,
                             marcinkiewicz_bound, rosenthal_bounds, thm13_bounds)
from .increments import Estimate, IncrementTable
from .polynomial_apps import (boolean_M, boolean_moment_bound, bonami_bound, chaos_moment_bound,
                              chaos_W_profile, triangle_cor3_bound, triangle_good_bound, triangle_good_count,
                              triangle_m1_moment_bound)
from .product_space import EnumerationUnavailable
from .report import Report, Row
from .scenario import THEOREM_RULES, Built, Check, Mode, Scenario, build

__all__ = ["TOL", "HANDLERS", "UPPER_PLUS", "Context", "run_check", "execute", "execute_all"]

TOL = 1e-8
HYP_TOL = 1e-10
WITHIN_CI = 3.0


class Inapplicable(Exception):
    """The scenario does not satisfy a hypothesis of the checked result."""


@dataclass
class Draft:
    """One row before its status is decided."""
    variant: str
    lhs: Estimate
    rhs: Callable[[dict], float] | None = None
    inputs: dict = field(default_factory=dict)
    q: float | None = None
    label: str = ""
    certified: bool = True
    within: bool = False          # two-sided agreement instead of lhs <= rhs
    status: str | None = None
    method_note: str = ""


def _est(x, hw: float = 0.0) -> Estimate:
    if isinstance(x, Estimate):
        return x
    if hasattr(x, "ci_halfwidth"):
        return Estimate(float(x.value), float(x.ci_halfwidth))
    return Estimate(float(x), float(hw))


def _lowered(e: Estimate) -> float:
    if e.value < 0:
        return e.value - e.halfwidth
    return max(e.value - e.halfwidth, 0.0)


# -- shared per-scenario state -----------------------------------------------------

class Context:
    """Scenario objects plus lazily built, shared tables and caches."""

    def __init__(self, scenario: Scenario, built: Built | None = None):
        self.scenario = scenario
        self.built = built or build(scenario)
        self._lock = threading.RLock()
        self._memo: dict = {}

    @property
    def space(self):
        return self.built.space

    @property
    def functional(self):
        return self.built.functional

    @property
    def kind(self) -> str:
        return self.scenario.functional["kind"]

    def memo(self, key, fn):
        with self._lock:
            if key not in self._memo:
                self._memo[key] = fn()
            return self._memo[key]

    def table(self, mode: Mode) -> IncrementTable:
        def make():
            if mode.kind == "exact":
                return IncrementTable.exact(self.space, self.functional)
            return IncrementTable.sampled(self.space, self.functional, mode.seed, mode.count)
        return self.memo(("table",) + mode.key(), make)


def _side_lhs(t: IncrementTable, side: str, q: float) -> Estimate:
    name = {"upper_plus": "z_plus", "upper_minus": "z_minus", "raw_norm": "z"}[side]
    return _est(t.norm(name, q))


def _centered_norm(t: IncrementTable, values: np.ndarray, q: float, part: str) -> Estimate:
    mean = t.expect(values)
    c = values - mean.value
    c = np.maximum(c, 0.0) if part == "plus" else np.maximum(-c, 0.0)
    est = _est(t.norm(c, q))
    return Estimate(est.value, est.halfwidth + mean.halfwidth)


def _hyp_tol(t: IncrementTable) -> float:
    return HYP_TOL * max(1.0, float(np.max(np.abs(t.z))))


def _tail_prob(t: IncrementTable, values: np.ndarray, threshold: float) -> Estimate:
    return t.expect((values >= threshold).astype(float))


# -- general functionals -------------------------------------------------------------

_DUMMY = dict(c=1.0, norm_vplus=1.0, norm_vminus=1.0, norm_v=1.0, norm_M_q=1.0, expectation_Z=1.0,
              A=1.0, norm_W_q=1.0, expectation_gZ=1.0)


def _admissible(theorem: str, variant: str, q: float, theta: float | None) -> bool:
    try:
        moment_bound(theorem, BoundInputs(q=q, theta=theta, **_DUMMY), variant)
    except ValueError:
        return False
    return True


def _bound_rhs(theorem: str, variant: str, q: float, theta: float | None):
    def f(vals: dict) -> float:
        return moment_bound(theorem, BoundInputs(q=q, theta=theta, **vals), variant).value
    return f


def _self_bounding_A(t: IncrementTable, tol: float) -> float:
    z = t.on_support(t.z)
    s = t.on_support(t.increment_sum)
    if np.any((z <= tol) & (s > tol)):
        raise Inapplicable("sum of increments is positive where Z = 0")
    pos = z > tol
    ratio = float(np.max(s[pos] / z[pos])) if np.any(pos) else 0.0
    return max(1.0, ratio)


def _monotone_envelope(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Smallest nondecreasing g with ``v <= g(z)``, evaluated at each z."""
    order = np.argsort(z, kind="stable")
    zs, vs = z[order], v[order]
    uniq, start = np.unique(zs, return_index=True)
    group_max = np.maximum.reduceat(vs, start)
    env = np.maximum.accumulate(group_max)
    return env[np.searchsorted(uniq, z)]


def _w_values(ctx: Context, t: IncrementTable, how: str, tol: float) -> np.ndarray:
    z, v = t.z, t.v
    if how == "ratio":
        w = np.zeros_like(z)
        pos = z > tol
        w[pos] = v[pos] / z[pos]
        if np.any(t.on_support((~pos) & (v > tol))):
            raise Inapplicable("V > 0 where Z <= 0, so no W >= 0 gives V <= W Z")
        return w
    if how == "max_coord":
        w = np.maximum(t.configs.max(axis=1), 0.0)
        if np.any(t.on_support(v - w * z) > tol):
            raise Inapplicable("V <= W Z fails with W = max_i X_i")
        return w
    raise ValueError(f"unknown W choice {how!r}; use ratio or max_coord")


def h_general(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    thm = chk.theorem
    t = ctx.table(mode)
    tol = _hyp_tol(t)
    theta = chk.theta if chk.theta is not None else 1.0
    drafts = []
    for q in chk.qs:
        for variant, side in VARIANTS[thm].items():
            if not _admissible(thm, variant, q, theta if thm == "cor3" else None):
                continue
            try:
                inputs = _general_inputs(ctx, t, chk, thm, variant, q, tol)
            except Inapplicable as exc:
                drafts.append(Draft(variant, Estimate(math.nan, 0.0), q=q, status="inapplicable",
                                    method_note=str(exc)))
                continue
            drafts.append(Draft(variant, _side_lhs(t, side, q),
                                _bound_rhs(thm, variant, q, theta if thm == "cor3" else None), inputs, q))
    return drafts


def _general_inputs(ctx, t: IncrementTable, chk: Check, thm: str, variant: str, q: float, tol: float) -> dict:
    half = q / 2.0
    if thm == "thm1":
        c = t.ess_sup(t.v_plus)
        if variant == "norm":
            c = max(c, t.ess_sup(t.v_minus))
        user_c = chk.params.get("c")
        if user_c is not None:
            if user_c < c - tol:
                raise Inapplicable(f"V+ exceeds the supplied c = {user_c}")
            c = float(user_c)
        out = {"c": Estimate(c, 0.0)}
        if variant == "norm":
            ez = t.ez
            out["expectation_Z"] = Estimate(abs(ez.value), ez.halfwidth)
        return out
    if thm == "thm2":
        name = "v_plus" if variant.startswith("plus") else "v_minus"
        key = "norm_vplus" if variant.startswith("plus") else "norm_vminus"
        return {key: _est(t.norm(name, half))}
    if thm == "thm3":
        if not t.reduction_below(tol):
            raise Inapplicable("Z_i <= Z fails")
        return {"norm_v": _est(t.norm("v", half))}
    if thm == "thm4":
        if variant == "vplus":
            return {"norm_vplus": _est(t.norm("v_plus", half)), "norm_M_q": _est(t.norm("m_resample", q))}
        if not t.reduction_below(tol):
            raise Inapplicable("0 <= Z - Z_i fails")
        m = np.maximum(t.m_reduction, 0.0)
        return {"norm_v": _est(t.norm("v", half)), "norm_M_q": _est(t.norm(m, q))}
    if thm == "cor1":
        if not t.reduction_below(tol):
            raise Inapplicable("0 <= Z - Z_i fails")
        if t.ess_sup(t.m_reduction) > 1.0 + tol:
            raise Inapplicable("Z - Z_i <= 1 fails")
        a = _self_bounding_A(t, tol)
        user_a = chk.params.get("A")
        if user_a is not None:
            if user_a < a - tol:
                raise Inapplicable(f"sum of increments exceeds A Z for A = {user_a}")
            a = float(user_a)
        return {"A": Estimate(a, 0.0), "expectation_Z": t.ez}
    if thm == "cor2":
        g = _monotone_envelope(t.z, t.v_minus)
        return {"expectation_gZ": t.expect(g)}
    # cor3
    if not t.reduction_below(tol):
        raise Inapplicable("Z_i <= Z fails")
    w = ctx.memo(("W", chk.params.get("w", "ratio"), id(t)),
                 lambda: _w_values(ctx, t, chk.params.get("w", "ratio"), tol))
    out = {"norm_W_q": _est(t.norm(w, q)), "expectation_Z": t.ez}
    if variant == "minus":
        out["norm_M_q"] = _est(t.norm(np.maximum(t.m_reduction, 0.0), q))
    return out


def h_efron_stein(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    t = ctx.table(mode)
    ez = t.ez
    var = t.expect((t.z - ez.value) ** 2)
    es = t.expect(0.5 * (t.v_plus + t.v_minus))
    vv = t.expect(t.v)
    return [Draft("es", var, lambda v: v["es"], {"es": es}),
            Draft("variant", var, lambda v: v["ev"], {"ev": vv})]


# -- sums ----------------------------------------------------------------------------

def _is_rademacher(space) -> bool:
    return all(m.is_finite and sorted(m.support) == [-1.0, 1.0] and
               np.allclose(m.probabilities, 0.5) for m in space.marginals)


def _scaled_coords(ctx: Context, t: IncrementTable) -> np.ndarray:
    return t.configs * ctx.built.extras["weights"]


def h_thm7(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    a = ctx.built.extras["weights"]
    if not _is_rademacher(ctx.space) or np.any(a < 0):
        raise Inapplicable("needs Rademacher variables and nonnegative weights")
    t = ctx.table(mode)
    x = _scaled_coords(ctx, t)
    z = t.z
    drafts = []
    for q in chk.qs:
        plus, norm = khinchine_bound(a, q)
        lhs_plus = _est(t.norm(np.maximum(z, 0.0), q))
        lhs_minus = _est(t.norm(np.maximum(-z, 0.0), q))
        lhs_norm = _est(t.norm(z, q))
        drafts.append(Draft("plus", lhs_plus, lambda v, b=plus.value: b, q=q))
        drafts.append(Draft("minus", lhs_minus, lambda v, b=plus.value: b, q=q))
        drafts.append(Draft("norm", lhs_norm, lambda v, b=norm.value: b, q=q))
        sumsq = _est(t.norm((x * x).sum(axis=1), q / 2.0))
        drafts.append(Draft("marcinkiewicz", lhs_norm,
                            lambda v, q=q: marcinkiewicz_bound(q, v["s"]).value, {"s": sumsq}, q))
    return drafts


def h_rosenthal(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    thm = chk.theorem
    a = ctx.built.extras["weights"]
    margs = ctx.space.marginals
    if not all(m.is_finite for m in margs):
        raise Inapplicable("needs finite marginals")
    means = np.array([ai * m.mean() for ai, m in zip(a, margs)])
    second = np.array([ai * ai * m.second_moment() for ai, m in zip(a, margs)])
    theta = chk.theta if chk.theta is not None else 0.5
    if not 0.0 < theta < 1.0:
        raise Inapplicable("theta must lie in the open interval (0, 1)")
    t = ctx.table(mode)
    x = _scaled_coords(ctx, t)
    z = t.z
    drafts = []
    if thm == "thm8":
        if np.any(x < 0) or any(min(m.support) < 0 for m in margs) or np.any(a < 0):
            raise Inapplicable("summands must be nonnegative")
        ez = Estimate(math.fsum(means), 0.0)
        s2 = Estimate(math.fsum(second), 0.0)
        for q in chk.qs:
            wmax = _est(t.norm(x.max(axis=1), q))
            sides = {"plus": np.maximum(z - ez.value, 0.0), "minus": np.maximum(ez.value - z, 0.0), "norm": z}
            for k, variant in enumerate(("plus", "minus", "norm")):
                # E[Z] is exact here, so no centering error enters the CI
                lhs = _est(t.norm(sides[variant], q))
                drafts.append(Draft(variant, lhs,
                                    lambda v, q=q, k=k: rosenthal_bounds(
                                        "nonneg_thm8", {"EZ": v["EZ"], "sum_EX2": v["S2"], "norm_max_q": v["W"]},
                                        q, theta)[k].value,
                                    {"EZ": ez, "S2": s2, "W": wmax}, q))
        return drafts
    if np.any(np.abs(means) > 1e-12):
        raise Inapplicable("summands must be centred")
    sigma = Estimate(math.sqrt(math.fsum(second)), 0.0)
    for q in chk.qs:
        y = _est(t.norm(np.abs(x).max(axis=1), q))
        lhs = _est(t.norm(np.maximum(z, 0.0), q))
        drafts.append(Draft("plus", lhs,
                            lambda v, q=q: rosenthal_bounds("centered_thm9", {"sigma": v["sigma"], "norm_Y_q": v["Y"]},
                                                            q, theta)[0].value,
                            {"sigma": sigma, "Y": y}, q))
    return drafts


# -- empirical processes ---------------------------------------------------------------

def _ep_stats(ctx: Context, chk: Check, mode: Mode) -> EPStats:
    t = ctx.table(mode)
    qs = tuple(float(q) for q in chk.qs) or (2.0,)
    return ctx.memo(("ep", mode.key(), qs),
                    lambda: ep_stats(ctx.space, ctx.built.extras["fclass"], qs=qs, table=t))


def _ep_inputs(st: EPStats, q: float | None) -> dict:
    hw = st.halfwidths
    out = {"sigma2": Estimate(st.sigma2, 0.0), "Sigma2": Estimate(st.Sigma2, hw.get("Sigma2", 0.0)),
           "EZ": Estimate(st.EZ, hw.get("EZ", 0.0)), "EM2": Estimate(st.EM2, hw.get("EM2", 0.0)),
           "l2": Estimate(st.sup_single_l2, 0.0)}
    if q is not None:
        out["M"] = Estimate(st.M_norms[float(q)], hw.get(f"M_{float(q):g}", 0.0))
    return out


def _stats_from(v: dict, q: float | None) -> EPStats:
    norms = {float(q): v["M"]} if q is not None else {}
    return EPStats(v["sigma2"], v["Sigma2"], v["EZ"], norms, v["l2"], v["EM2"])


def h_ep(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    thm = chk.theorem
    fc = ctx.built.extras["fclass"]
    t = ctx.table(mode)
    drafts = []
    if thm == "thm10":
        if not _is_rademacher(ctx.space):
            raise Inapplicable("needs Rademacher variables")
        st = _ep_stats(ctx, chk, mode)
        for q in chk.qs:
            inp = _ep_inputs(st, q)
            for variant, side in (("plus", "upper_plus"), ("minus", "upper_minus")):
                drafts.append(Draft(variant, _side_lhs(t, side, q),
                                    lambda v, q=q, w=variant: ep_bounds(_stats_from(v, q), q, f"thm10_{w}").value,
                                    inp, q))
        return drafts
    if thm == "thm11":
        if fc.centered or fc.absolute or any(v < 0 for f in fc.tables for row in f for v in row):
            raise Inapplicable("needs a class of nonnegative functions without absolute value")
        st = _ep_stats(ctx, chk, mode)
        theta = chk.theta if chk.theta is not None else 1.0
        for q in chk.qs:
            drafts.append(Draft("norm", _side_lhs(t, "raw_norm", q),
                                lambda v, q=q: ep_bounds(_stats_from(v, q), q, "thm11", theta).value,
                                _ep_inputs(st, q), q))
        return drafts
    if not (fc.centered and fc.absolute):
        raise Inapplicable("needs a centred class with absolute-value supremum")
    st = _ep_stats(ctx, chk, mode)
    if thm == "thm12":
        for q in chk.qs:
            inp = _ep_inputs(st, q)
            drafts.append(Draft("first", _side_lhs(t, "upper_plus", q),
                                lambda v, q=q: ep_bounds(_stats_from(v, q), q, "thm12_first").value, inp, q))
            drafts.append(Draft("second", _side_lhs(t, "raw_norm", q),
                                lambda v, q=q: ep_bounds(_stats_from(v, q), q, "thm12_second").value, inp, q))
        return drafts
    if thm == "lemma7":
        inp = _ep_inputs(st, None)
        lhs = inp.pop("Sigma2")
        # the weak variance is exact; only E[Z] and E[M^2] enter with CIs
        return [Draft("sigma", lhs, lambda v: lemma7_check(_stats_from({**v, "Sigma2": 0.0}, None))[1], inp)]
    # lemma8
    lam = float(chk.params.get("lambda", 16.0))
    if not lam > 4:
        raise Inapplicable("lambda must exceed 4")
    if mode.kind != "exact":
        return [Draft(f"lambda={lam:g}", Estimate(math.nan, 0.0), status="unavailable",
                      method_note="truncated symmetrised sum is computed by enumeration only")]
    lhs, rhs = lemma8_check(ctx.space, fc, lam)
    return [Draft(f"lambda={lam:g}", Estimate(lhs, 0.0), lambda v, r=rhs: r)]


def h_thm13(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    fc = ctx.built.extras["fclass"]
    t = ctx.table(mode)
    tol = _hyp_tol(t)
    m = np.abs(fc.values(ctx.space, t.configs)).max(axis=(1, 2))
    if not t.reduction_below(tol):
        raise Inapplicable("Z_i <= Z fails")
    if np.any(t.on_support(t.m_reduction - m) > tol):
        raise Inapplicable("Z - Z_i <= M fails")
    if np.any(t.on_support(t.increment_sum - t.z) > tol):
        raise Inapplicable("sum of increments exceeds Z")
    drafts = []
    for q in chk.qs:
        inp = {"EZ": t.ez, "M": _est(t.norm(m, q))}
        for k, (variant, side) in enumerate((("plus", "upper_plus"), ("minus", "upper_minus"))):
            drafts.append(Draft(variant, _side_lhs(t, side, q),
                                lambda v, q=q, k=k: thm13_bounds(v["EZ"], v["M"], q)[k].value, inp, q))
    return drafts


# -- chaos -------------------------------------------------------------------------------

def _w_profile(ctx: Context, mode: Mode):
    t = ctx.table(mode)
    spec = ctx.built.extras["chaos"]
    return ctx.memo(("wprof",) + mode.key(), lambda: chaos_W_profile(spec, t.configs, seed=mode.seed))


def _ew(ctx: Context, mode: Mode) -> tuple[list[Estimate], bool, str]:
    t = ctx.table(mode)
    prof = _w_profile(ctx, mode)
    ew = [t.expect(prof.values[:, k]) for k in range(prof.values.shape[1])]
    return ew, all(prof.certified), "+".join(dict.fromkeys(prof.methods))


def h_chaos(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    thm = chk.theorem
    spec = ctx.built.extras["chaos"]
    d = spec.d
    t = ctx.table(mode)
    drafts = []
    if thm == "cor5":
        z2 = _est(t.norm("z", 2.0))
        for q in chk.qs:
            lhs = _est(t.norm("z", q))
            for variant, printed in (("geometric", False), ("as_printed", True)):
                drafts.append(Draft(variant, lhs, lambda v, q=q, p=printed: bonami_bound(q, v["z2"], d, p),
                                    {"z2": z2}, q))
        return drafts
    ew, cert, how = _ew(ctx, mode)
    inputs = {f"EW{j}": e for j, e in enumerate(ew, start=1)}

    def ews(v):
        return [v[f"EW{j}"] for j in range(1, d + 1)]

    if thm == "thm14":
        for q in chk.qs:
            lhs = _side_lhs(t, "upper_plus", q)
            for k, variant in enumerate(("first", "relaxed")):
                drafts.append(Draft(variant, lhs, lambda v, q=q, k=k: chaos_moment_bound(q, ews(v), d)[k].value,
                                    inputs, q, certified=cert, method_note=how))
        return drafts
    if thm == "w_chain":
        prof = _w_profile(ctx, mode)
        prev = _est(t.norm("z", 2.0))
        for k in range(1, d + 1):
            cur = _est(t.norm(prof.values[:, k - 1], 2.0))
            drafts.append(Draft(f"k={k}", cur, lambda v: math.sqrt(d) * v["prev"], {"prev": prev},
                                certified=cert, method_note=how))
            prev = cur
        return drafts
    # cor4
    if any(e.value <= 0 for e in ew):
        raise Inapplicable("E[W_j] must be positive")
    ez = t.ez
    for tt in chk.ts:
        lhs = _tail_prob(t, t.z, ez.value + tt)
        drafts.append(Draft("tail", lhs, lambda v, tt=tt: chaos_tail(tt, ews(v), d), inputs,
                            label=f"t={tt:g}", certified=cert, method_note=how))
    return drafts


# -- Boolean polynomials and triangles ----------------------------------------------------

def _em(ctx: Context, mode: Mode) -> list[Estimate]:
    t = ctx.table(mode)
    spec = ctx.built.extras["chaos"]

    def make():
        return [t.expect(boolean_M(spec, t.configs, k)) for k in range(spec.d)]
    return ctx.memo(("EM",) + mode.key(), make)


def h_boolean(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    thm = chk.theorem
    spec = ctx.built.extras["chaos"]
    d = spec.d
    t = ctx.table(mode)
    em = _em(ctx, mode)
    inputs = {"EZ": t.ez, **{f"EM{k}": e for k, e in enumerate(em)}}

    def ems(v):
        return [v[f"EM{k}"] for k in range(d)]

    drafts = []
    if thm == "thm15":
        for q in chk.qs:
            drafts.append(Draft("plus", _side_lhs(t, "upper_plus", q),
                                lambda v, q=q: boolean_moment_bound(q, v["EZ"], ems(v), d).value, inputs, q))
        return drafts
    # boolean_tail
    if t.ez.value <= 0 or any(e.value <= 0 for e in em):
        raise Inapplicable("E[Z] and E[M_k] must be positive")
    for tt in chk.ts:
        lhs = _tail_prob(t, t.z, t.ez.value + tt)
        drafts.append(Draft("tail", lhs, lambda v, tt=tt: boolean_tail(tt, v["EZ"], ems(v), d), inputs,
                            label=f"t={tt:g}"))
    return drafts


def h_triangles(ctx: Context, chk: Check, mode: Mode) -> list[Draft]:
    thm = chk.theorem
    sc = ctx.built.extras["triangles"]
    t = ctx.table(mode)
    n = sc.n_vertices
    if thm == "tri_ez":
        return [Draft("EZ", t.ez, lambda v, r=sc.EZ: r, within=True)]
    m1 = ctx.memo(("M1",) + mode.key(), lambda: sc.m1(t.configs))
    em1 = t.expect(m1)
    if thm == "tri_em1":
        return [Draft("EM1", em1, lambda v, r=sc.EM1_upper: r)]
    drafts = []
    if thm == "tri_m1_moment":
        for q in chk.qs:
            drafts.append(Draft("norm", _est(t.norm(m1, q)),
                                lambda v, q=q: triangle_m1_moment_bound(n, v["EM1"], q).value, {"EM1": em1}, q))
        return drafts
    if thm == "tri_cor3":
        for q in chk.qs:
            drafts.append(Draft("plus", _side_lhs(t, "upper_plus", q),
                                lambda v, q=q: triangle_cor3_bound(n, q, v["EM1"], v["EZ"]).value,
                                {"EM1": em1, "EZ": t.ez}, q))
        return drafts
    # tri_good
    zg = ctx.memo(("Zg",) + mode.key(), lambda: triangle_good_count(sc, t.configs))
    ezg = t.expect(zg)
    for q in chk.qs:
        drafts.append(Draft("plus", _centered_norm(t, zg, q, "plus"),
                            lambda v, q=q: triangle_good_bound(n, sc.p, q, v["EZg"]).value, {"EZg": ezg}, q))
    return drafts


HANDLERS: dict[str, Callable[[Context, Check, Mode], list[Draft]]] = {
    "efron_stein": h_efron_stein,
    **{k: h_general for k in ("thm1", "thm2", "thm3", "thm4", "cor1", "cor2", "cor3")},
    "thm7": h_thm7,
    "thm8": h_rosenthal,
    "thm9": h_rosenthal,
    **{k: h_ep for k in ("thm10", "thm11", "thm12", "lemma7", "lemma8")},
    "thm13": h_thm13,
    **{k: h_chaos for k in ("thm14", "cor4", "cor5", "w_chain")},
    "thm15": h_boolean,
    "boolean_tail": h_boolean,
    **{k: h_triangles for k in ("tri_ez", "tri_em1", "tri_m1_moment", "tri_good", "tri_cor3")},
}

assert set(HANDLERS) == set(THEOREM_RULES), "every theorem id needs a handler"

# (theorem, variant) rows whose right-hand side bounds ||(Z - E Z)_+||_q
UPPER_PLUS = frozenset({
    ("thm1", "plus"), ("thm2", "plus_tight"), ("thm2", "plus_relaxed"), ("thm3", "plus"), ("cor1", "plus"),
    ("cor3", "plus"), ("thm7", "plus"), ("thm8", "plus"), ("thm9", "plus"), ("thm10", "plus"),
    ("thm12", "first"), ("thm13", "plus"), ("thm14", "first"), ("thm14", "relaxed"), ("thm15", "plus"),
    ("tri_cor3", "plus"), ("tri_good", "plus"),
})


# -- rows ----------------------------------------------------------------------------------

def _finish(draft: Draft, check_id: str, theorem: str, mode: Mode) -> Row:
    method = mode.kind + (f"/{draft.method_note}" if draft.method_note and draft.status is None else "")
    if draft.status is not None:
        return Row(check_id, theorem, draft.q, math.nan, math.nan, math.nan, draft.status,
                   mode.kind if not draft.method_note else f"{mode.kind}: {draft.method_note}", 0.0)
    lhs = draft.lhs
    exact = mode.kind == "exact"
    vals = {k: (e.value if exact else _lowered(e)) for k, e in draft.inputs.items()}
    rhs = float(draft.rhs(vals))
    hw = 0.0 if exact else lhs.halfwidth
    if draft.within:
        ok = abs(lhs.value - rhs) <= (1e-10 * max(1.0, abs(rhs)) if exact else WITHIN_CI * hw)
        margin = WITHIN_CI * hw - abs(lhs.value - rhs) if not exact else 0.0 - abs(lhs.value - rhs)
    else:
        ok = (lhs.value <= rhs + TOL) if exact else (lhs.value + hw <= rhs)
        margin = rhs - lhs.value
    if ok and draft.certified:
        status = "pass"
    elif exact and draft.certified:
        status = "fail"
    else:
        status = "not_asserted"
    return Row(check_id, theorem, draft.q, lhs.value, rhs, margin, status, method, hw)


def _placeholder_drafts(chk: Check, status: str, note: str) -> list[Draft]:
    if chk.qs:
        return [Draft("all", Estimate(math.nan, 0.0), q=q, status=status, method_note=note) for q in chk.qs]
    if chk.ts:
        return [Draft("all", Estimate(math.nan, 0.0), label=f"t={tt:g}", status=status, method_note=note)
                for tt in chk.ts]
    return [Draft("all", Estimate(math.nan, 0.0), status=status, method_note=note)]


def run_check(ctx: Context, index: int, chk: Check, mode_override: Mode | None = None) -> list[Row]:
    mode = mode_override or chk.mode or Mode()
    try:
        drafts = HANDLERS[chk.theorem](ctx, chk, mode)
    except EnumerationUnavailable as exc:
        drafts = _placeholder_drafts(chk, "unavailable", str(exc))
    except Inapplicable as exc:
        drafts = _placeholder_drafts(chk, "inapplicable", str(exc))
    rows = []
    for d in drafts:
        parts = [ctx.scenario.name, str(index), f"{chk.theorem}.{d.variant}"]
        if d.q is not None:
            parts.append(f"q={d.q:g}")
        if d.label:
            parts.append(d.label)
        rows.append(_finish(d, "/".join(parts), chk.theorem, mode))
    return rows


def execute(scenario: Scenario, mode_override: Mode | None = None, jobs: int = 1) -> Report:
    """Run every check of ``scenario``; rows follow declaration order."""
    ctx = Context(scenario)
    checks = list(enumerate(scenario.checks))
    if jobs <= 1 or len(checks) <= 1:
        results = [run_check(ctx, k, c, mode_override) for k, c in checks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda kc: run_check(ctx, kc[0], kc[1], mode_override), checks))
    return Report([row for rows in results for row in rows])


def execute_all(scenarios, mode_override: Mode | None = None, jobs: int = 1) -> Report:
    rows = []
    for sc in scenarios:
        rows.extend(execute(sc, mode_override, jobs).rows)
    return Report(rows)
