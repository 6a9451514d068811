"""Scenario files: parsing, validation and construction of spaces and functionals.

A scenario document is YAML holding either one scenario mapping or a
``scenarios:`` list of them::

    scenarios:
      - name: khinchine_3
        space: {kind: rademacher, n: 3}
        functional: {kind: sum_weights, weights: [1, 2, 3]}
        checks:
          - {theorem: thm7, q: [2, 3, 4]}
          - {theorem: thm2, q: [2, 2.5], mode: {mc: {seed: 1, count: 2000}}}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import yaml

from .classical_apps import (FunctionClass, cond_rademacher_functional, ep_functional, linear_class,
                             sum_functional)
from .increments import Functional, Reduction
from .polynomial_apps import ChaosSpec, chaos_functional, triangle_scenario
from .product_space import Marginal, ProductSpace, bernoulli, build_space, rademacher

__all__ = [
    "Mode",
    "Check",
    "Scenario",
    "ScenarioError",
    "Built",
    "THEOREM_RULES",
    "FUNCTIONAL_KINDS",
    "parse_scenario",
    "parse_scenarios",
    "build",
]


class ScenarioError(ValueError):
    """A scenario document failed to parse or validate."""

    def __init__(self, message: str, field_path: str = "", line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        at = f"field '{field_path}': " if field_path else ""
        super().__init__(f"{where}{at}{message}")
        self.field_path = field_path
        self.line = line


@dataclass(frozen=True)
class Mode:
    kind: str = "exact"
    seed: int = 0
    count: int = 10_000

    def key(self) -> tuple:
        return (self.kind,) if self.kind == "exact" else (self.kind, self.seed, self.count)


@dataclass(frozen=True)
class Rule:
    """Parse-time constraints for one theorem id."""
    kinds: frozenset | None = None   # functional kinds it applies to; None = any
    min_q: float = 2.0
    integer: bool = False
    uses_q: bool = True
    uses_t: bool = False


_ANY = None
_SUMS = frozenset({"sum_weights"})
_CHAOS = frozenset({"chaos"})
_BOOL = frozenset({"boolean", "triangles"})
_TRI = frozenset({"triangles"})

THEOREM_RULES: dict[str, Rule] = {
    "efron_stein": Rule(_ANY, uses_q=False),
    "thm1": Rule(_ANY, integer=True),
    "thm2": Rule(_ANY),
    "thm3": Rule(_ANY),
    "thm4": Rule(_ANY),
    "cor1": Rule(_ANY, min_q=1.0),
    "cor2": Rule(_ANY, integer=True),
    "cor3": Rule(_ANY),
    "thm7": Rule(_SUMS, integer=True),
    "thm8": Rule(_SUMS, integer=True),
    "thm9": Rule(_SUMS, integer=True),
    "thm10": Rule(frozenset({"sup_linear"}), integer=True),
    "thm11": Rule(frozenset({"ep_class"})),
    "thm12": Rule(frozenset({"ep_class"})),
    "lemma7": Rule(frozenset({"ep_class"}), uses_q=False),
    "lemma8": Rule(frozenset({"ep_class"}), uses_q=False),
    "thm13": Rule(frozenset({"cond_rademacher"})),
    "thm14": Rule(_CHAOS),
    "cor4": Rule(_CHAOS, uses_q=False, uses_t=True),
    "cor5": Rule(_CHAOS),
    "w_chain": Rule(_CHAOS, uses_q=False),
    "thm15": Rule(_BOOL),
    "boolean_tail": Rule(_BOOL, uses_q=False, uses_t=True),
    "tri_ez": Rule(_TRI, uses_q=False),
    "tri_em1": Rule(_TRI, uses_q=False),
    "tri_m1_moment": Rule(_TRI, min_q=1.0, integer=True),
    "tri_good": Rule(_TRI),
    "tri_cor3": Rule(_TRI),
}


@dataclass(frozen=True)
class Check:
    theorem: str
    qs: tuple[float, ...] = ()
    ts: tuple[float, ...] = ()
    theta: float | None = None
    mode: Mode | None = None
    params: dict = field(default_factory=dict, compare=False)
    line: int | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    space: dict
    functional: dict
    reduction: Any = None
    checks: tuple[Check, ...] = ()
    line: int | None = None


# -- YAML with line numbers ----------------------------------------------------------

class _LineDict(dict):
    line: int | None = None


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    d = _LineDict(loader.construct_mapping(node, deep=True))
    d.line = node.start_mark.line + 1
    return d


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _line(obj, default=None):
    return getattr(obj, "line", default)


def _number(value, path: str, line) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", path, line)
    if not math.isfinite(value):
        raise ScenarioError("must be finite", path, line)
    return float(value)


def _number_list(value, path: str, line) -> tuple[float, ...]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ScenarioError("expected a number or a nonempty list of numbers", path, line)
    return tuple(_number(v, f"{path}[{k}]", line) for k, v in enumerate(value))


def _parse_mode(raw, path: str, line) -> Mode:
    if raw == "exact":
        return Mode()
    if raw == "mc":
        return Mode("mc")
    if isinstance(raw, dict) and set(raw) == {"mc"}:
        body = raw["mc"] or {}
        if not isinstance(body, dict):
            raise ScenarioError("mc mode takes a mapping with seed and count", path, line)
        seed = body.get("seed", 0)
        count = body.get("count", 10_000)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ScenarioError(f"seed must be a nonnegative integer, got {seed!r}", f"{path}.seed", line)
        if isinstance(count, bool) or not isinstance(count, int) or count < 100:
            raise ScenarioError(f"count must be an integer >= 100, got {count!r}", f"{path}.count", line)
        return Mode("mc", seed, count)
    raise ScenarioError(f"mode must be 'exact', 'mc' or {{mc: {{seed, count}}}}, got {raw!r}", path, line)


def _parse_check(raw, path: str, kind: str) -> Check:
    line = _line(raw)
    if not isinstance(raw, dict):
        raise ScenarioError("each check must be a mapping", path, line)
    theorem = raw.get("theorem")
    if theorem not in THEOREM_RULES:
        raise ScenarioError(f"unknown theorem id {theorem!r}; known ids: {', '.join(sorted(THEOREM_RULES))}",
                            f"{path}.theorem", line)
    rule = THEOREM_RULES[theorem]
    if rule.kinds is not None and kind not in rule.kinds:
        raise ScenarioError(f"{theorem} applies to functionals of kind {sorted(rule.kinds)}, not {kind!r}",
                            f"{path}.theorem", line)
    qs: tuple[float, ...] = ()
    ts: tuple[float, ...] = ()
    if rule.uses_q:
        if "q" not in raw:
            raise ScenarioError("missing q list", f"{path}.q", line)
        qs = _number_list(raw["q"], f"{path}.q", line)
        for k, q in enumerate(qs):
            if q < rule.min_q:
                raise ScenarioError(f"{theorem} requires q >= {rule.min_q:g}, got {q:g}", f"{path}.q[{k}]", line)
            if rule.integer and q != int(q):
                raise ScenarioError(f"{theorem} requires integer q, got {q:g}", f"{path}.q[{k}]", line)
    if rule.uses_t:
        if "t" not in raw:
            raise ScenarioError("missing t list", f"{path}.t", line)
        ts = _number_list(raw["t"], f"{path}.t", line)
        if any(t <= 0 for t in ts):
            raise ScenarioError("t values must be positive", f"{path}.t", line)
    theta = raw.get("theta")
    if theta is not None:
        theta = _number(theta, f"{path}.theta", line)
        if not 0.0 < theta <= 1.0:
            raise ScenarioError(f"theta must lie in (0, 1], got {theta:g}", f"{path}.theta", line)
    mode = _parse_mode(raw["mode"], f"{path}.mode", line) if "mode" in raw else None
    params = raw.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ScenarioError("params must be a mapping", f"{path}.params", line)
    known = {"theorem", "q", "t", "theta", "mode", "params"}
    extra = set(raw) - known
    if extra:
        raise ScenarioError(f"unknown keys {sorted(extra)}", path, line)
    return Check(theorem, qs, ts, theta, mode, dict(params), line)


def _parse_one(raw, path: str) -> Scenario:
    line = _line(raw)
    if not isinstance(raw, dict):
        raise ScenarioError("a scenario must be a mapping", path, line)
    for key in ("name", "space", "functional"):
        if key not in raw:
            raise ScenarioError(f"missing required field {key!r}", f"{path}.{key}", line)
    name = raw["name"]
    if not isinstance(name, str) or not name:
        raise ScenarioError("name must be a nonempty string", f"{path}.name", line)
    space = raw["space"]
    if not isinstance(space, dict):
        raise ScenarioError("space must be a mapping", f"{path}.space", line)
    functional = raw["functional"]
    if not isinstance(functional, dict) or "kind" not in functional:
        raise ScenarioError("functional must be a mapping with a kind", f"{path}.functional", _line(functional, line))
    kind = functional["kind"]
    if kind not in FUNCTIONAL_KINDS:
        raise ScenarioError(f"unknown functional kind {kind!r}; known kinds: {', '.join(sorted(FUNCTIONAL_KINDS))}",
                            f"{path}.functional.kind", _line(functional, line))
    checks_raw = raw.get("checks", [])
    if not isinstance(checks_raw, list):
        raise ScenarioError("checks must be a list", f"{path}.checks", line)
    checks = tuple(_parse_check(c, f"{path}.checks[{k}]", kind) for k, c in enumerate(checks_raw))
    extra = set(raw) - {"name", "space", "functional", "reduction", "checks"}
    if extra:
        raise ScenarioError(f"unknown keys {sorted(extra)}", path, line)
    sc = Scenario(name, dict(space), dict(functional), raw.get("reduction"), checks, line)
    # construct eagerly so parameter errors surface at parse time
    try:
        build(sc)
    except ScenarioError:
        raise
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        raise ScenarioError(str(exc), f"{path}.functional", _line(functional, line)) from None
    return sc


def parse_scenarios(text: str) -> list[Scenario]:
    """All scenarios in a document."""
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"syntax error: {getattr(exc, 'problem', exc)}", "",
                            mark.line + 1 if mark else None) from None
    if isinstance(doc, dict) and "scenarios" in doc:
        items = doc["scenarios"]
        if not isinstance(items, list) or not items:
            raise ScenarioError("scenarios must be a nonempty list", "scenarios", _line(doc))
        out = [_parse_one(s, f"scenarios[{k}]") for k, s in enumerate(items)]
    elif isinstance(doc, dict):
        out = [_parse_one(doc, "scenario")]
    else:
        raise ScenarioError("document must be a mapping", "", None)
    names = [s.name for s in out]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ScenarioError(f"duplicate scenario names {sorted(dup)}", "name")
    return out


def parse_scenario(text: str) -> Scenario:
    """The single scenario in a document."""
    items = parse_scenarios(text)
    if len(items) != 1:
        raise ScenarioError(f"expected one scenario, found {len(items)}", "scenarios")
    return items[0]


# -- construction ---------------------------------------------------------------------

@dataclass
class Built:
    space: ProductSpace
    functional: Functional
    extras: dict = field(default_factory=dict)


def _build_space(spec: dict, n_default: int | None = None) -> ProductSpace:
    kind = spec.get("kind", "marginals" if "marginals" in spec else None)
    n = spec.get("n", n_default)
    if kind == "rademacher":
        if n is None:
            raise ValueError("space needs n")
        return rademacher(int(n))
    if kind == "bernoulli":
        if n is None:
            raise ValueError("space needs n")
        return bernoulli(int(n), float(spec.get("p", 0.5)))
    if kind == "marginals":
        margs = []
        for m in spec["marginals"]:
            if "support" in m:
                margs.append(Marginal.finite(m["support"], m.get("probabilities")))
            elif "uniform" in m:
                margs.append(Marginal.uniform(*m["uniform"]))
            elif "gaussian" in m:
                margs.append(Marginal.gaussian(*m["gaussian"]))
            else:
                raise ValueError(f"unknown marginal {dict(m)!r}")
        return build_space(margs)
    raise ValueError(f"unknown space kind {kind!r}")


def _reduction(spec, default: Reduction) -> Reduction:
    if spec is None or spec == "default":
        return default
    if spec == "infimum":
        return Reduction.infimum()
    if isinstance(spec, dict) and "baseline" in spec:
        return Reduction.at_baseline(spec["baseline"])
    raise ValueError(f"unknown reduction {spec!r}; use default, infimum or {{baseline: [...]}}")


def _fn_sum(params, space_spec, reduction):
    space = _build_space(space_spec)
    w = params.get("weights")
    if w is not None and len(w) != space.n:
        raise ValueError(f"weights has {len(w)} entries for {space.n} coordinates")
    weights = np.ones(space.n) if w is None else np.asarray(w, dtype=float)
    base = sum_functional(weights)
    return Built(space, base.with_reduction(_reduction(reduction, base.reduction)), {"weights": weights})


def _fn_sup_linear(params, space_spec, reduction):
    space = _build_space(space_spec)
    vectors = np.atleast_2d(np.asarray(params["vectors"], dtype=float))
    if vectors.shape[1] != space.n:
        raise ValueError(f"vectors need {space.n} entries each")
    fc = linear_class(vectors, space)
    base = ep_functional(space, fc)
    return Built(space, base.with_reduction(_reduction(reduction, base.reduction)),
                 {"vectors": vectors, "fclass": fc})


def _fn_max_coord(params, space_spec, reduction):
    space = _build_space(space_spec)

    def func(c):
        return c.max(axis=1)

    return Built(space, Functional(func, _reduction(reduction, Reduction.infimum()), "max_coord"))


def _fn_distinct(params, space_spec, reduction):
    """Number of distinct values among the coordinates; ``Z_i`` forgets coordinate i."""
    space = _build_space(space_spec)

    def count(c):
        s = np.sort(c, axis=1)
        return 1.0 + (np.diff(s, axis=1) != 0).sum(axis=1) if c.shape[1] else np.zeros(c.shape[0])

    def rule(c, i):
        return count(np.delete(c, i, axis=1))

    return Built(space, Functional(count, _reduction(reduction, Reduction.user(rule)), "distinct_values"))


def _chaos_spec(params, space_spec, kind):
    n = int(space_spec["n"])
    d = int(params["d"])
    p = float(space_spec.get("p", 0.5))
    if "subsets" in params:
        subsets = np.asarray(params["subsets"], dtype=np.int64)
        coeffs = np.asarray(params["coeffs"], dtype=float)
        return ChaosSpec(n, d, subsets, coeffs, kind, p)
    coeffs = params.get("coeffs")
    if coeffs is not None:
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if coeffs.shape[1] != math.comb(n, d):
            raise ValueError(f"each coefficient vector needs C({n},{d}) = {math.comb(n, d)} entries")
    return ChaosSpec.full(n, d, coeffs, kind, p)


def _fn_chaos(params, space_spec, reduction):
    if space_spec.get("kind") != "rademacher":
        raise ValueError("chaos functionals live on a rademacher space")
    spec = _chaos_spec(params, space_spec, "rademacher")
    base = chaos_functional(spec)
    return Built(_build_space(space_spec), base.with_reduction(_reduction(reduction, base.reduction)),
                 {"chaos": spec})


def _fn_boolean(params, space_spec, reduction):
    if space_spec.get("kind") != "bernoulli":
        raise ValueError("Boolean polynomials live on a bernoulli space")
    spec = _chaos_spec(params, space_spec, "bernoulli")
    base = chaos_functional(spec)
    return Built(_build_space(space_spec), base.with_reduction(_reduction(reduction, base.reduction)),
                 {"chaos": spec})


def _fn_triangles(params, space_spec, reduction):
    nv = int(params["n_vertices"])
    p = float(space_spec.get("p", params.get("p", 0.5)))
    sc = triangle_scenario(nv, p)
    if "n" in space_spec and int(space_spec["n"]) != len(sc.edges):
        raise ValueError(f"a triangle scenario on {nv} vertices has {len(sc.edges)} edge coordinates")
    base = chaos_functional(sc.spec)
    return Built(sc.space(), base.with_reduction(_reduction(reduction, base.reduction)),
                 {"chaos": sc.spec, "triangles": sc})


def _function_class(params, space) -> FunctionClass:
    fc = FunctionClass.from_arrays(params["tables"], bool(params.get("centered", False)),
                                   params.get("absolute"))
    fc.validate(space)
    return fc


def _fn_ep(params, space_spec, reduction):
    space = _build_space(space_spec)
    fc = _function_class(params, space)
    base = ep_functional(space, fc)
    return Built(space, base.with_reduction(_reduction(reduction, base.reduction)), {"fclass": fc})


def _fn_cond_rad(params, space_spec, reduction):
    space = _build_space(space_spec)
    fc = _function_class(params, space)
    base = cond_rademacher_functional(space, fc)
    return Built(space, base.with_reduction(_reduction(reduction, base.reduction)), {"fclass": fc})


def _fn_user_table(params, space_spec, reduction):
    """``Z`` listed over the grid in lexicographic (C) order of the support indices."""
    space = _build_space(space_spec)
    values = np.asarray(params["values"], dtype=float)
    shape = space.shape
    if values.size != math.prod(shape):
        raise ValueError(f"values needs {math.prod(shape)} entries, got {values.size}")
    tensor = values.reshape(shape)
    supports = [np.asarray(m.support, dtype=float) for m in space.marginals]

    def func(c):
        idx = []
        for i, s in enumerate(supports):
            pos = np.searchsorted(np.sort(s), c[:, i])
            order = np.argsort(s)
            idx.append(order[np.minimum(pos, s.size - 1)])
        return tensor[tuple(idx)]

    return Built(space, Functional(func, _reduction(reduction, Reduction.infimum()), "user_table"))


FUNCTIONAL_KINDS: dict[str, Callable[..., Built]] = {
    "sum_weights": _fn_sum,
    "sup_linear": _fn_sup_linear,
    "max_coord": _fn_max_coord,
    "distinct_values": _fn_distinct,
    "chaos": _fn_chaos,
    "boolean": _fn_boolean,
    "triangles": _fn_triangles,
    "ep_class": _fn_ep,
    "cond_rademacher": _fn_cond_rad,
    "user_table": _fn_user_table,
}


def build(sc: Scenario) -> Built:
    kind = sc.functional["kind"]
    params = {k: v for k, v in sc.functional.items() if k != "kind"}
    return FUNCTIONAL_KINDS[kind](params, sc.space, sc.reduction)
