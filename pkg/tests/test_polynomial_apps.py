import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from momentbounds.bounds import BoundInputs, moment_bound
from momentbounds.constants import KAPPA
from momentbounds.increments import IncrementTable
from momentbounds.polynomial_apps import (
    ChaosSpec,
    bonami_bound,
    boolean_M,
    boolean_moment_bound,
    boolean_value,
    chaos_functional,
    chaos_moment_bound,
    chaos_space,
    chaos_value,
    chaos_W,
    chaos_W_profile,
    monomials,
    triangle_cor3_bound,
    triangle_good_bound,
    triangle_good_count,
    triangle_m1_moment_bound,
    triangle_scenario,
)


def pair_spec(n, coeffs, kind="rademacher", p=0.5):
    return ChaosSpec.full(n, 2, np.atleast_2d(coeffs), kind, p)


def test_spec_validation():
    with pytest.raises(ValueError):
        ChaosSpec.full(2, 3)
    with pytest.raises(ValueError):
        ChaosSpec(3, 2, [[0, 0]], [[1.0]])
    with pytest.raises(ValueError):
        ChaosSpec(3, 2, [[0, 5]], [[1.0]])
    with pytest.raises(ValueError):
        ChaosSpec(3, 2, [[0, 1]], [[1.0, 2.0]])
    with pytest.raises(ValueError):
        ChaosSpec(3, 2, [[0, 1]], [[-1.0]], "bernoulli")
    with pytest.raises(ValueError):
        ChaosSpec(3, 2, [[0, 1]], [[1.0]], "gaussian")


def test_chaos_value_examples():
    sp = ChaosSpec.full(2, 2)
    for x in itertools.product([-1, 1], repeat=2):
        assert chaos_value(sp, np.array(x, dtype=float)) == 1.0
    assert chaos_value(ChaosSpec.full(3, 2, kind="bernoulli"), np.ones(3)) == 3.0
    zero = ChaosSpec.full(3, 2, np.zeros((1, 3)))
    assert chaos_value(zero, np.array([1.0, -1.0, 1.0])) == 0.0
    with pytest.raises(ValueError):
        boolean_value(sp, np.ones(2))


def test_monomials():
    sp = ChaosSpec.full(3, 2)
    m = monomials(sp, np.array([[1.0, -1.0, 2.0]]))
    assert m.tolist() == [[-1.0, 2.0, -2.0]]


def _w1_oracle(t, x):
    n = len(x)
    grad = [sum(t[(min(i, j), max(i, j))] * x[j] for j in range(n) if j != i) for i in range(n)]
    return math.sqrt(math.fsum(g * g for g in grad))


def _w2_oracle(t, n):
    mpmath.mp.dps = 30
    a = mpmath.zeros(n, n)
    for (i, j), c in t.items():
        a[i, j] = a[j, i] = c
    ev = mpmath.eigsy(a)[0]
    return float(max(abs(v) for v in ev))


def test_w_examples():
    sp = ChaosSpec.full(2, 2)
    w1, ok1 = chaos_W(sp, [1, -1], 1)
    w2, ok2 = chaos_W(sp, [1, -1], 2)
    assert w1 == pytest.approx(math.sqrt(2)) and ok1
    assert w2 == pytest.approx(1.0, abs=1e-12) and ok2
    zero = ChaosSpec.full(3, 2, np.zeros((1, 3)))
    assert chaos_W(zero, [1, 1, 1], 1)[0] == 0.0 and chaos_W(zero, [1, 1, 1], 2)[0] == 0.0
    with pytest.raises(ValueError):
        chaos_W(sp, [1, 1], 3)


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.lists(st.sampled_from([-1.0, 1.0]), min_size=4,
                                                                      max_size=4))
def test_w_against_oracles(coeffs, x):
    spec = pair_spec(4, coeffs)
    t = {tuple(int(v) for v in row): c for row, c in zip(spec.subsets, coeffs)}
    w1, _ = chaos_W(spec, x, 1)
    w2, ok = chaos_W(spec, x, 2)
    assert ok
    assert w1 == pytest.approx(_w1_oracle(t, x), abs=1e-12)
    assert w2 == pytest.approx(_w2_oracle(t, 4), abs=1e-9)
    # chain: W_k <= sqrt(d) W_{k-1} pointwise is not claimed; W_2 <= W_1 needs no sqrt at the sup
    assert w2 <= max(w1, w2)


def test_w3_alternating_symmetric_tensor():
    spec = ChaosSpec.full(3, 3)
    w3, certified = chaos_W(spec, [1, 1, 1], 3)
    assert not certified
    assert w3 == pytest.approx(2 / math.sqrt(3), abs=1e-6)


def test_w_profile():
    spec = pair_spec(4, [1, -0.5, 0.25, 2, 1, -1])
    configs = chaos_space(spec).grid()[0]
    prof = chaos_W_profile(spec, configs)
    assert prof.values.shape == (16, 2)
    assert prof.methods == ("closed_form", "power_iteration")
    assert all(prof.certified)
    assert np.all(prof.values[:, 1] == prof.values[0, 1])


def test_chaos_moment_bound_examples():
    first, relaxed = chaos_moment_bound(4, [1.0, 0.5], 2)
    assert relaxed.value == pytest.approx(math.sqrt(16 * KAPPA) + 16 * KAPPA * 0.5)
    assert relaxed.value == pytest.approx(14.675, abs=1e-3)
    assert first.value <= relaxed.value
    (f1, r1) = chaos_moment_bound(3, [2.0], 1)
    assert r1.value == pytest.approx(math.sqrt(4 * KAPPA * 3) * 2.0)
    with pytest.raises(ValueError):
        chaos_moment_bound(1.5, [1.0], 1)
    with pytest.raises(ValueError):
        chaos_moment_bound(2, [1.0], 2)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_thm14_holds_on_enumeration(q):
    spec = pair_spec(4, [1, -0.5, 0.25, 2, 1, -1])
    space = chaos_space(spec)
    t = IncrementTable.exact(space, chaos_functional(spec))
    prof = chaos_W_profile(spec, t.configs)
    ew = [t.expect(prof.values[:, k]).value for k in range(2)]
    for b in chaos_moment_bound(q, ew, 2):
        assert t.norm("z_plus", q).value <= b.value


@pytest.mark.parametrize("q", [2, 3, 4])
@pytest.mark.parametrize("as_printed", [False, True])
def test_bonami_holds(q, as_printed):
    spec = pair_spec(4, [1, -0.5, 0.25, 2, 1, -1])
    t = IncrementTable.exact(chaos_space(spec), chaos_functional(spec))
    assert t.norm("z", q).value <= bonami_bound(q, t.norm("z", 2).value, 2, as_printed)


def test_bonami_forms():
    r = math.sqrt(4 * KAPPA * 2 * 2)
    assert bonami_bound(2, 1.0, 2) == pytest.approx(1 + r + r * r)
    assert bonami_bound(2, 1.0, 2, as_printed=True) == pytest.approx((math.sqrt(4 * KAPPA * 2 * 8) - 1) / (r - 1))


def _m_oracle(spec, x, k):
    best = -math.inf
    t = spec.coeffs[0]
    for J in itertools.combinations(range(spec.n), spec.d - k):
        s = 0.0
        for row, c in zip(spec.subsets.tolist(), t):
            if set(J) <= set(row):
                s += c * math.prod(x[v] for v in row if v not in J)
        best = max(best, s)
    return best


def test_boolean_M_examples():
    spec = ChaosSpec.full(3, 2, kind="bernoulli")
    assert boolean_M(spec, np.ones(3), 1) == 2.0
    assert boolean_M(spec, np.ones(3), 0) == 1.0
    assert boolean_M(spec, np.zeros(3), 1) == 0.0
    assert boolean_M(spec, np.zeros(3), 0) == 1.0
    with pytest.raises(ValueError):
        boolean_M(spec, np.ones(3), 2)
    with pytest.raises(ValueError):
        boolean_M(ChaosSpec.full(3, 2), np.ones(3), 1)


@given(st.lists(st.floats(0, 3), min_size=10, max_size=10), st.lists(st.sampled_from([0.0, 1.0]), min_size=5,
                                                                       max_size=5))
def test_boolean_M_oracle(coeffs, x):
    spec = ChaosSpec.full(5, 3, np.atleast_2d(coeffs), "bernoulli")
    for k in range(3):
        assert boolean_M(spec, np.array(x), k) == pytest.approx(_m_oracle(spec, x, k), abs=1e-12)


@given(st.lists(st.floats(0, 3), min_size=10, max_size=10), st.lists(st.sampled_from([0.0, 1.0]), min_size=5,
                                                                       max_size=5), st.integers(0, 4))
def test_boolean_monotone(coeffs, x, i):
    spec = ChaosSpec.full(5, 3, np.atleast_2d(coeffs), "bernoulli")
    lo = np.array(x)
    hi = lo.copy()
    hi[i] = 1.0
    assert chaos_value(spec, hi) >= chaos_value(spec, lo) - 1e-12
    for k in range(3):
        assert boolean_M(spec, hi, k) >= boolean_M(spec, lo, k) - 1e-12


@pytest.mark.parametrize("n_vertices", [4, 5])
def test_self_bounding_structure(n_vertices):
    sc = triangle_scenario(n_vertices, 0.5)
    t = IncrementTable.exact(sc.space(), chaos_functional(sc.spec))
    m1 = sc.m1(t.configs)
    z = t.z
    for i in range(sc.spec.n):
        d = z - t.reduced(i)
        assert np.all(d >= 0) and np.all(d <= m1 + 1e-12)
    assert np.all(t.increment_sum <= sc.spec.d * z + 1e-12)


def test_boolean_moment_bound():
    b = boolean_moment_bound(3, 2.0, [1.5], 1)
    assert b.value == pytest.approx(2 * (math.sqrt(3 * KAPPA) * math.sqrt(3.0) + 3 * KAPPA * 1.5))
    assert boolean_moment_bound(2, 0.0, [0.0, 0.0], 2).value == 0.0
    with pytest.raises(ValueError):
        boolean_moment_bound(2, 1.0, [1.0], 2)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_thm15_on_pairs(q):
    spec = ChaosSpec.full(4, 2, kind="bernoulli")
    t = IncrementTable.exact(chaos_space(spec), chaos_functional(spec))
    em = [t.expect(boolean_M(spec, t.configs, k)).value for k in range(2)]
    assert t.norm("z_plus", q).value <= boolean_moment_bound(q, t.ez.value, em, 2).value


def test_triangle_scenario():
    sc = triangle_scenario(25, 0.2)
    assert sc.spec.n == 300 and sc.spec.subsets.shape == (2300, 3)
    assert sc.EZ == pytest.approx(18.4)
    assert sc.EM1_upper == pytest.approx(2 * (math.log(25) + 1.0))
    assert sc.EM1_upper == pytest.approx(8.4378, abs=1e-4)
    with pytest.raises(ValueError):
        triangle_scenario(2, 0.5)
    with pytest.raises(ValueError):
        triangle_scenario(5, 1.0)


def _codegree_oracle(sc, x):
    adj = {e: x[k] for k, e in enumerate(sc.edges)}

    def edge(u, v):
        return adj[(min(u, v), max(u, v))]

    n = sc.n_vertices
    return max(sum(edge(u, w) * edge(v, w) for w in range(n) if w not in (u, v))
               for u, v in itertools.combinations(range(n), 2))


def test_triangle_m1_and_exact_mean():
    sc = triangle_scenario(5, 0.5)
    configs, w = sc.space().grid()
    m1 = sc.m1(configs)
    rng = np.random.default_rng(2)
    for r in rng.choice(len(configs), 50, replace=False):
        assert m1[r] == _codegree_oracle(sc, configs[r])
    em1 = math.fsum(m1 * w)
    assert em1 <= 2 * (math.log(5) + 5 * 0.25)
    z = chaos_value(sc.spec, configs)
    assert math.fsum(z * w) == pytest.approx(sc.EZ, abs=1e-12)


def test_triangle_good_count():
    sc = triangle_scenario(5, 0.5)
    full = np.ones(len(sc.edges))
    # complete K5: each edge in 3 triangles, not below n p = 2.5
    assert triangle_good_count(sc, full)[0] == 0
    one = np.zeros(len(sc.edges))
    for e in [(0, 1), (0, 2), (1, 2)]:
        one[sc.edges.index(e)] = 1
    assert triangle_good_count(sc, one)[0] == 1


def test_triangle_bounds():
    b = triangle_good_bound(25, 0.2, 2, 10.0)
    assert b.value == pytest.approx(math.sqrt(KAPPA) * (math.sqrt(30 * 10) + 30 / math.sqrt(2)))
    assert triangle_m1_moment_bound(25, 8.0, 3).value == 10.0
    assert triangle_m1_moment_bound(5, 8.0, 3).value == 5.0
    with pytest.raises(ValueError):
        triangle_m1_moment_bound(5, 1.0, 2.5)
    c = triangle_cor3_bound(25, 2, 8.4, 18.4)
    cor3 = moment_bound("cor3", BoundInputs(2, expectation_Z=18.4, norm_W_q=8.4 * 3, norm_M_q=1), "plus")
    assert c.value > 0 and cor3.value > 0


@pytest.mark.parametrize("q", [2, 3, 4])
def test_triangle_good_holds(q):
    sc = triangle_scenario(5, 0.5)
    configs, w = sc.space().grid()
    zg = triangle_good_count(sc, configs)
    ezg = math.fsum(zg * w)
    lhs = math.fsum(np.maximum(zg - ezg, 0) ** q * w) ** (1 / q)
    assert lhs <= triangle_good_bound(5, 0.5, q, ezg).value
