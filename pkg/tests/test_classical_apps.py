import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from momentbounds.classical_apps import (
    FunctionClass,
    cond_rademacher_functional,
    conditional_rademacher,
    ep_bounds,
    ep_functional,
    ep_stats,
    EPStats,
    khinchine_bound,
    lemma7_check,
    lemma8_check,
    linear_class,
    marcinkiewicz_bound,
    rosenthal_bounds,
    sum_functional,
    sum_stats,
    thm13_bounds,
)
from momentbounds.constants import KAPPA, K
from momentbounds.increments import IncrementTable
from momentbounds.product_space import Marginal, bernoulli, build_space, rademacher


def brute_norm(space, fn, q):
    """E[|fn(x)|^q]^(1/q) by explicit enumeration."""
    total = []
    for combo in itertools.product(*[list(zip(m.support, m.probabilities)) for m in space.marginals]):
        x = tuple(v for v, _ in combo)
        total.append(math.prod(w for _, w in combo) * abs(fn(x)) ** q)
    return math.fsum(total) ** (1 / q)


def test_khinchine_examples():
    plus, norm = khinchine_bound([1, 1], 2)
    assert plus.value == pytest.approx(math.sqrt(4 * K) * math.sqrt(2))
    assert plus.value == pytest.approx(2.7349, abs=1e-4)
    assert brute_norm(rademacher(2), lambda x: max(x[0] + x[1], 0), 2) == pytest.approx(1.0)
    assert norm.value == pytest.approx(2 ** 0.5 * plus.value)
    with pytest.raises(ValueError):
        khinchine_bound([1, 1], 2.5)
    with pytest.raises(ValueError):
        khinchine_bound([], 2)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.integers(2, 12), st.floats(0.1, 10))
def test_khinchine_homogeneous(a, q, lam):
    base = khinchine_bound(a, q)
    scaled = khinchine_bound([lam * x for x in a], q)
    for b, s in zip(base, scaled):
        assert s.value == pytest.approx(lam * b.value, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("q", [2, 3, 4, 6])
def test_khinchine_holds_by_brute_force(q):
    a = [1.0, 2.0, 0.5, 1.5]
    sp = rademacher(4)
    lhs = brute_norm(sp, lambda x: max(sum(ai * xi for ai, xi in zip(a, x)), 0.0), q)
    assert lhs <= khinchine_bound(a, q)[0].value
    full = brute_norm(sp, lambda x: sum(ai * xi for ai, xi in zip(a, x)), q)
    sumsq = brute_norm(sp, lambda x: sum((ai * xi) ** 2 for ai, xi in zip(a, x)), q / 2)
    assert full <= marcinkiewicz_bound(q, sumsq).value


def test_rosenthal_examples():
    (thm9,) = rosenthal_bounds("centered_thm9", {"sigma": 1.0, "norm_Y_q": 0.0}, 2, 0.999999999)
    assert thm9.value == pytest.approx(math.sqrt(2 * KAPPA * 3 * 2), rel=1e-8)
    assert thm9.value == pytest.approx(3.905, abs=1e-3)
    _, lower, _ = rosenthal_bounds("nonneg_thm8", {"EZ": 1, "sum_EX2": 4, "norm_max_q": 1}, 4, 0.5)
    assert lower.value == pytest.approx(math.sqrt(K * 16))
    assert lower.value == pytest.approx(3.868, abs=1e-3)
    with pytest.raises(ValueError):
        rosenthal_bounds("nonneg_thm8", {}, 2.5, 0.5)
    with pytest.raises(ValueError):
        rosenthal_bounds("nonneg_thm8", {}, 2, 1.0)
    with pytest.raises(ValueError):
        rosenthal_bounds("other", {}, 2, 0.5)


def test_rosenthal_bernoulli_lower_tail():
    sp = bernoulli(5, 0.5)
    st_ = sum_stats(sp, 3)
    assert st_["EZ"] == pytest.approx(2.5) and st_["sum_EX2"] == pytest.approx(2.5)
    lhs = brute_norm(sp, lambda x: max(2.5 - sum(x), 0.0), 3)
    assert lhs <= rosenthal_bounds("nonneg_thm8", st_, 3, 0.5)[1].value


def test_sum_functional_reduction():
    t = IncrementTable.exact(rademacher(3), sum_functional([1, 2, 3]))
    assert np.allclose(t.v, (t.configs ** 2 * np.array([1, 4, 9])).sum(axis=1))


def test_function_class_validation():
    with pytest.raises(ValueError):
        FunctionClass.from_arrays([])
    fc = FunctionClass.from_arrays([[[1, 2], [0, 1]]], centered=True)
    with pytest.raises(ValueError):
        fc.validate(rademacher(2))
    with pytest.raises(ValueError):
        FunctionClass.from_arrays([[[1, 2, 3], [0, 1]]]).validate(rademacher(2))
    with pytest.raises(ValueError):
        FunctionClass.from_arrays([[[1, 2]]]).validate(rademacher(2))


def test_singleton_class_weak_equals_strong():
    sp = rademacher(3)
    fc = FunctionClass.from_arrays([[[-1, 1], [-2, 2], [0.5, -0.5]]], centered=True)
    st_ = ep_stats(sp, fc)
    assert st_.Sigma2 == pytest.approx(st_.sigma2)
    lhs, rhs = lemma7_check(st_)
    assert lhs <= rhs


def test_two_function_class_weak_below_strong():
    sp = rademacher(3)
    fc = FunctionClass.from_arrays([[[-1, 1], [-2, 2], [0, 0]], [[0, 0], [-1, 1], [-3, 3]]], centered=True)
    st_ = ep_stats(sp, fc)
    assert st_.sigma2 <= st_.Sigma2 + 1e-12


def test_nonnegative_singleton():
    fc = FunctionClass.from_arrays([[[1, 1]] * 4])
    st_ = ep_stats(bernoulli(4, 0.3), fc)
    assert st_.EZ == pytest.approx(4.0) and st_.M_norms[2.0] == pytest.approx(1.0)


def test_ep_bound_examples():
    sp = rademacher(3)
    t = [1.0, -2.0, 0.5]
    fc = linear_class([t], sp)
    st_ = ep_stats(sp, fc, qs=(2.0, 3.0))
    b = ep_bounds(st_, 2, "thm10_plus")
    assert b.value == pytest.approx(math.sqrt(4 * K) * math.sqrt(sum(x * x for x in t)))
    lim = EPStats(sigma2=1.0, Sigma2=1.0, EZ=1.0, M_norms={3.0: 0.0}, sup_single_l2=0.0, EM2=0.0)
    assert ep_bounds(lim, 3, "thm12_second").value == pytest.approx(2 + 2 * math.sqrt(2 * KAPPA * 3))
    with pytest.raises(ValueError):
        ep_bounds(st_, 2.5, "thm10_plus")
    with pytest.raises(ValueError):
        ep_bounds(st_, 4, "thm11", theta=0.5)
    with pytest.raises(ValueError):
        ep_bounds(st_, 2, "thm11", theta=2)
    with pytest.raises(ValueError):
        ep_bounds(st_, 2, "thm99")


@pytest.mark.parametrize("q", [2, 3, 4])
def test_thm12_first_on_centered_class(q):
    sp = rademacher(4)
    fc = FunctionClass.from_arrays([[[-1, 1], [-2, 2], [0.5, -0.5], [0, 0]],
                                    [[1, -1], [0, 0], [-1, 1], [-3, 3]]], centered=True)
    st_ = ep_stats(sp, fc, qs=(float(q),))

    def z(x):
        return max(abs(sum(fc.tables[k][i][int(x[i] > 0)] for i in range(4))) for k in range(2))

    lhs = brute_norm(sp, lambda x: max(z(x) - st_.EZ, 0.0), q)
    assert lhs <= ep_bounds(st_, q, "thm12_first").value


def test_lemma7_random_class():
    rng = np.random.default_rng(5)
    sp = rademacher(4)
    tables = []
    for _ in range(3):
        a = rng.normal(size=4)
        tables.append([[-x, x] for x in a])
    lhs, rhs = lemma7_check(ep_stats(sp, FunctionClass.from_arrays(tables, centered=True)))
    assert lhs <= rhs


def test_lemma7_zero_class():
    st_ = ep_stats(rademacher(3), FunctionClass.from_arrays([[[0, 0]] * 3], centered=True))
    assert lemma7_check(st_) == (0.0, 0.0)


def test_lemma8():
    sp = rademacher(4)
    fc = FunctionClass.from_arrays([[[-1, 1], [-2, 2], [-0.5, 0.5], [-3, 3]]], centered=True)
    lhs, rhs = lemma8_check(sp, fc, 16)
    assert lhs <= rhs
    # bounded class: M = 3 surely and t0 = sqrt(16 * 9) > 3, so the indicator never fires
    assert lhs == 0.0
    _, rhs_big = lemma8_check(sp, fc, 1e12)
    assert rhs_big == pytest.approx(9.0, rel=1e-5)
    with pytest.raises(ValueError):
        lemma8_check(sp, fc, 4)


def test_lemma8_with_rare_spikes():
    # a spike of 1000 with probability 1e-3 exceeds t0 = 4 sqrt(E M^2) ~ 130
    sp = build_space([Marginal.finite([0, 1], [0.999, 0.001])] + [Marginal.finite([0, 1], [0.9, 0.1])] * 3)
    fc = FunctionClass.from_arrays([[[0, 1000], [0, 1], [0, 2], [0, 0]], [[0, 0], [0, 2], [0, 0], [0, 1]]])
    lhs, rhs = lemma8_check(sp, fc, 16)
    assert 0 < lhs <= rhs


def test_conditional_rademacher_examples():
    fc1 = FunctionClass.from_arrays([[[-2, 3]]])
    sp1 = build_space([Marginal.finite([-2, 3])])
    assert conditional_rademacher(sp1, fc1, [3]) == pytest.approx(3.0)
    sp = build_space([Marginal.finite([0, 1])] * 2)
    fc = FunctionClass.from_arrays([[[0, 1], [0, 1]]])
    assert conditional_rademacher(sp, fc, [1, 1]) == pytest.approx(1.0)


def test_conditional_rademacher_self_bounding():
    sp = build_space([Marginal.finite([0, 1, 2])] * 3)
    fc = FunctionClass.from_arrays([[[0, 1, 2]] * 3, [[1, 0, -1], [0, 2, 0], [1, 1, 1]]])
    t = IncrementTable.exact(sp, cond_rademacher_functional(sp, fc))
    assert t.reduction_below(1e-12)
    up, low = thm13_bounds(t.ez.value, t.norm(np.abs(fc.values(sp, t.configs)).max(axis=(1, 2)), 3).value, 3)
    assert t.norm("z_plus", 3).value <= up.value
    assert t.norm("z_minus", 3).value <= low.value


def test_conditional_rademacher_mc_inner():
    sp = build_space([Marginal.finite([0, 1])] * 3)
    fc = FunctionClass.from_arrays([[[0, 1], [0, 1], [0, 1]]])
    exact = conditional_rademacher(sp, fc, [1, 1, 1])
    approx = conditional_rademacher(sp, fc, [1, 1, 1], inner_mode=("mc", 3, 20000))
    assert exact == pytest.approx(1.5) and approx == pytest.approx(exact, abs=0.05)


def test_ep_functional_reduction():
    sp = rademacher(3)
    fc = linear_class([[1, 1, 1], [1, -1, 0]], sp)
    t = IncrementTable.exact(sp, ep_functional(sp, fc))
    assert np.allclose(t.z, np.maximum(t.configs.sum(axis=1), t.configs[:, 0] - t.configs[:, 1]))
