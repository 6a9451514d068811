import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from momentbounds.constants import CONSTANT_NAMES, KAPPA, K, all_constants, constant, kappa_q, lemma6_x


# independent float oracles: closed forms and brentq on the defining equations
def _root_thm4(a):
    return brentq(lambda x: math.exp(-0.5) + math.exp(1 / math.sqrt(x)) / (a * x) - 1, 0.5, 50, xtol=1e-15)


def _root_cor1():
    return brentq(lambda x: math.exp(-0.5) + math.exp(-1 + 1 / x) / (2 * x) - 1, 0.5, 50, xtol=1e-15)


ORACLE = {
    "kappa": math.sqrt(math.e) / (2 * (math.sqrt(math.e) - 1)),
    "K": 1 / (math.e - math.sqrt(math.e)),
    "C1": _root_thm4(1),
    "C2": _root_thm4(2),
    "cor1_C": _root_cor1(),
}


@pytest.mark.parametrize("name", CONSTANT_NAMES)
def test_matches_oracle(name):
    c = constant(name)
    assert c.value == pytest.approx(ORACLE[name], rel=1e-12)
    assert c.enclosure_low <= c.value <= c.enclosure_high
    assert c.enclosure_high - c.enclosure_low < 1e-11
    assert c.residual <= 1e-9


@pytest.mark.parametrize("name, lo, hi", [
    ("kappa", 1.2707, 1.271),
    ("K", 0.9349, 0.935),
    ("C1", 4.14, 4.16),
    ("C2", 2.41, 2.42),
    ("cor1_C", 1.12, 1.14),
])
def test_published_ranges(name, lo, hi):
    assert lo < constant(name).value < hi


def test_module_level_values():
    assert KAPPA == constant("kappa").value
    assert K == constant("K").value
    assert [c.name for c in all_constants()] == list(CONSTANT_NAMES)


def test_unknown_name():
    with pytest.raises(ValueError):
        constant("nope")


@pytest.mark.parametrize("q, expected", [(1, 1.0), (1.5, 1.0), (2, 1.0), (4, 1 / (2 * (1 - 0.75 ** 2)))])
def test_kappa_q_values(q, expected):
    assert kappa_q(q) == pytest.approx(expected, rel=1e-14)


def test_kappa_q_rejects_small_q():
    with pytest.raises(ValueError):
        kappa_q(0.5)


@given(st.floats(1.0, 1e6), st.floats(1.0, 1e6))
def test_kappa_q_nondecreasing_and_below_limit(a, b):
    lo, hi = sorted((a, b))
    assert kappa_q(lo) <= kappa_q(hi) + 1e-15
    assert kappa_q(hi) <= KAPPA + 1e-12


def test_kappa_q_limit():
    assert kappa_q(1e8) == pytest.approx(KAPPA, rel=1e-6)


def _lemma6_oracle(q):
    mpmath.mp.dps = 30
    q = mpmath.mpf(q)
    k = 1 / (mpmath.e - mpmath.sqrt(mpmath.e))
    return float(((q - 1) / q) ** (q / 2) * (1 + ((q - 2) / (q - 1)) ** ((q - 2) / 2) / k))


@pytest.mark.parametrize("q", [4, 5, 10, 100, 12345, 10 ** 6])
def test_lemma6_oracle(q):
    assert lemma6_x(q) == pytest.approx(_lemma6_oracle(q), rel=1e-12)


def test_lemma6_known_values():
    assert lemma6_x(4) == pytest.approx(0.9635846, abs=1e-6)
    assert 0.999 < lemma6_x(10 ** 6) < 1


@pytest.mark.parametrize("bad", [3, 4.5, 0])
def test_lemma6_domain(bad):
    with pytest.raises(ValueError):
        lemma6_x(bad)


def test_lemma6_bounded_by_one():
    xs = np.array([lemma6_x(q) for q in range(4, 10_001)])
    assert np.all(xs <= 1.0)
