import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disconj.errors import NotDisconjugateError
from disconj.factorization import build_factorization, distinct_zeros, generalized_rolle_check, verify_factorization
from disconj.interval import Interval

from conftest import eq


def test_trivial_equation_constant_factors():
    f = build_factorization(eq("0", "0"), Interval.closed(0, 1))
    ts = np.linspace(0, 1, 11)
    assert np.allclose(f.h0(ts) * f.h1(ts) * f.h2(ts), 1.0, atol=1e-12)
    c = f.check()
    assert c["positive"] and c["product_error"] <= 1e-8


def test_harmonic_quarter_period(harmonic):
    f = build_factorization(harmonic, Interval.closed(0, math.pi / 2))
    r = verify_factorization(harmonic, f, "t^3 - t")
    assert r["relative"] <= 1e-6


def test_sine_ratio_positive(sine_ratio):
    f = build_factorization(sine_ratio, Interval.closed(0, 2 * math.pi))
    c = f.check()
    assert c["positive"] and c["product_error"] <= 1e-8 and c["wronskian_rel_gap"] <= 1e-6


def test_refuses_non_disconjugate(harmonic):
    with pytest.raises(NotDisconjugateError):
        build_factorization(harmonic, Interval.closed(0, 4))


def test_csv(harmonic):
    f = build_factorization(harmonic, Interval.closed(0, 1))
    text = f.to_csv(5)
    lines = text.strip().splitlines()
    assert lines[1] == "t,h0,h1,h2,product" and len(lines) == 7
    assert "np.float64" not in text


@settings(max_examples=10)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 3), st.floats(-1, 1))
def test_random_smooth_u(a, b, w, c):
    e = eq("sin(t)", "-1+0.3*cos(t)")
    f = build_factorization(e, Interval.closed(0, 2))
    u = f"{a!r}*sin({w!r}*t)+{b!r}*t^2+{c!r}*exp(t/3)"
    assert verify_factorization(e, f, u)["relative"] <= 1e-6


def test_distinct_zeros():
    assert distinct_zeros(np.sin, 0, 2 * math.pi) == pytest.approx([0, math.pi, 2 * math.pi], abs=1e-10)
    assert distinct_zeros(lambda t: (t - 0.5) ** 2, 0, 1) == pytest.approx([0.5], abs=1e-5)
    assert distinct_zeros(lambda t: 0 * t, 0, 1) is None
    assert distinct_zeros(np.sin, 0, math.pi, include_hi=False) == pytest.approx([0.0], abs=1e-12)


def test_rolle_examples(harmonic):
    r = generalized_rolle_check(eq("0", "0"), Interval.closed(0, 2), "t*(t-1)*(t-2)")
    assert (r.m, r.k, r.holds) == (3, 1, True)
    r = generalized_rolle_check(eq("0", "0"), Interval.closed(0, 3), "sin(2*t)")
    assert r.m == 2 and r.k >= r.m - 2
    r = generalized_rolle_check(harmonic, Interval.closed(0.1, 3), "sin(t)")
    assert r.m == 0 and math.isinf(r.k) and r.holds
    assert r.to_json()["k"] == "inf"


def test_rolle_refuses(harmonic):
    with pytest.raises(NotDisconjugateError):
        generalized_rolle_check(harmonic, Interval.closed(0, 7), "t")


@settings(max_examples=15)
@given(st.lists(st.floats(0.05, 1.95), min_size=1, max_size=4), st.floats(-1.0, 1.0))
def test_rolle_random(roots, shift):
    u = "*".join(f"(t-{r!r})" for r in roots) + f"*(2+{shift!r}*sin(t))"
    r = generalized_rolle_check(eq("1", "-0.5"), Interval.closed(0, 2), u)
    assert r.holds


def test_rolle_triple_root():
    r = generalized_rolle_check(eq("1", "-0.5"), Interval.closed(0, 2), "(t-0.078125)^3")
    assert r.m == 1 and r.zeros_u == pytest.approx([0.078125], abs=1e-5) and r.holds
