import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disconj.conjugacy import (Kind, crosscheck_bruteforce, find_positive_solution, is_disconjugate,
                               rho_map, rho_map_csv, rho_minus, rho_plus)
from disconj.errors import PreconditionError
from disconj.interval import Interval
from disconj.ode import cauchy, find_zeros, integrate_ivp

from conftest import eq


def closed_3b(t, b=1.0):
    return b * (t - b) / (2 * t - b)


def closed_3a(t, A=2.0):
    return math.log((A - math.exp(t)) / (1 - A * math.exp(t)))


def test_rho_plus_harmonic(harmonic):
    assert rho_plus(harmonic, 0.0).value == pytest.approx(math.pi, abs=1e-8)


def test_rho_plus_cosh(cosh_a2):
    expected = math.log((2 - math.exp(-2)) / (1 - 2 * math.exp(-2)))
    assert expected == pytest.approx(math.log(1.8647 / 0.7293), rel=1e-4)
    assert rho_plus(cosh_a2, -2.0).value == pytest.approx(expected, rel=1e-9)


def test_rho_plus_rational_sentinel(rational_b1):
    r = rho_plus(rational_b1, 0.6, 200.6)
    assert not r.is_finite and r.value == math.inf and r.window_limited
    assert r.text() == "inf"


def test_rho_minus_examples(harmonic, cosh_a2, rational_b1):
    assert rho_minus(harmonic, math.pi).value == pytest.approx(0.0, abs=1e-8)
    assert rho_minus(cosh_a2, 1.0).value == pytest.approx(closed_3a(1.0), rel=1e-9)
    r = rho_minus(rational_b1, 0.4, -199.6)
    assert r.value == -math.inf and r.window_limited


def test_rho_closed_forms_dense(rational_b1, cosh_a2):
    for t in np.linspace(-2, 0.45, 20):
        assert rho_plus(rational_b1, t).value == pytest.approx(closed_3b(t), rel=1e-6)
    for t in np.linspace(-3, math.log(0.5) - 0.01, 10):
        assert rho_plus(cosh_a2, t).value == pytest.approx(closed_3a(t), rel=1e-6)


def test_is_disconjugate_harmonic(harmonic):
    v = is_disconjugate(harmonic, Interval.closed(0, math.pi - 1e-3))
    assert v.kind is Kind.DISCONJUGATE and not v.window_limited
    v = is_disconjugate(harmonic, Interval.closed(0, math.pi + 1e-3))
    assert v.kind is Kind.NOT_DISCONJUGATE
    assert (v.witness.z1, v.witness.z2) == pytest.approx((0.0, math.pi), abs=1e-6)
    assert v.witness.trajectory.residual() <= 1e-6


def test_open_vs_closed(harmonic):
    assert is_disconjugate(harmonic, Interval.closed(0, math.pi)).refuted
    assert is_disconjugate(harmonic, Interval.closed_open(0, math.pi)).disconjugate
    assert is_disconjugate(harmonic, Interval.open(0, math.pi)).disconjugate


def test_is_disconjugate_examples(osc, sine_ratio):
    v = is_disconjugate(osc, Interval.closed(0, 2 * math.pi + 0.1))
    assert v.refuted and (v.witness.z1, v.witness.z2) == pytest.approx((0, 2 * math.pi), abs=1e-6)
    assert is_disconjugate(sine_ratio, Interval.closed(-20, 20)).disconjugate


def test_unbounded_is_window_limited(bell):
    v = is_disconjugate(bell, Interval.real_line())
    assert v.disconjugate and v.window_limited and v.interval == Interval.closed(-50, 50)
    v = is_disconjugate(bell, Interval(0.0, math.inf, True, False))
    assert v.interval == Interval.closed(0, 100)


def test_singular_endpoint_margin():
    e = eq("3/t", "1/t^2", domain=Interval.open(0, math.inf))
    v = is_disconjugate(e, Interval(0.0, 5.0, False, True))
    assert v.disconjugate and v.certificate["endpoint_margin"] == pytest.approx(5e-6)


def test_verdict_json(harmonic):
    j = is_disconjugate(harmonic, Interval.closed(0, 4)).to_json()
    assert j["kind"] == "NotDisconjugate" and set(j["witness"]) == {"a", "z1", "z2"}


def test_crosscheck_examples(harmonic, rational_b1):
    r = crosscheck_bruteforce(harmonic, Interval.closed(0, 3), 32)
    assert r.max_zero_count == 1 and r.agrees
    r = crosscheck_bruteforce(harmonic, Interval.closed(0, 7), 32)
    assert r.max_zero_count >= 2 and r.agrees
    assert crosscheck_bruteforce(rational_b1, Interval.closed(-1, 0.9), 32).agrees
    with pytest.raises(PreconditionError):
        crosscheck_bruteforce(harmonic, Interval.closed(0, 1), 4)


def test_positive_solution_examples(harmonic):
    y = find_positive_solution(eq("0", "0"), Interval.closed(0, 1))
    ts = np.linspace(0, 1, 11)
    assert np.allclose(y.x(ts), 1.0, atol=1e-12)
    y = find_positive_solution(harmonic, Interval.closed(0, math.pi / 2))
    assert np.allclose(y.x(ts), np.sin(ts) + np.cos(ts), atol=1e-9)
    y = find_positive_solution(harmonic, Interval.closed_open(0, math.pi))
    inner = np.linspace(0.01, math.pi - 0.01, 50)
    assert np.allclose(y.x(inner), np.sin(inner), atol=1e-9)
    with pytest.raises(PreconditionError):
        find_positive_solution(harmonic, Interval.closed(0, 4))


def test_rho_map_csv(harmonic):
    rows = rho_map(harmonic, [0.0, 1.0])
    text = rho_map_csv(rows, "meta")
    lines = text.splitlines()
    assert lines[0] == "# meta" and lines[1] == "a,rho_plus,rho_minus"
    a, rp, rm = lines[2].split(",")
    assert float(rp) == pytest.approx(math.pi, abs=1e-8) and float(rm) == pytest.approx(-math.pi, abs=1e-8)


# --------------------------------------------------------------------------- properties

@settings(max_examples=15)
@given(st.floats(-2.0, 0.3), st.floats(0.01, 0.1))
def test_rho_plus_monotone(a, d):
    e = eq("-(2*(2*t-b))/(t^2+(t-b)^2)", "4/(t^2+(t-b)^2)", {"b": 1.0})
    r1, r2 = rho_plus(e, a), rho_plus(e, a + d)
    assert r1.is_finite and r2.is_finite and r1.value < r2.value


@settings(max_examples=15)
@given(st.floats(-3.0, 3.0), st.floats(0.5, 2.0), st.floats(0.0, 1.0))
def test_rho_inversion(a, w, k):
    e = eq(f"{k!r}*sin(t)", f"{w!r}^2+0.3*cos(t)")
    r = rho_plus(e, a)
    assert r.is_finite
    back = rho_minus(e, r.value)
    assert back.value == pytest.approx(a, abs=1e-6 * (1 + abs(a)))
    rm = rho_minus(e, a)
    assert rho_plus(e, rm.value).value == pytest.approx(a, abs=1e-6 * (1 + abs(a)))


@settings(max_examples=15)
@given(st.floats(0.5, 2.0), st.floats(-0.5, 0.5), st.floats(0.1, 3.0))
def test_sturm_separation(w, k, th):
    e = eq(f"{k!r}*cos(t)", f"{w!r}^2+0.2*sin(2*t)")
    base = integrate_ivp(e, 0.0, 0.0, 1.0, 20.0)
    zs = find_zeros(base, Interval.open(0.0, 20.0)).times
    other = integrate_ivp(e, 0.0, math.cos(th), math.sin(th), 20.0)
    oz = find_zeros(other, Interval.open(0.0, 20.0)).times
    for z1, z2 in zip(zs, zs[1:]):
        inside = [z for z in oz if z1 < z < z2]
        assert len(inside) == 1


@settings(max_examples=15)
@given(st.floats(-1.0, 1.0), st.floats(0.0, 1.5), st.floats(0.0, 1.0), st.floats(1.0, 6.0))
def test_sturm_comparison(k, c, extra, length):
    p = f"{k!r}*sin(t)"
    e1 = eq(p, f"{c!r}+0.5*cos(t)")
    e2 = eq(p, f"{c + extra!r}+0.5*cos(t)+{extra!r}*sin(t)^2")
    iv = Interval.closed(0.0, length)
    if is_disconjugate(e2, iv).disconjugate:
        assert is_disconjugate(e1, iv).disconjugate


@settings(max_examples=10)
@given(st.floats(0.5, 1.5), st.floats(1.0, 3.0), st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_nesting(w, length, cuts):
    e = eq("0.2*t", f"{w!r}^2")
    iv = Interval.closed(0.0, length)
    if is_disconjugate(e, iv).disconjugate:
        lo, hi = sorted(cuts)
        if hi - lo > 1e-3:
            sub = Interval.closed(lo * length, hi * length)
            assert is_disconjugate(e, sub).disconjugate


@settings(max_examples=10)
@given(st.floats(0.5, 1.5), st.floats(-0.5, 0.5))
def test_cauchy_positive_on_triangle(w, k):
    e = eq(f"{k!r}", f"{w!r}^2")
    iv = Interval.closed_open(0.0, 2.5)
    if not is_disconjugate(e, iv).disconjugate:
        return
    for s in np.linspace(0.0, 2.4, 7):
        c = cauchy(e, s, 2.5)
        ts = np.linspace(s, 2.5, 40)[1:-1]
        assert np.all(c.x(ts) > 0)
