import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disconj.errors import NotDisconjugateError, PreconditionError
from disconj.green import green_function, shoot_bvp, solve_bvp

from conftest import eq


def test_double_integrator_kernel():
    g = green_function(eq("0", "0"), 0.0, 1.0)
    assert g(0.75, 0.25) == pytest.approx(-0.0625, abs=1e-12)
    T, S, G = g.grid(11)
    exact = np.where(S <= T, -(1 - T) * S, -T * (1 - S))
    assert np.max(np.abs(G - exact)) <= 1e-12
    chk = g.verify()
    assert chk.ok and chk.displayed_identity_gap <= 1e-8


def test_harmonic_kernel(harmonic):
    g = green_function(harmonic, 0.0, math.pi / 2)
    s = np.linspace(0.1, 1.4, 7)
    assert np.allclose(g(math.pi / 2, s), 0.0, atol=1e-10)
    t = s + 0.1
    assert np.allclose(g(t, s), -np.cos(t) * np.sin(s), atol=1e-9)
    chk = g.verify()
    assert chk.ok and chk.jump_error <= 1e-6 and chk.displayed_identity_gap <= 1e-8


def test_identity_discrepancy_for_nonzero_p():
    g = green_function(eq("t", "0"), 0.0, 1.0)
    chk = g.verify()
    assert chk.ok
    assert chk.displayed_identity_gap > 1e-3


def test_negative_on_open_square(sine_ratio, bell):
    for e, a, b in ((sine_ratio, -2.0, 2.0), (bell, -3.0, 3.0), (eq("1", "0.2"), 0.0, 5.0)):
        g = green_function(e, a, b)
        chk = g.verify(n_random=100)
        assert chk.n_positive == 0 and chk.boundary <= 1e-8 and chk.jump_error <= 1e-6


def test_wronskian_anchor(bell):
    g = green_function(bell, -1.0, 2.0)
    assert g.wronskian_check() <= 1e-8


def test_not_disconjugate_raises(harmonic):
    with pytest.raises(NotDisconjugateError) as info:
        green_function(harmonic, 0.0, 4.0)
    assert info.value.verdict.refuted
    with pytest.raises(PreconditionError):
        green_function(harmonic, 1.0, 1.0)


def test_bvp_examples(harmonic):
    sol = solve_bvp(eq("0", "0"), "-1", 0.0, 1.0)
    assert sol.x(0.5) == pytest.approx(0.125, abs=1e-11)
    assert sol.residual() <= 1e-6 and sol.boundary_error() <= 1e-8
    sol = solve_bvp(harmonic, "-1", 0.0, math.pi / 2)
    assert sol.x(math.pi / 4) == pytest.approx(math.sqrt(2) - 1, abs=1e-10)
    sol = solve_bvp(harmonic, "0", 0.0, 1.0)
    assert np.allclose(sol.x(np.linspace(0, 1, 5)), 0.0, atol=1e-14)


def test_bvp_matches_shooting(bell):
    sol = solve_bvp(bell, "cos(3*t)+t", -1.0, 2.0)
    other = shoot_bvp(bell, "cos(3*t)+t", -1.0, 2.0)
    ts = np.linspace(-1, 2, 13)
    assert np.max(np.abs(sol.x(ts) - other(ts))) <= 1e-6
    assert sol.consistency() <= 1e-6


def test_csv_export():
    g = green_function(eq("0", "0"), 0.0, 1.0)
    text = g.to_csv(3)
    lines = text.splitlines()
    assert lines[0].startswith("#") and lines[1] == "t,s,G" and len(lines) == 11
    t, s, G = map(float, lines[2 + 4].split(","))
    assert (t, s, G) == pytest.approx((0.5, 0.5, -0.25))
    buf = io.StringIO()
    g.to_csv(3, buf)
    assert buf.getvalue() == text


@settings(max_examples=10)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.5, 2.0))
def test_definition_suite_random(k, c, length):
    e = eq(f"{k!r}*cos(t)", f"{c!r}+0.3*sin(t)")
    try:
        g = green_function(e, 0.0, length)
    except NotDisconjugateError:
        return
    chk = g.verify(n=11, n_random=50)
    assert chk.ok
