import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disconj.conjugacy import Kind, is_disconjugate
from disconj.criteria import (CriteriaOptions, RegionQuery, check_A, check_B, check_C, check_constant,
                              check_D, check_euler, check_lyapunov, check_main, check_vallee_poussin,
                              check_XA1, check_XA2, check_XA3, lyapunov_sharpness_family, region_check,
                              run_all, substitute_half_line, xa2_factors)
from disconj.errors import SoundnessViolation
from disconj.interval import Interval

from conftest import eq

I01 = Interval.closed(0.0, 1.0)
HALF_LINE = Interval.open(0.0, math.inf)


# --------------------------------------------------------------------------- constant / Euler

def test_constant():
    v = check_constant(eq("2", "1"))
    assert v.disconjugate and v.certificate["discriminant"] == 0.0
    v = check_constant(eq("0", "1"), Interval.closed(0, 10))
    assert v.refuted and v.witness.z2 - v.witness.z1 == pytest.approx(math.pi, abs=1e-8)
    assert check_constant(eq("t", "1")).kind is Kind.INCONCLUSIVE


def test_euler():
    iv = Interval(0.0, 10.0, False, True)
    assert check_euler(eq("0", "-1/t", domain=HALF_LINE), iv).disconjugate
    v = check_euler(eq("3/t", "1/t^2", domain=HALF_LINE), iv)
    assert v.disconjugate and v.certificate["phat"] == 3.0
    assert check_euler(eq("1/t", "0.1/t^2", domain=HALF_LINE), iv).kind is Kind.INCONCLUSIVE
    assert check_euler(eq("t", "0"), iv).kind is Kind.INCONCLUSIVE


# --------------------------------------------------------------------------- Lyapunov

def test_lyapunov_boundary():
    v = check_lyapunov(eq("0", "4"), 0.0, 1.0)
    assert v.disconjugate and v.certificate["integral_q_plus"] == pytest.approx(4.0)
    assert is_disconjugate(eq("0", "4"), I01).disconjugate


def test_lyapunov_one_sided():
    e = eq("0", "pi^2")
    assert check_lyapunov(e, 0.0, 1.0).kind is Kind.INCONCLUSIVE
    assert is_disconjugate(e, Interval.closed_open(0.0, 1.0)).disconjugate
    assert is_disconjugate(e, Interval.closed(0.0, 1.0 + 1e-3)).refuted


def test_lyapunov_positive_part():
    assert check_lyapunov(eq("0", "-5"), 0.0, 1.0).disconjugate
    assert check_lyapunov(eq("1", "0"), 0.0, 1.0).kind is Kind.INCONCLUSIVE


@pytest.mark.parametrize("delta,target_rel", [(0.05, 0.02), (0.25, 0.05)])
def test_sharpness_family(delta, target_rel):
    e, integral, v = lyapunov_sharpness_family(delta)
    assert abs(integral - 4 / (1 - 2 * delta)) <= target_rel * 4 / (1 - 2 * delta)
    verdict = is_disconjugate(e, I01)
    assert verdict.refuted
    assert (verdict.witness.z1, verdict.witness.z2) == pytest.approx((0.0, 1.0), abs=1e-5)
    ts = np.linspace(0.01, 0.99, 99)
    vals = v.compile().vector(ts)
    assert np.all(vals > 0)


# --------------------------------------------------------------------------- Vallee-Poussin

def test_vallee_poussin(sine_ratio, harmonic):
    assert check_vallee_poussin(sine_ratio, Interval.closed(-10, 10), "2+sin(t)").disconjugate
    assert check_vallee_poussin(harmonic, Interval.closed(0, 3), "sin(t+0.05)").disconjugate
    # this test function has L v > 0 for x'' + x
    v = check_vallee_poussin(harmonic, Interval.closed(0, 3), "sin((t+0.05)*pi/3.2)")
    assert v.kind is Kind.INCONCLUSIVE
    assert check_vallee_poussin(harmonic, Interval.closed(0, 1), "-1").kind is Kind.INCONCLUSIVE


def test_vallee_poussin_half_open(harmonic):
    v = check_vallee_poussin(harmonic, Interval.closed(0, math.pi), "sin(t)")
    assert v.disconjugate and not v.interval.hi_closed


# --------------------------------------------------------------------------- A-D

def test_A():
    assert check_A(eq("0", "0"), I01).disconjugate
    assert check_A(eq("t", "-t^2"), Interval.closed(-3, 3)).disconjugate
    assert check_A(eq("0", "sin(t)"), Interval.closed(0, 3)).kind is Kind.INCONCLUSIVE


def test_B():
    assert check_B(eq("0", "pi^2"), 0.0, 1.0).disconjugate
    assert check_B(eq("0", "1.01*pi^2"), 0.0, 1.0).kind is Kind.INCONCLUSIVE
    v = check_B(eq("t*(1-t)", "0"), 0.0, 1.0)
    assert v.kind in (Kind.DISCONJUGATE, Kind.INCONCLUSIVE)
    assert "endpoint_ratio" in v.certificate or v.note


def test_C():
    v = check_C(eq("0", "8"), 0.0, 1.0)
    assert v.disconjugate and "C2" in v.certificate["fired"]
    v = check_C(eq("2", "0"), 0.0, 1.0)
    assert v.disconjugate and "C2" in v.certificate["fired"]
    assert check_C(eq("0", "9"), 0.0, 1.0).kind is Kind.INCONCLUSIVE


def test_D():
    v = check_D(eq("1", "0"), Interval.closed(-5, 5))
    assert v.disconjugate and v.certificate["nu"] == pytest.approx(-0.5, abs=1e-6)
    v = check_D(eq("sin(t)", "-2"), Interval.closed(-5, 5))
    assert v.disconjugate
    assert check_D(eq("0", "1"), Interval.closed(-5, 5)).kind is Kind.INCONCLUSIVE


# --------------------------------------------------------------------------- XA

def test_XA1():
    assert check_XA1(eq("0", "8"), 0.0, 1.0, P=0.0, Q=0.0).disconjugate
    assert check_XA1(eq("1", "0.2"), 0.0, 1.0, P=1.0, Q=0.2).disconjugate
    v = check_XA1(eq("1", "0.5"), 0.0, 1.0, P=1.0, Q=0.0)
    assert v.kind in (Kind.DISCONJUGATE, Kind.INCONCLUSIVE)
    if v.disconjugate:
        assert is_disconjugate(eq("1", "0.5"), I01).disconjugate


def test_XA2():
    assert check_XA2(eq("1.5", "0"), 0.0, 1.0, P=1.5).disconjugate
    f1, f2 = xa2_factors(1e-4, 0.0, 1.0)
    assert f1 == pytest.approx(0.5, abs=1e-3) and f2 == pytest.approx(1 / 8, abs=1e-3)
    v = check_XA2(eq("2", "0.5"), 0.0, 1.0, P=2.0)
    assert v.kind in (Kind.DISCONJUGATE, Kind.INCONCLUSIVE)


def test_XA3():
    v = check_XA3(eq("0", "8"), 0.0, 1.0)
    assert v.disconjugate
    assert check_XA3(eq("t", "-1-t^2"), 0.0, 2.0).disconjugate
    v = check_XA3(eq("1", "1"), 0.0, 1.0)
    if v.disconjugate:
        assert is_disconjugate(eq("1", "1"), I01).disconjugate


# --------------------------------------------------------------------------- regions and main theorem

def test_region_query_validation():
    with pytest.raises(ValueError):
        RegionQuery("Mplus")
    with pytest.raises(ValueError):
        RegionQuery("N", 1.0)
    assert RegionQuery("Mplus", 1.0).contains(np.array([3.0]), np.array([1.0]))


def test_dichotomy_pair(osc, bell):
    assert region_check(osc, Interval.closed(-20, 20), RegionQuery("N"))["inside"]
    assert is_disconjugate(osc, Interval.closed(0, 2 * math.pi + 0.1)).refuted
    assert region_check(bell, Interval.closed(-20, 20), RegionQuery("O"))["inside"]
    v = check_main(bell, Interval.closed(-20, 20))
    assert v.disconjugate and v.certificate["fired"] == "5"
    assert is_disconjugate(bell, Interval.closed(-20, 20)).disconjugate


def test_main_condition1():
    v = check_main(eq("0", "-1"))
    assert v.disconjugate and v.certificate["fired"] == "1"


def test_main_condition3_and_6():
    p = "R*(1-c^2*exp(R*t/2))/(1+c^2*exp(R*t/2))"
    e = eq(p, f"({p})^2/4 - R^2", {"R": 1.0, "c": 1.0})
    iv = Interval.closed(-20, 20)
    assert check_main(e, iv).disconjugate
    v = check_main(e, iv, r="-1", only=["6"])
    assert v.disconjugate and v.certificate["fired"] == "6"
    entry = v.certificate["conditions"]["6"][0]
    assert abs(entry["dop22_as_printed"].value) <= 1e-9 * entry["dop22_as_printed"].scale
    assert entry["dop22"].ok


def test_main_mirror_branches_never_fire(osc):
    v = check_main(osc, Interval.closed(-20, 20))
    assert not v.disconjugate
    assert v.certificate["conditions"]["4"]["mirror_holds"] is True
    assert v.certificate["conditions"]["4"]["mirror_fires"] is False


def test_main_condition2_line():
    # q = -gamma^2 + k p with |k| <= gamma: test function exp(-k t)
    v = check_main(eq("sin(t)", "-1+0.5*sin(t)"), Interval.closed(-10, 10), only=["2"])
    assert v.disconjugate and v.certificate["fired"] == "2"


def test_main_nondifferentiable_p_is_reported():
    v = check_main(eq("abs(t)", "1"), Interval.closed(-2, 2))
    assert not v.disconjugate
    assert "skipped" in v.certificate["conditions"]["5"]


def test_gamma_search_implies_N():
    for p, q in (("t", "-1+0.5*t"), ("2*sin(t)", "-2+sin(t)")):
        e = eq(p, q)
        v = check_main(e, Interval.closed(-5, 5), only=["3"])
        if v.disconjugate:
            ts = np.linspace(-5, 5, 401)
            pv, qv = e.p_fn.vector(ts), e.q_fn.vector(ts)
            assert np.all(pv ** 2 - 4 * qv >= -1e-9)


def test_D_and_condition3_consistency():
    e = eq("1+0.5*sin(t)", "-0.1")
    d = check_D(e, Interval.closed(-5, 5))
    m = check_main(e, Interval.closed(-5, 5), only=["3"])
    assert d.disconjugate and m.disconjugate


# --------------------------------------------------------------------------- run_all and soundness

def test_run_all_report(bell):
    rep = run_all(bell, Interval.closed(-5, 5))
    assert "main" in rep.fired and rep.oracle.disconjugate and not rep.violations
    j = rep.to_json()
    assert {c["criterion"] for c in j["criteria"]} >= {"constant", "lyapunov", "A", "B", "C", "D", "main"}


def test_run_all_with_test_function(sine_ratio):
    rep = run_all(sine_ratio, Interval.closed(-10, 10), CriteriaOptions(v="2+sin(t)"))
    assert rep["vallee_poussin"].disconjugate


def test_soundness_violation_raised(monkeypatch):
    import disconj.criteria as crit
    from disconj.conjugacy import Verdict

    def liar(eq, iv):
        return Verdict(Kind.DISCONJUGATE, "A", iv, None, False, {})

    monkeypatch.setattr(crit, "check_A", liar)
    with pytest.raises(SoundnessViolation) as info:
        run_all(eq("0", "1"), Interval.closed(0, 4))
    assert info.value.report.violations[0]["criterion"] == "A"


def _poly_trig(rng):
    kind = rng.integers(3)
    a, b, c = (float(x) for x in rng.uniform(-2, 2, 3))
    w = float(rng.uniform(0.3, 3))
    if kind == 0:
        return f"{a!r}+{b!r}*t+{c!r}*t^2"
    if kind == 1:
        return f"{a!r}+{b!r}*sin({w!r}*t)"
    return f"{a!r}*cos({w!r}*t)+{c!r}*t"


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_soundness_random(seed):
    rng = np.random.default_rng(seed)
    e = eq(_poly_trig(rng), _poly_trig(rng))
    lo = float(rng.uniform(-2, 2))
    iv = Interval.closed(lo, lo + float(rng.uniform(0.3, 4)))
    rep = run_all(e, iv, CriteriaOptions(raise_on_violation=False))
    assert rep.violations == []


# --------------------------------------------------------------------------- half-line substitution

def test_substitution_examples():
    tr = substitute_half_line(eq("0", "0"), 0.0)
    assert tr.literal.p.evaluate(1.3) == 0.0 and tr.literal.q.evaluate(1.3) == 0.0
    tr = substitute_half_line(eq("3/t", "0", domain=HALF_LINE), 0.0)
    assert tr.literal.p.evaluate(2.0) == pytest.approx(3 / 4)
    tr = substitute_half_line(eq("0", "1/(1+t)", domain=Interval.open(-1, math.inf)), 0.0)
    assert tr.literal.q.evaluate(2.0) == pytest.approx(1 / 5)
    assert tr.comparisons and all("literal" in c and "genuine" in c for c in tr.comparisons)
