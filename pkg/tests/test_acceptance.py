"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines
are written past pytest's capture so they show without ``-s``.
"""
import math
import time

import numpy as np
import pytest

from disconj.catalog import catalog_list
from disconj.conjugacy import is_disconjugate, rho_minus, rho_plus
from disconj.criteria import (CriteriaOptions, RegionQuery, check_lyapunov, check_main,
                              lyapunov_sharpness_family, region_check, run_all)
from disconj.factorization import build_factorization, generalized_rolle_check, verify_factorization
from disconj.green import green_function, solve_bvp
from disconj.interval import Interval
from disconj.ode import find_zeros, integrate_ivp, wronskian
from disconj.periodic import check_theorem_periodic, monodromy

from conftest import eq

N_SOUNDNESS = 200
N_PROPERTY = 50


@pytest.fixture
def report(capsys):
    """Call with ``(number, ok, detail)``; prints the line, then asserts."""
    def _report(number, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return _report


# --------------------------------------------------------------------------- 1

def test_criterion_1_conjugate_point_golden(report):
    rational = eq("-(2*(2*t-b))/(t^2+(t-b)^2)", "4/(t^2+(t-b)^2)", {"b": 1.0})
    cosh = eq("-(A*sinh(t))/(A*cosh(t)-1)", "1/(A*cosh(t)-1)", {"A": 2.0})
    worst = 0.0
    for t in np.linspace(-2.0, 0.45, 20):
        expected = (t - 1.0) / (2 * t - 1.0)
        worst = max(worst, abs(rho_plus(rational, float(t)).value - expected) / abs(expected))
    sentinels = all(rho_plus(rational, float(t), float(t) + 200).value == math.inf
                    for t in (0.5, 0.75, 1.0, 2.0))
    A = 2.0
    for t in np.linspace(-3.0, math.log(1 / A) - 0.02, 10):
        expected = math.log((A - math.exp(t)) / (1 - A * math.exp(t)))
        worst = max(worst, abs(rho_plus(cosh, float(t)).value - expected) / abs(expected))
    report(1, worst <= 1e-6 and sentinels, f"max rel error {worst:.2e}, sentinels {sentinels}")


# --------------------------------------------------------------------------- 2

def test_criterion_2_harmonic(report):
    h = eq("0", "1")
    err = abs(rho_plus(h, 0.0).value - math.pi)
    inside = is_disconjugate(h, Interval.closed(0, math.pi - 1e-3))
    outside = is_disconjugate(h, Interval.closed(0, math.pi + 1e-3))
    zerr = math.inf
    if outside.refuted:
        zerr = max(abs(outside.witness.z1), abs(outside.witness.z2 - math.pi))
    ok = err <= 1e-8 and inside.disconjugate and outside.refuted and zerr <= 1e-6
    report(2, ok, f"|rho+(0)-pi|={err:.2e}, witness zero error {zerr:.2e}")


# --------------------------------------------------------------------------- 3

def test_criterion_3_lyapunov(report):
    four = eq("0", "4")
    fired = check_lyapunov(four, 0.0, 1.0).disconjugate
    oracle = is_disconjugate(four, Interval.closed(0, 1)).disconjugate
    delta = 0.05
    fam, integral, _ = lyapunov_sharpness_family(delta)
    target = 4 / (1 - 2 * delta)
    rel = abs(integral - target) / target
    refuted = is_disconjugate(fam, Interval.closed(0, 1)).refuted
    ok = fired and oracle and rel <= 0.02 and refuted
    report(3, ok, f"boundary fired={fired} oracle={oracle}; integral {integral:.4f} vs {target:.4f} "
                  f"({rel:.2%}), family refuted={refuted}")


# --------------------------------------------------------------------------- 4

def test_criterion_4_dichotomy_pair(report):
    osc = eq("-t/2", "t^2/16")
    v = is_disconjugate(osc, Interval.closed(0, 2 * math.pi + 0.1))
    zeros_ok = v.refuted and abs(v.witness.z1) <= 1e-6 and abs(v.witness.z2 - 2 * math.pi) <= 1e-6
    in_N = region_check(osc, Interval.closed(0, 2 * math.pi + 0.1), RegionQuery("N"))["inside"]
    bell = eq("t", "t^2/4+1/2")
    line = Interval.closed(-20, 20)
    m = check_main(bell, line)
    cond5 = m.disconjugate and m.certificate.get("fired") == "5"
    oracle = is_disconjugate(bell, line).disconjugate
    in_O = region_check(bell, line, RegionQuery("O"))["inside"]
    ok = zeros_ok and in_N and cond5 and oracle and in_O
    report(4, ok, f"osc refuted with zeros (0, 2pi)={zeros_ok}, in N={in_N}; "
                  f"bell condition 5={cond5}, oracle={oracle}, in O={in_O}")


# --------------------------------------------------------------------------- 5

def _random_coeff(rng):
    a, b, c = (float(x) for x in rng.uniform(-3, 3, 3))
    w = float(rng.uniform(0.3, 4))
    kind = int(rng.integers(4))
    if kind == 0:
        return f"{a!r}"
    if kind == 1:
        return f"{a!r}+{b!r}*t+{c!r}*t^2"
    if kind == 2:
        return f"{a!r}+{b!r}*sin({w!r}*t)"
    return f"{a!r}*cos({w!r}*t)+{c!r}*t"


def test_criterion_5_soundness_sweep(report):
    rng = np.random.default_rng(20240601)
    violations, refuted, fired = [], 0, 0
    for _ in range(N_SOUNDNESS):
        e = eq(_random_coeff(rng), _random_coeff(rng))
        lo = float(rng.uniform(-3, 3))
        iv = Interval.closed(lo, lo + float(rng.uniform(0.2, 5)))
        rep = run_all(e, iv, CriteriaOptions(raise_on_violation=False))
        violations += rep.violations
        refuted += rep.oracle.refuted
        fired += rep.any_fired
    report(5, not violations, f"{N_SOUNDNESS} instances, {refuted} refuted by the oracle, "
                              f"{fired} certified by some criterion, {len(violations)} violations")


# --------------------------------------------------------------------------- 6

GREEN_INTERVALS = {
    "cosh_family": (-2.0, 0.5), "rational_family": (-1.0, 0.45), "harmonic": (0.0, 3.0),
    "euler": (0.5, 5.0), "lyapunov_sharpness": (0.0, 0.9), "sine_ratio": (-10.0, 10.0),
    "exp_weight": (-3.0, 3.0), "gauss_bell": (-5.0, 5.0), "osc_counterexample": (0.0, 6.0),
    "condition6_identity": (-5.0, 5.0),
}


def test_criterion_6_green_suite(report):
    failures, count, identity_gap = [], 0, 0.0
    for entry in catalog_list():
        a, b = GREEN_INTERVALS[entry.id]
        e = entry.equation
        if not is_disconjugate(e, Interval.closed(a, b)).disconjugate:
            failures.append(f"{entry.id}: interval not disconjugate")
            continue
        count += 1
        g = green_function(e, a, b)
        c = g.verify(n_random=100)
        sol = solve_bvp(e, "1+cos(t)", a, b)
        if not (c.boundary <= 1e-8 and c.jump_error <= 1e-6 and c.n_positive == 0
                and sol.residual() <= 1e-6):
            failures.append(f"{entry.id}{entry.params}: {c.to_json()} bvp {sol.residual():.2e}")
        if e.p.text() == "0":
            identity_gap = max(identity_gap, c.displayed_identity_gap * g.scale())
    if identity_gap > 1e-8:
        failures.append(f"p = 0 identity gap {identity_gap:.2e}")
    report(6, not failures, f"{count} instances; p = 0 identity gap {identity_gap:.2e}; "
                            f"failures: {failures or 'none'}")


# --------------------------------------------------------------------------- 7

def _random_smooth(rng):
    a, b, c = (float(x) for x in rng.uniform(-2, 2, 3))
    w = float(rng.uniform(0.5, 3))
    return f"{a!r}*sin({w!r}*t)+{b!r}*t^2+{c!r}*exp(t/3)+1"


def test_criterion_7_factorization_rolle(report):
    rng = np.random.default_rng(7)
    instances = [(eq("0", "1"), Interval.closed(0, 1.5)),
                 (eq("sin(t)", "-1+0.3*cos(t)"), Interval.closed(0, 2)),
                 (eq("0", "sin(t)/(2+sin(t))"), Interval.closed(0, 2 * math.pi)),
                 (eq("t", "t^2/4+1/2"), Interval.closed(-3, 3))]
    worst_prod, worst_res = 0.0, 0.0
    for e, iv in instances:
        f = build_factorization(e, iv)
        worst_prod = max(worst_prod, f.check()["product_error"])
        for _ in range(10):
            worst_res = max(worst_res, verify_factorization(e, f, _random_smooth(rng))["relative"])
    rolle_fail = 0
    for _ in range(N_PROPERTY):
        roots = sorted(float(r) for r in rng.uniform(0.05, 1.95, int(rng.integers(1, 5))))
        u = "*".join(f"(t-{r!r})" for r in roots) + f"*(2+{float(rng.uniform(-1, 1))!r}*sin(t))"
        k0, k1 = (float(x) for x in rng.uniform(-1, 1, 2))
        r = generalized_rolle_check(eq(f"{k0!r}", f"-1+{0.3 * k1!r}*cos(t)"), Interval.closed(0, 2), u)
        rolle_fail += not r.holds
    tight = generalized_rolle_check(eq("0", "0"), Interval.closed(0, 2), "t*(t-1)*(t-2)")
    tight_ok = tight.m == 3 and tight.k == 1
    ok = worst_prod <= 1e-8 and worst_res <= 1e-6 and rolle_fail == 0 and tight_ok
    report(7, ok, f"product error {worst_prod:.2e}, residual {worst_res:.2e}, "
                  f"Rolle failures {rolle_fail}/{N_PROPERTY}, cubic m={tight.m} k={tight.k}")


# --------------------------------------------------------------------------- 8

def test_criterion_8_periodic(report):
    ratio = eq("0", "sin(t)/(2+sin(t))")
    m = monodromy(ratio, 0.0, 2 * math.pi)
    det_gap = abs(m.det - m.det_expected)
    v = check_theorem_periodic(eq("1", "0.2"), 2 * math.pi)
    h = v.hypothesis_report
    hyp = h["q_sign_ok"] and h["periodicity_ok"] and h["disconjugacy_ok"]
    dist = v.monodromy.unit_eigen_distance
    ok = m.unit_eigen_distance <= 1e-6 and det_gap <= 1e-7 and hyp and dist >= 0.1
    report(8, ok, f"ratio eigen distance {m.unit_eigen_distance:.2e}, det gap {det_gap:.2e}; "
                  f"p=1 q=0.2 hypotheses {hyp}, distance {dist:.3f}")


# --------------------------------------------------------------------------- 9

def _sturm_separation(rng):
    w, k, th = float(rng.uniform(0.5, 2)), float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.1, 3))
    e = eq(f"{k!r}*cos(t)", f"{w!r}^2+0.2*sin(2*t)")
    zs = find_zeros(integrate_ivp(e, 0.0, 0.0, 1.0, 20.0), Interval.open(0.0, 20.0)).times
    oz = find_zeros(integrate_ivp(e, 0.0, math.cos(th), math.sin(th), 20.0), Interval.open(0.0, 20.0)).times
    return len(zs) >= 2 and all(sum(z1 < z < z2 for z in oz) == 1 for z1, z2 in zip(zs, zs[1:]))


def _comparison(rng):
    k, c = float(rng.uniform(-1, 1)), float(rng.uniform(0, 1.5))
    extra, length = float(rng.uniform(0, 1)), float(rng.uniform(1, 6))
    p = f"{k!r}*sin(t)"
    iv = Interval.closed(0.0, length)
    big = is_disconjugate(eq(p, f"{c + extra!r}+0.5*cos(t)+{extra!r}*sin(t)^2"), iv)
    return not big.disconjugate or is_disconjugate(eq(p, f"{c!r}+0.5*cos(t)"), iv).disconjugate


_RATIONAL = eq("-(2*(2*t-b))/(t^2+(t-b)^2)", "4/(t^2+(t-b)^2)", {"b": 1.0})


def _rho_monotone_inverse(rng):
    a, d = float(rng.uniform(-2, 0.3)), float(rng.uniform(0.01, 0.1))
    r1, r2 = rho_plus(_RATIONAL, a), rho_plus(_RATIONAL, a + d)
    mono = r1.is_finite and r2.is_finite and r1.value < r2.value
    w, k, b = float(rng.uniform(0.5, 2)), float(rng.uniform(0, 1)), float(rng.uniform(-3, 3))
    e = eq(f"{k!r}*sin(t)", f"{w!r}^2+0.3*cos(t)")
    r = rho_plus(e, b)
    back = rho_minus(e, r.value).value
    return mono and r.is_finite and abs(back - b) <= 1e-6 * (1 + abs(b))


def _abel(rng):
    c0, c1, w = (float(x) for x in rng.uniform(-1, 1, 3))
    e = eq(f"{c0!r}+{c1!r}*sin({1 + w!r}*t)", f"{2 * c1!r}+cos(t)")
    a = float(rng.uniform(-2, 2))
    res = wronskian(e, a, a + float(rng.uniform(0.5, 5)))
    return res.rel_diff <= 1e-7


@pytest.mark.parametrize("name,prop", [("Sturm separation", _sturm_separation),
                                       ("comparison", _comparison),
                                       ("rho monotonicity/inversion", _rho_monotone_inverse),
                                       ("Abel identity", _abel)])
def test_criterion_9_property_suites(report, name, prop):
    rng = np.random.default_rng(sum(map(ord, name)))
    t0 = time.perf_counter()
    failed = sum(not prop(rng) for _ in range(N_PROPERTY))
    report(9, failed == 0, f"{name}: {N_PROPERTY - failed}/{N_PROPERTY} instances pass "
                           f"({time.perf_counter() - t0:.1f}s)")
