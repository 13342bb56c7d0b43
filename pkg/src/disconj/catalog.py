"""Named reference equations with machine-checkable known facts.

Each fact has a ``source`` naming where the expected value comes from, and
a ``kind``: ``closed-form`` (a published formula), ``derived`` (obtained by
evaluating or differentiating such a formula) or ``trivial``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conjugacy import is_disconjugate, rho_minus, rho_plus
from .criteria import (RegionQuery, check_euler, check_lyapunov, check_main, check_vallee_poussin,
                       lyapunov_sharpness_family, region_check)
from .expr import as_expr
from .interval import Interval
from .ode import Equation, apply_L, integrate_ivp
from .periodic import PeriodicKind, check_theorem_periodic, monodromy

__all__ = ["CatalogFact", "CatalogEntry", "FactResult", "catalog_list", "catalog_entry",
           "run_catalog", "CATALOG_IDS"]


@dataclass
class FactResult:
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class CatalogFact:
    id: str
    description: str
    source: str
    kind: str                                  # closed-form | derived | trivial
    check: Callable[[Equation], FactResult] = field(repr=False)

    def run(self, eq: Equation) -> dict:
        t0 = time.perf_counter()
        try:
            res = self.check(eq)
            out = {"fact": self.id, "passed": bool(res.passed), "detail": res.detail}
        except Exception as exc:  # a crashing fact is a failing fact
            out = {"fact": self.id, "passed": False, "error": f"{type(exc).__name__}: {exc}"}
        out.update(description=self.description, source=self.source, kind=self.kind,
                   elapsed_ms=round(1e3 * (time.perf_counter() - t0), 3))
        return out


@dataclass
class CatalogEntry:
    id: str
    equation: Equation
    description: str
    known_facts: list
    params: dict = field(default_factory=dict)

    def run(self) -> dict:
        results = [f.run(self.equation) for f in self.known_facts]
        return {"id": self.id, "description": self.description, "params": self.params,
                "equation": self.equation.describe(),
                "passed": all(r["passed"] for r in results), "facts": results}

    def to_json(self):
        return {"id": self.id, "description": self.description, "params": self.params,
                "equation": self.equation.describe(),
                "known_facts": [{"fact": f.id, "description": f.description, "source": f.source,
                                 "kind": f.kind} for f in self.known_facts]}


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1.0)


def _rho_fact(fid, points, formula, source, direction=+1, rtol=1e-6, window=200.0):
    """``rho_plus`` (or ``rho_minus``) at ``points`` against ``formula`` (None means infinite)."""
    def check(eq):
        worst, rows = 0.0, []
        ok = True
        for t in points:
            expected = formula(t)
            if direction > 0:
                got = rho_plus(eq, t, t + window)
            else:
                got = rho_minus(eq, t, t - window)
            if expected is None:
                good = not got.is_finite
                rows.append([t, got.text(), "inf" if direction > 0 else "-inf"])
            else:
                err = _rel(got.value, expected) if got.is_finite else math.inf
                worst = max(worst, err)
                good = err <= rtol
                rows.append([t, got.value, expected])
            ok &= good
        return FactResult(ok, {"max_rel_error": worst, "rows": rows})
    name = "rho_plus" if direction > 0 else "rho_minus"
    return CatalogFact(fid, f"{name} matches the closed form", source, "closed-form", check)


def _oracle_fact(fid, iv, expect_disconjugate, source, kind="derived", zeros=None, ztol=1e-6):
    def check(eq):
        v = is_disconjugate(eq, iv)
        ok = v.disconjugate == expect_disconjugate
        detail = {"verdict": v.kind.value, "interval": str(iv)}
        if v.witness is not None:
            detail["witness"] = [v.witness.z1, v.witness.z2]
            if zeros is not None:
                ok &= (abs(v.witness.z1 - zeros[0]) <= ztol and abs(v.witness.z2 - zeros[1]) <= ztol)
        return FactResult(ok, detail)
    word = "disconjugate" if expect_disconjugate else "not disconjugate"
    return CatalogFact(fid, f"oracle: {word} on {iv}", source, kind, check)


def _solution_fact(fid, u, iv, source, positive=False, tol=1e-8):
    """``L u`` vanishes (relative to the size of ``u''``) on a grid of ``iv``."""
    def check(eq):
        L = apply_L(eq, as_expr(u))
        ts = np.linspace(iv.lo, iv.hi, 401)
        r = np.abs(L(ts))
        scale = max(1.0, float(np.max(np.abs(L.ddu.vector(ts)))))
        ok = float(np.max(r)) <= tol * scale
        detail = {"max_residual": float(np.max(r)), "scale": scale}
        if positive:
            umin = float(np.min(L.u.vector(ts)))
            detail["min_u"] = umin
            ok &= umin > 0
        return FactResult(ok, detail)
    return CatalogFact(fid, f"u = {u} solves the equation on {iv}", source, "derived", check)


def _main_fact(fid, iv, condition, source, r=None, only=None, branch=None):
    def check(eq):
        v = check_main(eq, iv, r=r, only=only)
        cert = v.certificate
        ok = v.disconjugate and cert.get("fired") == condition
        if branch is not None:
            ok &= cert.get("branch") == branch
        return FactResult(ok, {"verdict": v.kind.value, "fired": cert.get("fired"),
                               "branch": cert.get("branch")})
    return CatalogFact(fid, f"main theorem condition {condition} fires on {iv}", source, "derived", check)


def _region_fact(fid, iv, region, source):
    def check(eq):
        res = region_check(eq, iv, RegionQuery(region))
        return FactResult(bool(res["inside"]), res)
    return CatalogFact(fid, f"(p, q)-curve lies in region {region} on {iv}", source, "derived", check)


# --------------------------------------------------------------------------- entries

def cosh_family(A: float = 2.0) -> CatalogEntry:
    """``p = -A sinh t/(A cosh t - 1)``, ``q = 1/(A cosh t - 1)``, ``A >= 2``."""
    eq = Equation.from_text("-(A*sinh(t))/(A*cosh(t)-1)", "1/(A*cosh(t)-1)", {"A": A},
                            name=f"cosh_family(A={A:g})")
    cut = math.log(1 / A)

    def rp(t):
        return math.log((A - math.exp(t)) / (1 - A * math.exp(t))) if t < cut else None

    def rm(t):
        return math.log((A - math.exp(t)) / (1 - A * math.exp(t))) if t > -cut else None

    plus_pts = list(np.linspace(-4.0, cut - 0.05, 10)) + [cut + 0.1, 1.0]
    minus_pts = [-0.5, -cut + 0.05, 1.0, 2.5]
    src = "closed-form conjugate points of the cosh family"
    facts = [_rho_fact("rho_plus", plus_pts, rp, src),
             _rho_fact("rho_minus", minus_pts, rm, src, direction=-1),
             _oracle_fact("line_not_disconjugate", Interval.closed(-3.0, 3.0), False, src)]
    return CatalogEntry("cosh_family", eq, "cosh family with closed-form conjugate points", facts, {"A": A})


def rational_family(b: float = 1.0) -> CatalogEntry:
    """``p = -2(2t-b)/(t^2+(t-b)^2)``, ``q = 4/(t^2+(t-b)^2)``."""
    eq = Equation.from_text("-(2*(2*t-b))/(t^2+(t-b)^2)", "4/(t^2+(t-b)^2)", {"b": b},
                            name=f"rational_family(b={b:g})")

    def rp(t):
        return b * (t - b) / (2 * t - b) if t < b / 2 else None

    def rm(t):
        return b * (t - b) / (2 * t - b) if t > b / 2 else None

    plus_pts = list(np.linspace(-2.0, 0.45 * b, 20)) + [0.5 * b + 1e-3, 0.6 * b, 3.0 * b]
    minus_pts = [0.4 * b, 0.6 * b, 1.0 * b, 3.0 * b]
    src = "closed-form conjugate points of the rational family"
    facts = [_rho_fact("rho_plus", plus_pts, rp, src),
             _rho_fact("rho_minus", minus_pts, rm, src, direction=-1),
             _oracle_fact("not_disconjugate", Interval.closed(-1.0, 1.5 * b), False, src,
                          zeros=(-1.0, rp(-1.0))),
             _oracle_fact("disconjugate_right", Interval.closed(b / 2, 5.0 * b), True, src)]
    return CatalogEntry("rational_family", eq, "rational family with closed-form conjugate points", facts,
                        {"b": b})


def harmonic() -> CatalogEntry:
    eq = Equation.from_text("0", "1", name="harmonic")
    src = "sin t vanishes at 0 and pi"
    facts = [_rho_fact("rho_plus", [0.0, 1.0, -2.0], lambda t: t + math.pi, src),
             _oracle_fact("short", Interval.closed(0.0, math.pi - 1e-3), True, src, "trivial"),
             _oracle_fact("long", Interval.closed(0.0, math.pi + 1e-3), False, src, "trivial",
                          zeros=(0.0, math.pi)),
             _solution_fact("sine", "sin(t)", Interval.closed(0.0, 7.0), src)]
    return CatalogEntry("harmonic", eq, "x'' + x = 0", facts)


def euler(phat: float = 3.0) -> CatalogEntry:
    """``p = phat/t``, ``q = (phat-1)^2/(4 t^2)`` on ``(0, inf)``: the equality case."""
    c = (phat - 1) ** 2 / 4
    eq = Equation.from_text(f"{phat!r}/t", f"{c!r}/t^2", domain=Interval.open(0.0, math.inf),
                            name=f"euler(phat={phat:g})")
    src = "Euler equation with the critical q; solution t^((1-phat)/2)"
    iv = Interval(0.0, 10.0, False, True)

    def fires(e):
        v = check_euler(e, iv)
        return FactResult(v.disconjugate, {"verdict": v.kind.value})

    u = f"t^{(1 - phat) / 2!r}"
    facts = [CatalogFact("euler_fires", f"Euler criterion fires on {iv}", src, "derived", fires),
             _oracle_fact("oracle", iv, True, src),
             _solution_fact("power", u, Interval.closed(0.5, 10.0), src, positive=True)]
    return CatalogEntry("euler", eq, "Euler equation at the critical coefficient", facts, {"phat": phat})


def lyapunov_sharpness(delta: float = 0.05) -> CatalogEntry:
    eq, integral, v = lyapunov_sharpness_family(delta)
    target = 4 / (1 - 2 * delta)
    src = "hat-shaped solution with zeros at 0 and 1"

    def near(e):
        err = _rel(integral, target)
        return FactResult(err <= 0.02 if delta <= 0.05 else err <= 0.05,
                          {"integral": integral, "target": target, "rel_error": err})

    def lyap_inconclusive(e):
        res = check_lyapunov(e, 0.0, 1.0)
        return FactResult(not res.disconjugate, {"verdict": res.kind.value})

    facts = [CatalogFact("integral", "int q is close to 4/(1-2 delta)", src, "derived", near),
             _oracle_fact("two_zeros", Interval.closed(0.0, 1.0), False, src, zeros=(0.0, 1.0), ztol=1e-5),
             CatalogFact("lyapunov_silent", "Lyapunov test does not fire", src, "derived", lyap_inconclusive)]
    return CatalogEntry("lyapunov_sharpness", eq, "near-extremal family for the Lyapunov bound", facts,
                        {"delta": delta})


def sine_ratio() -> CatalogEntry:
    """``x'' + sin t/(2 + sin t) x = 0`` with the periodic solution ``2 + sin t``."""
    eq = Equation.from_text("0", "sin(t)/(2+sin(t))", name="sine_ratio")
    src = "2 + sin t is a positive periodic solution"

    def vp(e):
        v = check_vallee_poussin(e, Interval.closed(-10.0, 10.0), "2+sin(t)")
        return FactResult(v.disconjugate, {"verdict": v.kind.value})

    def mono(e):
        m = monodromy(e, 0.0, 2 * math.pi)
        return FactResult(m.unit_eigen_distance < 1e-6 and m.det_rel_error < 1e-7,
                          {"unit_eigen_distance": m.unit_eigen_distance, "det_rel_error": m.det_rel_error})

    def has_periodic(e):
        v = check_theorem_periodic(e, 2 * math.pi)
        return FactResult(v.kind is PeriodicKind.HAS and not v.hypothesis_report["q_sign_ok"],
                          {"verdict": v.kind.value, "witness": v.witness})

    def mixed(e):
        n = region_check(e, Interval.closed(0.0, 2 * math.pi), RegionQuery("N"))
        o = region_check(e, Interval.closed(0.0, 2 * math.pi), RegionQuery("O"))
        return FactResult(not n["inside"] and not o["inside"], {"N": n["inside"], "O": o["inside"]})

    facts = [_solution_fact("solution", "2+sin(t)", Interval.closed(-10.0, 10.0), src, positive=True),
             CatalogFact("vallee_poussin", "test function 2 + sin t certifies [-10, 10]", src, "derived", vp),
             _oracle_fact("oracle", Interval.closed(-20.0, 20.0), True, src),
             CatalogFact("monodromy", "eigenvalue 1 and unit determinant", src, "derived", mono),
             CatalogFact("periodic", "q changes sign and a periodic solution exists", src, "derived",
                         has_periodic),
             CatalogFact("curve_mixed", "curve meets both N and O", src, "derived", mixed)]
    return CatalogEntry("sine_ratio", eq, "periodic equation with a positive periodic solution", facts)


def exp_weight(p: str = "t") -> CatalogEntry:
    """``q = p^2/4 + p'/2`` with increasing ``p``: solution ``exp(-1/2 int p)``."""
    pe = as_expr(p)
    dp = pe.derivative()
    q = f"({pe.text()})^2/4 + ({dp.text()})/2"
    eq = Equation(pe, as_expr(q), name=f"exp_weight(p={p})")
    src = "q = p^2/4 + p'/2 has the positive solution exp(-1/2 int_0^t p)"
    iv = Interval.closed(-5.0, 5.0)

    def positive_solution(e):
        # exp(-1/2 int_0^t p) has x(0)=1, x'(0)=-p(0)/2
        p0 = float(e.p_fn.scalar(0.0))
        # [-3, 3] keeps the decaying weight well above the absolute tolerance
        right = integrate_ivp(e, 0.0, 1.0, -p0 / 2, 3.0)
        left = integrate_ivp(e, 0.0, 1.0, -p0 / 2, -3.0)
        mins = min(float(np.min(right.x_nodes)), float(np.min(left.x_nodes)))
        return FactResult(mins > 0, {"min_x": mins})

    facts = [_main_fact("condition5", iv, "5", src),
             CatalogFact("positive_solution", "the weight solution stays positive", src, "derived",
                         positive_solution),
             _oracle_fact("oracle", iv, True, src)]
    return CatalogEntry("exp_weight", eq, "equality case of main-theorem condition 5", facts, {"p": p})


def gauss_bell() -> CatalogEntry:
    eq = Equation.from_text("t", "t^2/4+1/2", name="gauss_bell")
    src = "solution exp(-t^2/4) > 0"
    iv = Interval.closed(-20.0, 20.0)
    facts = [_solution_fact("bell", "exp(-t^2/4)", Interval.closed(-6.0, 6.0), src, positive=True),
             _main_fact("condition5", iv, "5", src),
             _oracle_fact("oracle", iv, True, src),
             _region_fact("curve_in_O", iv, "O", src)]
    return CatalogEntry("gauss_bell", eq, "disconjugate although the curve lies in O", facts)


def osc_counterexample() -> CatalogEntry:
    eq = Equation.from_text("-t/2", "t^2/16", name="osc_counterexample")
    src = "solution exp(t^2/8) sin(t/2) vanishes at 0 and 2 pi"
    iv = Interval.closed(0.0, 2 * math.pi + 0.1)
    facts = [_solution_fact("oscillating", "exp(t^2/8)*sin(t/2)", Interval.closed(0.0, 7.0), src),
             _oracle_fact("oracle", iv, False, src, zeros=(0.0, 2 * math.pi)),
             _region_fact("curve_in_N", Interval.closed(-20.0, 20.0), "N", src)]
    return CatalogEntry("osc_counterexample", eq, "not disconjugate although the curve lies in N", facts)


def condition6_identity(R: float = 1.0, c: float = 1.0) -> CatalogEntry:
    """``r = -R^2``, ``p = R(1 - c^2 e^{Rt/2})/(1 + c^2 e^{Rt/2})``, ``q = p^2/4 + r``."""
    p = "R*(1-c^2*exp(R*t/2))/(1+c^2*exp(R*t/2))"
    eq = Equation.from_text(p, f"({p})^2/4 - R^2", {"R": R, "c": c}, name=f"condition6_identity(R={R:g},c={c:g})")
    src = "printed condition-6 inequality holds as an identity"
    iv = Interval.closed(-20.0, 20.0)
    r = f"-({R!r})^2"

    def printed_identity(e):
        v = check_main(e, iv, r=r, only=["6"])
        tried = v.certificate["conditions"]["6"][0]
        lit, cor = tried["dop22_as_printed"], tried["dop22"]
        return FactResult(abs(lit.value) <= 1e-9 * lit.scale and cor.ok,
                          {"printed_residual": lit.value, "corrected_residual": cor.value})

    facts = [_main_fact("condition6", iv, "6", src, r=r, only=["6"]),
             CatalogFact("printed_identity", "printed second inequality is an identity", src, "derived",
                         printed_identity),
             _oracle_fact("oracle", iv, True, src)]
    return CatalogEntry("condition6_identity", eq, "condition 6 second branch with equality", facts,
                        {"R": R, "c": c})


_FACTORIES = {
    "cosh_family": cosh_family,
    "rational_family": rational_family,
    "harmonic": harmonic,
    "euler": euler,
    "lyapunov_sharpness": lyapunov_sharpness,
    "sine_ratio": sine_ratio,
    "exp_weight": exp_weight,
    "gauss_bell": gauss_bell,
    "osc_counterexample": osc_counterexample,
    "condition6_identity": condition6_identity,
}
CATALOG_IDS = tuple(_FACTORIES)


def catalog_entry(entry_id: str, **params) -> CatalogEntry:
    try:
        factory = _FACTORIES[entry_id]
    except KeyError:
        raise KeyError(f"unknown catalog entry {entry_id!r}; known: {', '.join(CATALOG_IDS)}") from None
    return factory(**params)


def catalog_list() -> list:
    """Default instances, plus extra parameter choices for the families."""
    entries = [catalog_entry(i) for i in CATALOG_IDS]
    entries += [exp_weight("sinh(t)"), exp_weight("2*t+tanh(t)"), euler(0.5),
                lyapunov_sharpness(0.25), rational_family(2.0)]
    return entries


def run_catalog(ids="all") -> list:
    if ids == "all" or ids == ["all"]:
        entries = catalog_list()
    else:
        entries = [catalog_entry(i) for i in ([ids] if isinstance(ids, str) else ids)]
    return [e.run() for e in entries]
