"""Periodic solutions: monodromy matrix and the sign/disconjugacy test for periodic equations.

A nontrivial ``T``-periodic solution exists exactly when 1 is an
eigenvalue of the period map ``M``.  Near a Jordan block the eigenvalues
of a perturbed ``M`` move like the square root of the perturbation, so
the decision uses the smallest singular value of ``M - I``, which moves
linearly; ``unit_eigen_distance`` is still reported.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conjugacy import _jsonable, is_disconjugate
from .criteria import GRID_N, SLACK, check_constant, check_D, check_main
from .errors import DisconjError, ExprDomainError
from .expr import as_expr
from .interval import Interval
from .ode import Equation, Tolerances, integral_of_p, integrate_ivp

__all__ = ["MonodromyReport", "monodromy", "check_periodicity", "PeriodicityCheck",
           "PeriodicKind", "PeriodicVerdict", "check_theorem_periodic", "MONODROMY_TOL"]

MONODROMY_TOL = Tolerances(rtol=1e-13, atol=1e-15)
HAS_PERIODIC_BELOW = 1e-8
BORDERLINE_BELOW = 1e-6


@dataclass
class MonodromyReport:
    a: float
    T: float
    matrix: np.ndarray
    eigenvalues: tuple
    det_expected: float
    unit_eigen_distance: float
    sigma_min: float            # smallest singular value of M - I
    null_vector: np.ndarray     # matching right singular vector

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @property
    def det_rel_error(self) -> float:
        return abs(self.det - self.det_expected) / abs(self.det_expected)

    @property
    def char_residual(self) -> float:
        tr, det = float(np.trace(self.matrix)), self.det
        scale = max(1.0, abs(tr), abs(det))
        return max(abs(lam * lam - tr * lam + det) for lam in self.eigenvalues) / scale

    def to_json(self):
        return {
            "a": self.a, "T": self.T, "matrix": self.matrix.tolist(),
            "eigenvalues": [[lam.real, lam.imag] for lam in self.eigenvalues],
            "det_check": {"det": self.det, "expected": self.det_expected,
                          "rel_error": self.det_rel_error},
            "unit_eigen_distance": self.unit_eigen_distance, "sigma_min": self.sigma_min,
        }


def _eigen2(m: np.ndarray):
    """Roots of ``lam^2 - tr lam + det`` in closed form."""
    tr = float(m[0, 0] + m[1, 1])
    det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    disc = cmath.sqrt(tr * tr / 4 - det)
    big = tr / 2 + disc if tr >= 0 else tr / 2 - disc
    # the product of the roots is det; avoids cancellation in the small root
    small = det / big if big != 0 else tr / 2 - disc
    return complex(big), complex(small)


def monodromy(eq: Equation, a: float = 0.0, T: float = 2 * math.pi,
              tol: Tolerances = MONODROMY_TOL) -> MonodromyReport:
    """Period map over ``[a, a+T]``: columns are the states of the (1,0) and (0,1) solutions."""
    a, T = float(a), float(T)
    if not T > 0:
        raise ValueError("T must be positive")
    b = a + T
    cols = []
    for x0, v0 in ((1.0, 0.0), (0.0, 1.0)):
        traj = integrate_ivp(eq, a, x0, v0, b, tol)
        cols.append(traj.state(b))
    m = np.array(cols, dtype=float).T
    eig = _eigen2(m)
    _, s, vt = np.linalg.svd(m - np.eye(2))
    return MonodromyReport(a, T, m, eig, math.exp(-integral_of_p(eq, a, b)),
                           float(min(abs(lam - 1) for lam in eig)), float(s[-1]), vt[-1].copy())


@dataclass
class PeriodicityCheck:
    periodic: bool
    max_gap: float
    scale: float

    def __bool__(self):
        return self.periodic

    def to_json(self):
        return dict(self.__dict__)


def check_periodicity(e, T: float, grid=None, params=None) -> PeriodicityCheck:
    """``max |e(t+T) - e(t)| <= 1e-9 * scale`` over ``grid`` (default: two periods from 0)."""
    fn = as_expr(e).compile(params or {})
    ts = np.linspace(0.0, 2 * T, 513) if grid is None else np.asarray(grid, float)
    with np.errstate(all="ignore"):
        try:
            f0, f1 = fn.vector(ts), fn.vector(ts + T)
        except ExprDomainError:
            f0 = np.array([_safe(fn.scalar, t) for t in ts])
            f1 = np.array([_safe(fn.scalar, t + T) for t in ts])
    ok = np.isfinite(f0) & np.isfinite(f1)
    if not np.any(ok):
        return PeriodicityCheck(False, math.inf, math.nan)
    scale = max(1.0, float(np.max(np.abs(f0[ok]))))
    gap = float(np.max(np.abs(f1[ok] - f0[ok])))
    # a point where only one side is defined breaks periodicity
    broken = bool(np.any(np.isfinite(f0) != np.isfinite(f1)))
    return PeriodicityCheck(gap <= SLACK * scale and not broken, gap, scale)


def _safe(f, t):
    try:
        return f(t)
    except (ExprDomainError, ArithmeticError, ValueError):
        return math.nan


class PeriodicKind(str, enum.Enum):
    NONE = "NoNontrivialPeriodic"
    HAS = "HasPeriodic"
    BORDERLINE = "Borderline"


@dataclass
class PeriodicVerdict:
    kind: PeriodicKind
    monodromy: MonodromyReport
    hypothesis_report: dict
    witness: Optional[tuple] = None     # initial data (x(a), x'(a))
    checks: dict = field(default_factory=dict)
    note: str = ""

    def to_json(self):
        out = self.monodromy.to_json()
        out.update(verdict=self.kind.value, hypothesis_report=_jsonable(self.hypothesis_report),
                   checks=_jsonable(self.checks))
        if self.witness is not None:
            out["witness"] = list(self.witness)
        if self.note:
            out["note"] = self.note
        return out


def _band(sigma: float) -> PeriodicKind:
    if sigma < HAS_PERIODIC_BELOW:
        return PeriodicKind.HAS
    if sigma <= BORDERLINE_BELOW:
        return PeriodicKind.BORDERLINE
    return PeriodicKind.NONE


def _q_sign(eq: Equation, a: float, T: float) -> dict:
    ts = np.linspace(a, a + T, GRID_N)
    q = eq.q_fn.vector(ts)
    scale = max(1.0, float(np.max(np.abs(q))))
    nonneg = bool(np.min(q) >= -SLACK * scale)
    nonpos = bool(np.max(q) <= SLACK * scale)
    nonzero = bool(np.max(np.abs(q)) > SLACK * scale)
    return {"ok": (nonneg or nonpos) and nonzero, "nonneg": nonneg, "nonpos": nonpos,
            "not_identically_zero": nonzero, "min": float(np.min(q)), "max": float(np.max(q))}


def _disconjugacy_on_line(eq: Equation, a: float, T: float, periodic: bool, window, tol):
    """Certify disconjugacy on the line, by a pointwise criterion if possible.

    The constant, D and main-theorem checks are pointwise inequalities, so
    for periodic coefficients one period of grid covers the whole line.
    """
    if periodic:
        period = Interval.closed(a, a + T)
        for name, job in (("constant", lambda: check_constant(eq, period)),
                          ("D", lambda: check_D(eq, period)),
                          ("main", lambda: check_main(eq, period))):
            v = job()
            if v.disconjugate:
                detail = v.certificate.get("fired") if name == "main" else None
                return {"ok": True, "source": f"criterion:{name}" + (f":{detail}" if detail else ""),
                        "window_limited": False}
    line = Interval.real_line() if window is None else Interval.closed(*window)
    try:
        v = is_disconjugate(eq, line, tol)
    except DisconjError as exc:
        return {"ok": False, "source": "oracle", "window_limited": True, "error": str(exc)}
    return {"ok": v.disconjugate, "source": "oracle", "window_limited": True,
            "window": str(v.interval) if v.interval is not None else None,
            "oracle": v.kind.value}


def _round_trip(eq: Equation, a: float, T: float, x0, tol) -> float:
    traj = integrate_ivp(eq, a, x0[0], x0[1], a + T, tol)
    end = np.array(traj.state(a + T))
    return float(np.linalg.norm(end - np.asarray(x0)) / np.linalg.norm(x0))


def check_theorem_periodic(eq: Equation, T: float, window=None, a: float = 0.0,
                           tol: Tolerances = MONODROMY_TOL) -> PeriodicVerdict:
    """Evaluate the three hypotheses (q sign-definite, T-periodic coefficients,
    disconjugate on the line) and cross-check with the monodromy matrix.
    """
    mono = monodromy(eq, a, T, tol)
    per_p = check_periodicity(eq.p, T, np.linspace(a, a + 2 * T, 513), eq.params)
    per_q = check_periodicity(eq.q, T, np.linspace(a, a + 2 * T, 513), eq.params)
    periodic = bool(per_p) and bool(per_q)
    qs = _q_sign(eq, a, T)
    dis = _disconjugacy_on_line(eq, a, T, periodic, window, Tolerances())
    hyp = {"q_sign_ok": qs["ok"], "periodicity_ok": periodic, "disconjugacy_ok": dis["ok"],
           "disconjugacy_source": dis["source"], "disconjugacy_window_limited": dis["window_limited"],
           "q_sign": qs, "periodicity": {"p": per_p.to_json(), "q": per_q.to_json()},
           "disconjugacy": dis}

    # base-point independence: the period map at a+T/3 is similar to M
    other = monodromy(eq, a + T / 3, T, tol)
    checks = {"sigma_min": mono.sigma_min, "unit_eigen_distance": mono.unit_eigen_distance,
              "det_rel_error": mono.det_rel_error, "char_residual": mono.char_residual,
              "second_base_point": {"a": other.a, "sigma_min": other.sigma_min,
                                    "unit_eigen_distance": other.unit_eigen_distance,
                                    "same_band": _band(other.sigma_min) is _band(mono.sigma_min)}}
    kind = _band(mono.sigma_min)
    all_hold = qs["ok"] and periodic and dis["ok"]
    note = ""
    if all_hold:
        checks["cross_validation_ok"] = mono.unit_eigen_distance > BORDERLINE_BELOW
        if checks["cross_validation_ok"]:
            return PeriodicVerdict(PeriodicKind.NONE, mono, hyp, None, checks,
                                   "all hypotheses hold; monodromy spectrum away from 1")
        note = "hypotheses hold but the monodromy has an eigenvalue near 1; monodromy answer kept"
    else:
        note = "hypotheses fail; monodromy answer only"
    witness = None
    if kind is not PeriodicKind.NONE:
        vec = mono.null_vector / np.max(np.abs(mono.null_vector))
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        vec = vec + 0.0  # no negative zeros in reports
        witness = (float(vec[0]), float(vec[1]))
        checks["witness_round_trip"] = _round_trip(eq, a, T, witness, tol)
    return PeriodicVerdict(kind, mono, hyp, witness, checks, note)
