"""Conjugate points and the shooting decision for disconjugacy.

An equation is disconjugate on an interval exactly when the solution with
``x(lo) = 0, x'(lo) = 1`` has no further zero there (open variant for
intervals that are not closed), so a single shot decides it.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import IntegrationError, NotDisconjugateError, PreconditionError
from .interval import Interval
from .ode import DEFAULT_TOL, Equation, Tolerances, Trajectory, find_zeros, integrate_ivp

__all__ = [
    "ExtendedPoint", "Kind", "Witness", "Verdict", "rho_plus", "rho_minus",
    "is_disconjugate", "crosscheck_bruteforce", "BruteForceReport",
    "find_positive_solution", "rho_map", "rho_map_csv", "truncation_window",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = (-50.0, 50.0)
HALF_LINE_SPAN = 100.0
RESIDUAL_LIMIT = 1e-6


@dataclass(frozen=True)
class ExtendedPoint:
    value: float
    window_limited: bool = False

    def __post_init__(self):
        if math.isinf(self.value) and not self.window_limited:
            object.__setattr__(self, "window_limited", True)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self):
        return self.value

    def text(self) -> str:
        if self.value == math.inf:
            return "inf"
        if self.value == -math.inf:
            return "-inf"
        return repr(self.value)


class Kind(str, enum.Enum):
    DISCONJUGATE = "GuaranteedDisconjugate"
    INCONCLUSIVE = "Inconclusive"
    NOT_DISCONJUGATE = "NotDisconjugate"


@dataclass(frozen=True)
class Witness:
    a: float
    z1: float
    z2: float
    trajectory: Optional[Trajectory] = field(default=None, compare=False, repr=False)

    def to_json(self):
        return {"a": self.a, "z1": self.z1, "z2": self.z2}


@dataclass(frozen=True)
class Verdict:
    """Outcome of a disconjugacy test.

    ``interval`` is where a positive claim holds; for the oracle on an
    unbounded interval it is the truncation window.
    """

    kind: Kind
    criterion: str = "oracle"
    interval: Optional[Interval] = None
    witness: Optional[Witness] = None
    window_limited: bool = False
    certificate: dict = field(default_factory=dict, compare=False)
    note: str = ""

    def __post_init__(self):
        if self.kind is Kind.NOT_DISCONJUGATE and self.witness is None and self.criterion == "oracle":
            raise ValueError("an oracle NotDisconjugate verdict needs a witness")

    @property
    def disconjugate(self) -> bool:
        return self.kind is Kind.DISCONJUGATE

    @property
    def refuted(self) -> bool:
        return self.kind is Kind.NOT_DISCONJUGATE

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "criterion": self.criterion,
               "window_limited": self.window_limited}
        if self.interval is not None:
            out["interval"] = str(self.interval)
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        if self.certificate:
            out["certificate"] = _jsonable(self.certificate)
        if self.note:
            out["note"] = self.note
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Interval):
        return str(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return obj


# --------------------------------------------------------------------------- shooting

def _margin(length: float) -> float:
    return 1e-6 * length


def _ztol(t: float) -> float:
    return 1e-8 * (1 + abs(t))


def _first_zero(eq: Equation, a: float, limit: float, tol: Tolerances, x0=0.0, v0=1.0):
    """Shoot from ``a`` towards ``limit``; first zero strictly beyond ``a`` or None.

    A near-tangent event triggers one re-run at 100x tighter tolerance.
    """
    direction = 1.0 if limit > a else -1.0
    for attempt in range(2):
        traj = integrate_ivp(eq, a, x0, v0, limit, tol, stop_at_zero=True)
        zl = find_zeros(traj)
        cut = 1e-13 * (1 + abs(a))
        beyond = [z for z in zl if direction * (z.t - a) > cut]
        if direction < 0:
            beyond.reverse()
        if not beyond:
            return None, traj
        if beyond[0].simple or attempt == 1:
            z = beyond[0]
            if not z.simple:
                # still tangent at tighter tolerance: no sign change, not a zero
                rest = [w for w in beyond if w.simple]
                return (rest[0].t if rest else None), traj
            return z.t, traj
        tol = tol.tighter(100)
    return None, traj  # pragma: no cover


def _default_limit(eq: Equation, a: float, direction: float) -> float:
    d = eq.domain
    if direction > 0:
        if math.isfinite(d.hi):
            return d.hi if d.hi_closed else d.hi - _margin(d.hi - a)
        return a + HALF_LINE_SPAN
    if math.isfinite(d.lo):
        return d.lo if d.lo_closed else d.lo + _margin(a - d.lo)
    return a - HALF_LINE_SPAN


def rho_plus(eq: Equation, a: float, window_hi: float | None = None,
             tol: Tolerances = DEFAULT_TOL) -> ExtendedPoint:
    """Right conjugate point of ``a``; ``+inf`` (window-limited) if none up to ``window_hi``."""
    limit = _default_limit(eq, a, 1.0) if window_hi is None else float(window_hi)
    if not limit > a:
        raise PreconditionError("window_hi must exceed a")
    z, _ = _first_zero(eq, a, limit, tol)
    if z is None:
        return ExtendedPoint(math.inf, True)
    return ExtendedPoint(z, False)


def rho_minus(eq: Equation, a: float, window_lo: float | None = None,
              tol: Tolerances = DEFAULT_TOL) -> ExtendedPoint:
    """Left conjugate point of ``a`` by backward integration."""
    limit = _default_limit(eq, a, -1.0) if window_lo is None else float(window_lo)
    if not limit < a:
        raise PreconditionError("window_lo must be below a")
    z, _ = _first_zero(eq, a, limit, tol)
    if z is None:
        return ExtendedPoint(-math.inf, True)
    return ExtendedPoint(z, False)


def truncation_window(iv: Interval, window=DEFAULT_WINDOW):
    """Finite truncation of ``iv``: ``window`` for the line, ``[a, a+100]`` for half-lines."""
    if iv.is_finite:
        return iv, False
    if math.isfinite(iv.lo):
        return Interval(iv.lo, iv.lo + HALF_LINE_SPAN, iv.lo_closed, True), True
    if math.isfinite(iv.hi):
        return Interval(iv.hi - HALF_LINE_SPAN, iv.hi, True, iv.hi_closed), True
    return Interval.closed(*window), True


def _effective_ends(eq: Equation, iv: Interval):
    """Shift endpoints inward by the margin where coefficients are singular or outside the domain."""
    lo, hi = iv.lo, iv.hi
    eps = _margin(iv.length)
    lo_shift = hi_shift = False
    if not eq.domain.contains(lo) or eq.singular_at(lo):
        lo, lo_shift = lo + eps, True
    if not eq.domain.contains(hi) or eq.singular_at(hi):
        hi, hi_shift = hi - eps, True
    if not (eq.domain.contains(lo) and eq.domain.contains(hi)):
        raise PreconditionError(f"interval {iv} is not inside the equation domain {eq.domain}")
    return lo, hi, lo_shift, hi_shift


def is_disconjugate(eq: Equation, iv: Interval, tol: Tolerances = DEFAULT_TOL,
                    window=DEFAULT_WINDOW) -> Verdict:
    """Decide disconjugacy on ``iv`` with one shot from its left end.

    Closed intervals need the first conjugate point beyond ``hi``; all other
    interval types only need it not strictly inside.  Unbounded intervals are
    truncated and the verdict is marked ``window_limited``.
    """
    iv_t, limited = truncation_window(iv, window)
    lo, hi, lo_shift, hi_shift = _effective_ends(eq, iv_t)
    closed = iv_t.is_closed and not hi_shift and not lo_shift
    # look slightly past hi so a conjugate point sitting on hi is seen
    reach = hi + 10 * _ztol(hi)
    if not eq.domain.contains(reach) or eq.singular_at(reach):
        reach = hi
    z, traj = _first_zero(eq, lo, reach, tol)
    if z is not None and (z <= hi + _ztol(hi) if closed else z < hi - _ztol(hi)):
        traj = _verified(eq, lo, z, traj, tol)
        return Verdict(Kind.NOT_DISCONJUGATE, "oracle", None,
                       Witness(lo, lo, z, traj), limited,
                       {"rho_plus_lo": z, "shot_from": lo})
    cert = {"rho_plus_lo": z if z is not None else math.inf, "shot_from": lo, "closed_test": closed}
    if lo_shift or hi_shift:
        cert["endpoint_margin"] = _margin(iv_t.length)
    note = "holds on the truncation window only" if limited else ""
    return Verdict(Kind.DISCONJUGATE, "oracle", iv_t, None, limited, cert, note)


def _verified(eq, lo, z, traj, tol):
    ts = np.linspace(lo, min(z, traj.span.hi), 201)
    if traj.residual(eq, ts) <= RESIDUAL_LIMIT:
        return traj
    tight = integrate_ivp(eq, lo, 0.0, 1.0, traj.span.hi, tol.tighter(100))
    res = tight.residual(eq, ts)
    if res > RESIDUAL_LIMIT:
        raise IntegrationError(f"witness trajectory fails the residual check ({res:.2g})")
    return tight


# --------------------------------------------------------------------------- brute force

@dataclass(frozen=True)
class BruteForceReport:
    n_angles: int
    zero_counts: tuple
    max_zero_count: int
    worst_angle: float
    oracle: Verdict
    agrees: bool

    def to_json(self):
        return {"n_angles": self.n_angles, "max_zero_count": self.max_zero_count,
                "worst_angle": self.worst_angle, "oracle": self.oracle.to_json(),
                "agrees": self.agrees}


def crosscheck_bruteforce(eq: Equation, iv: Interval, n_angles: int = 32,
                          tol: Tolerances = DEFAULT_TOL) -> BruteForceReport:
    """Count zeros of ``n_angles`` solutions with data ``(cos th, sin th)`` at ``iv.lo``.

    Independent of the single-shot decision; ``agrees`` compares
    ``max zero count <= 1`` with :func:`is_disconjugate`.
    """
    if n_angles < 8:
        raise PreconditionError("n_angles must be at least 8")
    iv_t, _ = truncation_window(iv)
    lo, hi, lo_shift, hi_shift = _effective_ends(eq, iv_t)
    window = Interval(lo, hi, iv_t.lo_closed or lo_shift, iv_t.hi_closed and not hi_shift)
    counts = []
    for k in range(n_angles):
        th = math.pi * k / n_angles
        x0, v0 = math.cos(th), math.sin(th)
        if 2 * k == n_angles:
            x0 = 0.0
        traj = integrate_ivp(eq, lo, x0, v0, hi, tol)
        counts.append(sum(1 for z in find_zeros(traj, window) if z.simple))
    verdict = is_disconjugate(eq, iv, tol)
    mx = max(counts)
    return BruteForceReport(n_angles, tuple(counts), mx, math.pi * int(np.argmax(counts)) / n_angles,
                            verdict, (mx <= 1) == verdict.disconjugate)


# --------------------------------------------------------------------------- positive solutions

def find_positive_solution(eq: Equation, iv: Interval, tol: Tolerances = DEFAULT_TOL,
                           n_check: int = 401) -> Trajectory:
    """A solution without zeros in ``iv`` (closed) or in its interior (otherwise).

    Closed ``[a, b]``: ``y1 + y2`` with ``y1`` from ``(0, 1)`` at ``a`` and ``y2``
    from ``(0, -1)`` at ``b``.  Otherwise ``y1`` (or ``y2`` for ``(a, b]``).
    """
    if not iv.is_finite:
        raise PreconditionError("find_positive_solution needs a finite interval")
    verdict = is_disconjugate(eq, iv, tol)
    if not verdict.disconjugate:
        raise NotDisconjugateError(f"equation is not disconjugate on {iv}", verdict)
    lo, hi, lo_shift, hi_shift = _effective_ends(eq, iv)
    closed = iv.is_closed and not (lo_shift or hi_shift)
    if closed:
        y2 = integrate_ivp(eq, hi, 0.0, -1.0, lo, tol)
        x0, v0 = y2.state(lo)
        sol = integrate_ivp(eq, lo, x0, 1.0 + v0, hi, tol)
        ts = np.linspace(lo, hi, n_check)
    elif not iv.lo_closed and iv.hi_closed and not hi_shift:
        sol = integrate_ivp(eq, hi, 0.0, -1.0, lo, tol)
        ts = np.linspace(lo, hi, n_check)[1:-1]
    else:
        sol = integrate_ivp(eq, lo, 0.0, 1.0, hi, tol)
        ts = np.linspace(lo, hi, n_check)[1:-1]
    vals = sol.x(ts)
    if not np.all(vals > 0):
        bad = float(ts[np.argmin(vals)])
        raise NotDisconjugateError(f"constructed solution is not positive (t={bad:.6g})", verdict)
    return sol


# --------------------------------------------------------------------------- rho map

def rho_map(eq: Equation, points, window=None, tol: Tolerances = DEFAULT_TOL):
    """``[(a, rho_plus(a), rho_minus(a)), ...]`` over ``points``."""
    lo_w, hi_w = (None, None) if window is None else window
    rows = []
    for a in points:
        a = float(a)
        rp = rho_plus(eq, a, hi_w if hi_w is not None and hi_w > a else None, tol)
        rm = rho_minus(eq, a, lo_w if lo_w is not None and lo_w < a else None, tol)
        rows.append((a, rp, rm))
    return rows


def rho_map_csv(rows, meta: str = "") -> str:
    buf = io.StringIO()
    if meta:
        buf.write(f"# {meta}\n")
    buf.write("a,rho_plus,rho_minus\n")
    for a, rp, rm in rows:
        buf.write(f"{float(a)!r},{rp.text()},{rm.text()}\n")
    return buf.getvalue()
