"""Sufficient conditions for disconjugacy and the (p, q)-plane tests.

Every "for all t" inequality is checked on a 2048-point grid with local
refinement around near-active points; a non-strict inequality passes with
slack ``1e-9 * scale``.  Positive verdicts therefore mean *grid-verified*,
and :func:`run_all` cross-checks each of them against the shooting oracle.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize as sp_optimize

from .conjugacy import Kind, Verdict, Witness, _jsonable, is_disconjugate, rho_plus, truncation_window
from .errors import (ExprDomainError, ExprError, IntegrationError, NotDifferentiableError,
                     PreconditionError, QuadratureError, SoundnessViolation)
from .expr import BinOp, CoeffExpr, Num, Param, Var, as_expr
from .interval import Interval
from .ode import DEFAULT_TOL, Equation, PrimitiveOfP, Tolerances, apply_L

__all__ = [
    "check_constant", "check_euler", "check_lyapunov", "lyapunov_sharpness_family",
    "check_vallee_poussin", "check_A", "check_B", "check_C", "check_D",
    "check_XA1", "check_XA2", "check_XA3", "check_main", "run_all",
    "CriteriaOptions", "CriteriaReport", "RegionQuery", "region_check",
    "substitute_half_line", "HalfLineTransform", "xa2_factors", "R_FAMILY",
]

GRID_N = 2048
SLACK = 1e-9
REFINE_BAND = 1e-6
R_FAMILY = (-4.0, -2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_NUMERIC_ERRORS = (ExprDomainError, QuadratureError, IntegrationError, FloatingPointError,
                   OverflowError, ZeroDivisionError)


# --------------------------------------------------------------------------- grid helpers

@dataclass
class SupCheck:
    """``max_t (lhs - rhs)`` on a refined grid."""

    value: float
    t: float
    scale: float
    n_points: int

    @property
    def ok(self) -> bool:
        return self.value <= SLACK * self.scale

    def to_json(self):
        return {"max_violation": self.value, "at": self.t, "scale": self.scale,
                "grid_points": self.n_points, "holds": self.ok}


def _sup_check(fn, ts) -> SupCheck:
    """``fn(ts) -> (lhs, rhs)``; refine between neighbours of near-active points."""
    ts = np.asarray(ts, dtype=float)
    lhs, rhs = fn(ts)
    lhs, rhs = np.broadcast_arrays(np.asarray(lhs, float), np.asarray(rhs, float))
    d = lhs - rhs
    scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    near = np.flatnonzero(d > -REFINE_BAND * scale)
    if near.size:
        near = near[np.argsort(d[near])[::-1][:16]]
        pieces = [np.linspace(ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)], 33) for i in near]
        extra = np.concatenate(pieces)
        l2, r2 = fn(extra)
        l2, r2 = np.broadcast_arrays(np.asarray(l2, float), np.asarray(r2, float))
        ts = np.concatenate([ts, extra])
        d = np.concatenate([d, l2 - r2])
    i = int(np.argmax(d))
    return SupCheck(float(d[i]), float(ts[i]), scale, int(len(ts)))


def _as_interval(iv, b=None) -> Interval:
    if b is not None:
        return Interval.closed(float(iv), float(b))
    if isinstance(iv, Interval):
        return iv
    lo, hi = iv
    return Interval.closed(float(lo), float(hi))


def _grid(eq: Equation, iv: Interval, n: int = GRID_N, interior: bool = False) -> np.ndarray:
    """Grid over finite ``iv``; endpoints kept only when included and non-singular."""
    ts = np.linspace(iv.lo, iv.hi, n)
    keep_lo = not interior and iv.lo_closed and not eq.singular_at(iv.lo)
    keep_hi = not interior and iv.hi_closed and not eq.singular_at(iv.hi)
    return ts[(0 if keep_lo else 1):(n if keep_hi else n - 1)]


def _finite(iv: Interval):
    """Finite truncation plus the window-limited flag."""
    return truncation_window(iv)


def _fire(name, iv, cert, note="", limited=False) -> Verdict:
    cert = dict(cert)
    cert.setdefault("grid_verified", True)
    return Verdict(Kind.DISCONJUGATE, name, iv, None, limited, cert, note)


def _inconclusive(name, cert=None, note="") -> Verdict:
    return Verdict(Kind.INCONCLUSIVE, name, None, None, False, dict(cert or {}), note)


def _guard(name):
    """Turn numerical failures inside a check into an Inconclusive verdict."""
    def deco(fn):
        def wrapper(*args, **kw):
            try:
                with np.errstate(over="raise", divide="raise", invalid="raise", under="ignore"):
                    return fn(*args, **kw)
            except _NUMERIC_ERRORS as exc:
                return _inconclusive(name, {"error": type(exc).__name__}, f"numerical failure: {exc}")
        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        wrapper.__wrapped__ = fn
        return wrapper
    return deco


def _const_value(fn, ts) -> Optional[float]:
    """Structural constant, or the grid value when constant within 1e-12."""
    if fn.constant is not None:
        return float(fn.constant)
    vals = fn.vector(ts)
    if np.ptp(vals) <= 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        return float(np.mean(vals))
    return None


def _dp(eq: Equation):
    return eq.p.derivative().compile(eq.params)


# --------------------------------------------------------------------------- constant coefficients

@_guard("constant")
def check_constant(eq: Equation, iv: Optional[Interval] = None) -> Verdict:
    """Constant coefficients: disconjugate on the line iff ``p^2 - 4q >= 0``."""
    window = _finite(iv)[0] if iv is not None else Interval.closed(*eq.sample_window())
    ts = _grid(eq, window, 257, interior=True)
    p = _const_value(eq.p_fn, ts)
    q = _const_value(eq.q_fn, ts)
    if p is None or q is None:
        return _inconclusive("constant", note="coefficients are not constant")
    disc = p * p - 4 * q
    cert = {"p": p, "q": q, "discriminant": disc}
    if disc >= -SLACK * max(1.0, p * p, 4 * abs(q)):
        r = math.sqrt(max(disc, 0.0))
        cert["roots"] = [(-p - r) / 2, (-p + r) / 2]
        return _fire("constant", iv or Interval.real_line(), cert,
                     "real characteristic roots: disconjugate on the real line")
    gamma, delta = -p / 2, math.sqrt(-disc) / 2
    cert.update(gamma=gamma, delta=delta, zero_spacing=math.pi / delta)
    a0 = window.lo if eq.domain.contains(window.lo) else window.lo + 1e-6 * window.length
    reach = a0 + 1.05 * math.pi / delta
    z = rho_plus(eq, a0, reach) if eq.domain.contains(reach) else None
    witness = Witness(a0, a0, z.value) if z is not None and z.is_finite else None
    return Verdict(Kind.NOT_DISCONJUGATE, "constant", None, witness, False, cert,
                   "complex characteristic roots: solutions e^{gamma t} cos(delta t) oscillate")


# --------------------------------------------------------------------------- Euler comparison

def _euler_phat(eq: Equation, ts) -> Optional[float]:
    root = eq.p.bind(eq.params).root
    if isinstance(root, BinOp) and root.op == "/" and isinstance(root.right, Var) \
            and isinstance(root.left, Num):
        return root.left.value
    if eq.p_fn.constant is not None and eq.p_fn.constant == 0.0:
        return 0.0
    vals = eq.p_fn.vector(ts) * ts
    if np.ptp(vals) <= 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        return float(np.mean(vals))
    return None


@_guard("euler")
def check_euler(eq: Equation, iv: Interval) -> Verdict:
    """``p = phat/t`` and ``t^2 q(t) <= (phat-1)^2/4`` on ``iv`` inside ``(0, inf)``."""
    if iv.lo < 0:
        return _inconclusive("euler", note="interval must lie in (0, inf)")
    win, limited = _finite(iv)
    ts = _grid(eq, win, interior=False)
    ts = ts[ts > 0]
    if win.lo == 0.0 or win.lo < 1e-3 * win.length:
        near = np.geomspace(max(win.lo, 1e-9 * win.length) + 1e-12, win.lo + win.length / 100, 256)
        ts = np.union1d(ts, near[near > win.lo])
    phat = _euler_phat(eq, ts)
    if phat is None:
        return _inconclusive("euler", note="p is not of the form phat/t")
    bound = (phat - 1) ** 2 / 4
    chk = _sup_check(lambda t: (t * t * eq.q_fn.vector(t), bound), ts)
    cert = {"phat": phat, "bound_t2q": bound, "check": chk}
    if chk.ok:
        return _fire("euler", iv if not limited else win, cert, limited=limited)
    return _inconclusive("euler", cert, "t^2 q(t) exceeds (phat-1)^2/4")


# --------------------------------------------------------------------------- Lyapunov

def _is_zero_fn(fn, ts) -> bool:
    if fn.constant is not None:
        return fn.constant == 0.0
    return float(np.max(np.abs(fn.vector(ts)))) <= 1e-12


@_guard("lyapunov")
def check_lyapunov(eq: Equation, a, b=None) -> Verdict:
    """``p = 0`` and ``int_a^b q_+ <= 4/(b-a)`` gives disconjugacy on ``[a, b]``."""
    iv = _as_interval(a, b)
    if not iv.is_finite:
        return _inconclusive("lyapunov", note="needs a finite interval")
    lo, hi = iv.lo, iv.hi
    ts = _grid(eq, iv, interior=True)
    if not _is_zero_fn(eq.p_fn, ts):
        return _inconclusive("lyapunov", note="p is not identically zero")
    q = eq.q_fn.scalar
    pts = [bp for bp in eq.breakpoints if lo < bp < hi] or None
    val, err = sp_integrate.quad(lambda t: max(q(t), 0.0), lo, hi, limit=500,
                                 epsabs=1e-12, epsrel=1e-11, points=pts)
    if err > 1e-7 * max(1.0, abs(val)):
        raise QuadratureError(f"integral of q_+ unreliable (err={err:.2g})")
    bound = 4.0 / (hi - lo)
    cert = {"integral_q_plus": val, "bound": bound,
            "q_nonnegative": bool(np.all(eq.q_fn.vector(ts) >= 0))}
    if val <= bound + SLACK * max(1.0, bound):
        return _fire("lyapunov", Interval.closed(lo, hi), cert)
    return _inconclusive("lyapunov", cert, "integral of q_+ exceeds 4/(b-a)")


def _sharpness_parts(delta: float, n: int = 20, eps: float = 1e-6):
    """Text for the clamped variable ``u`` and the bridge profile pieces."""
    m1, m2 = 2 * n + 1, 2 * n + 3
    norm = 1 / m1 - 1 / m2 + eps * 2 / 3
    u = f"max(-1, min(1, (t-0.5)/{delta!r}))"
    dg = f"((1-({u})^2)*(({u})^{2 * n}+{eps!r})/{norm!r})"
    G = (f"((({u})^{m1 + 1}/{m1 * (m1 + 1)} - ({u})^{m2 + 1}/{m2 * (m2 + 1)}"
         f" + {eps!r}*(({u})^2/2 - ({u})^4/12))/{norm!r})")
    G1 = (1 / (m1 * (m1 + 1)) - 1 / (m2 * (m2 + 1)) + eps * (1 / 2 - 1 / 12)) / norm
    V = f"(0.5-{delta!r}-{delta!r}*({G}-{G1!r}))"
    return dg, V


def lyapunov_sharpness_family(delta: float):
    """C^2 hat-shaped solution ``v`` with zeros at 0 and 1 and ``q = -v''/v``.

    ``v(t) = t`` left of ``1/2 - delta``, ``1 - t`` right of ``1/2 + delta``;
    on the bridge ``v' = -g(u)`` with ``u = (t - 1/2)/delta`` and
    ``g' ~ (1 - u^2)(u^40 + 1e-6)``, which concentrates the curvature near
    the middle so that ``int q`` approaches ``4/(1 - 2 delta)``.

    Returns ``(equation, integral of q, v)``.
    """
    delta = float(delta)
    if not 0 < delta < 0.5:
        raise PreconditionError("delta must lie in (0, 1/2)")
    dg, V = _sharpness_parts(delta)
    q = as_expr(f"{dg}/({delta!r}*{V})")
    v = as_expr(f"{V} + min(t-{0.5 - delta!r}, 0) - max(t-{0.5 + delta!r}, 0)")
    bps = (0.5 - delta, 0.5 + delta)
    eq = Equation(CoeffExpr.const(0.0), q, Interval.closed(0.0, 1.0), {}, bps,
                  name=f"lyapunov_sharpness(delta={delta:g})")
    qf = eq.q_fn.scalar
    val, _ = sp_integrate.quad(qf, bps[0], bps[1], limit=400, epsabs=1e-13, epsrel=1e-12)
    return eq, val, v


# --------------------------------------------------------------------------- Vallee-Poussin test function

@_guard("vallee_poussin")
def check_vallee_poussin(eq: Equation, iv: Interval, v) -> Verdict:
    """Test function ``v > 0`` with ``Lv <= 0``.

    ``v > 0`` on ``(a, b]`` gives ``[a, b]``; ``v > 0`` on ``(a, b)`` only gives ``[a, b)``.
    """
    v = as_expr(v)
    try:
        L = apply_L(eq, v)
    except NotDifferentiableError:
        return _inconclusive("vallee_poussin", note="test function is not twice differentiable")
    win, limited = _finite(iv)
    ts = _grid(eq, win)
    vals = L.u.vector(ts)
    lo, hi = win.lo, win.hi
    inner = ts[(ts > lo) & (ts < hi)]
    pos_open = bool(np.all(L.u.vector(inner) > 0))
    # v(b) must be clearly positive: sin(pi) evaluates to 1.2e-16
    pos_b = pos_open and (not eq.singular_at(hi)) and L.u.scalar(hi) > SLACK * max(1.0, float(np.max(np.abs(vals))))
    p = eq.p_fn.vector(ts)
    q = eq.q_fn.vector(ts)
    du, ddu = L.du.vector(ts), L.ddu.vector(ts)
    scale = max(1.0, float(np.max(np.abs(ddu))), float(np.max(np.abs(p * du))),
                float(np.max(np.abs(q * vals))))

    def lhs(t):
        return L.ddu.vector(t) + eq.p_fn.vector(t) * L.du.vector(t) + eq.q_fn.vector(t) * L.u.vector(t), 0.0

    chk = _sup_check(lhs, ts)
    cert = {"v": v.text(), "v_positive_open": pos_open, "v_positive_at_b": pos_b,
            "Lv_check": chk, "Lv_scale": scale}
    if not pos_open:
        return _inconclusive("vallee_poussin", cert, "v is not positive on the interior")
    if chk.value > SLACK * scale:
        return _inconclusive("vallee_poussin", cert, "Lv > 0 somewhere on the grid")
    if win.is_closed and pos_b:
        return _fire("vallee_poussin", win, cert, limited=limited)
    return _fire("vallee_poussin", Interval(lo, hi, True, False), cert, limited=limited)


# --------------------------------------------------------------------------- Criteria A-D

@_guard("A")
def check_A(eq: Equation, iv: Interval) -> Verdict:
    """``q <= 0`` on the interval."""
    win, limited = _finite(iv)
    chk = _sup_check(lambda t: (eq.q_fn.vector(t), 0.0), _grid(eq, win))
    if chk.ok:
        return _fire("A", win, {"check": chk}, limited=limited)
    return _inconclusive("A", {"check": chk}, "q > 0 somewhere")


def _endpoint_ratio(eq: Equation, a: float, b: float, limit: float = 1e3):
    """``max |p(t)|/(t-a)`` near ``a`` and ``|p(t)|/(b-t)`` near ``b``."""
    L = b - a
    off = np.geomspace(1e-6 * L, L / 100, 64)
    ra = rb = 0.0
    for t, d in ((a + off, off), (b - off, off)):
        ratio = float(np.max(np.abs(eq.p_fn.vector(t)) / d))
        if t[0] > a + L / 2:
            rb = ratio
        else:
            ra = ratio
    return ra, rb, max(ra, rb) <= limit


@_guard("B")
def check_B(eq: Equation, a, b=None) -> Verdict:
    """Sine test function ``sin(pi (t-a)/(b-a))``; conclusion on ``[a, b)``."""
    iv = _as_interval(a, b)
    if not iv.is_finite:
        return _inconclusive("B", note="needs a finite interval")
    a, b = iv.lo, iv.hi
    L = b - a
    ts = _grid(eq, iv, interior=True)
    cert = {}
    if not _is_zero_fn(eq.p_fn, ts):
        ra, rb, ok = _endpoint_ratio(eq, a, b)
        cert["endpoint_ratio"] = {"at_a": ra, "at_b": rb, "limit": 1e3, "holds": ok}
        if not ok:
            return _inconclusive("B", cert, "p is not O(t-a), O(b-t) at the endpoints (ratio proxy)")
    k = math.pi / L

    def fn(t):
        x = k * (t - a)
        return k * np.cos(x) / np.sin(x) * eq.p_fn.vector(t) + eq.q_fn.vector(t), k * k

    chk = _sup_check(fn, ts)
    cert["check"] = chk
    if chk.ok:
        return _fire("B", Interval(a, b, True, False), cert)
    return _inconclusive("B", cert, "sine-test inequality fails")


@_guard("C")
def check_C(eq: Equation, a, b=None) -> Verdict:
    """Parabola test function ``(b-t)(t-a)/2``: pointwise form (C1) or sup form (C2)."""
    iv = _as_interval(a, b)
    if not iv.is_finite:
        return _inconclusive("C", note="needs a finite interval")
    a, b = iv.lo, iv.hi
    L = b - a
    ts = _grid(eq, iv, interior=True)

    def c1(t):
        return (np.abs(eq.p_fn.vector(t)) * np.abs((a + b) / 2 - t)
                + np.abs(eq.q_fn.vector(t)) * (b - t) * (t - a) / 2), 1.0

    chk1 = _sup_check(c1, ts)
    sp = _sup_check(lambda t: (np.abs(eq.p_fn.vector(t)), 0.0), ts).value
    sq = _sup_check(lambda t: (np.abs(eq.q_fn.vector(t)), 0.0), ts).value
    c2 = L / 2 * sp + L * L / 8 * sq
    c2_ok = c2 <= 1 + SLACK * max(1.0, c2)
    cert = {"C1": chk1, "C2": {"value": c2, "essup_p": sp, "essup_q": sq, "holds": c2_ok,
                               "essup": "grid maximum"},
            "fired": [n for n, ok in (("C1", chk1.ok), ("C2", c2_ok)) if ok]}
    if chk1.ok or c2_ok:
        return _fire("C", Interval(a, b, True, False), cert)
    return _inconclusive("C", cert, "neither (C1) nor (C2) holds")


@_guard("D")
def check_D(eq: Equation, iv: Interval) -> Verdict:
    """Exists ``nu`` with ``nu^2 + p nu + q <= 0``: test function ``e^{nu t}``."""
    win, limited = _finite(iv)
    ts = _grid(eq, win)
    p = eq.p_fn.vector(ts)
    q = eq.q_fn.vector(ts)
    B = 1.0 + 2 * float(np.max(np.abs(p))) + math.sqrt(float(np.max(np.abs(q))))

    def g(nu):
        return float(np.max(nu * nu + p * nu + q))

    res = sp_optimize.minimize_scalar(g, bounds=(-B, B), method="bounded",
                                      options={"xatol": 1e-10, "maxiter": 500})
    nu = float(res.x)
    # also try the pointwise-optimal nu for constant p
    for cand in (-float(np.mean(p)) / 2, 0.0):
        if g(cand) < g(nu):
            nu = cand
    chk = _sup_check(lambda t: (nu * nu + eq.p_fn.vector(t) * nu + eq.q_fn.vector(t), 0.0), ts)
    cert = {"nu": nu, "check": chk, "bracket": [-B, B]}
    if chk.ok:
        return _fire("D", win, cert, limited=limited)
    return _inconclusive("D", cert, "no nu with P(t, nu) <= 0 found")


# --------------------------------------------------------------------------- XA1-XA3

def _sinhc(z):
    """``sinh(sqrt z)/sqrt z`` continued to ``z < 0`` as ``sin(sqrt(-z))/sqrt(-z)``."""
    z = np.asarray(z, float)
    r = np.sqrt(np.abs(z))
    small = np.abs(z) < 1e-8
    rs = np.where(small, 1.0, r)
    pos = np.sinh(np.where(z > 0, rs, 0.0)) / rs
    neg = np.sin(np.where(z < 0, rs, 0.0)) / rs
    return np.where(small, 1 + z / 6, np.where(z > 0, pos, neg))


def _coshc(z):
    z = np.asarray(z, float)
    r = np.sqrt(np.abs(z))
    return np.where(z >= 0, np.cosh(np.where(z >= 0, r, 0.0)), np.cos(np.where(z < 0, r, 0.0)))


class _ConstCauchy:
    """Cauchy function ``k(t - s)`` of ``x'' + P x' + Q x = 0``."""

    def __init__(self, P: float, Q: float):
        self.P, self.Q = P, Q
        self.alpha = -P / 2
        self.beta2 = P * P / 4 - Q

    def k(self, u):
        u = np.asarray(u, float)
        return np.exp(self.alpha * u) * u * _sinhc(self.beta2 * u * u)

    def dk(self, u):
        u = np.asarray(u, float)
        return self.alpha * self.k(u) + np.exp(self.alpha * u) * _coshc(self.beta2 * u * u)

    def first_conjugate(self) -> float:
        if self.beta2 >= 0:
            return math.inf
        return math.pi / math.sqrt(-self.beta2)


def _split_nodes(a, b, t, panels=16):
    """Gauss-Legendre nodes/weights on ``[a, t]`` and ``[t, b]`` for each ``t``."""
    t = np.asarray(t, float)[:, None]
    frac = np.linspace(0, 1, panels + 1)
    out = []
    for lo, hi in ((a + 0 * t, t), (t, b + 0 * t)):
        edges = lo + (hi - lo) * frac        # (n, panels+1)
        left, right = edges[:, :-1], edges[:, 1:]
        half = (right - left) / 2
        nodes = ((left + right) / 2)[..., None] + half[..., None] * _GL_X
        weights = half[..., None] * _GL_W
        out.append((nodes.reshape(len(t), -1), weights.reshape(len(t), -1)))
    return out


def xa1_v(P: float, Q: float, a: float, b: float, ts):
    """``v = int M ds`` and ``v' = int dM/dt ds`` for the constant-coefficient kernel.

    ``M = -G`` with ``G`` the Dirichlet Green's function of ``x'' + Px' + Qx``,
    so ``v'' + P v' + Q v = -1`` with ``v(a) = v(b) = 0``.
    """
    c = _ConstCauchy(P, Q)
    wa = -float(c.k(a - b))
    ts = np.asarray(ts, float)
    (sl, wl), (sr, wr) = _split_nodes(a, b, ts)
    T = ts[:, None]
    W_l = wa * np.exp(-P * (sl - a))
    W_r = wa * np.exp(-P * (sr - a))
    v = (-(c.k(sl - a) * c.k(T - b) / W_l) * wl).sum(1) + (-(c.k(T - a) * c.k(sr - b) / W_r) * wr).sum(1)
    dv = (-(c.k(sl - a) * c.dk(T - b) / W_l) * wl).sum(1) + (-(c.dk(T - a) * c.k(sr - b) / W_r) * wr).sum(1)
    return v, dv


@_guard("XA1")
def check_XA1(eq: Equation, a, b=None, P: float = 0.0, Q: float = 0.0) -> Verdict:
    """Auxiliary constant-coefficient equation ``x'' + Px' + Qx``; conclusion on ``[a, b)``."""
    iv = _as_interval(a, b)
    if not iv.is_finite:
        return _inconclusive("XA1", note="needs a finite interval")
    a, b = iv.lo, iv.hi
    aux = _ConstCauchy(float(P), float(Q))
    cert = {"P": P, "Q": Q, "aux_first_conjugate_distance": aux.first_conjugate()}
    if not (b - a) < aux.first_conjugate() * (1 - 1e-9):
        return _inconclusive("XA1", cert, "auxiliary equation is not disconjugate on [a, b]")
    ts = _grid(eq, iv, interior=True)

    def fn(t):
        v, dv = xa1_v(P, Q, a, b, t)
        return (eq.p_fn.vector(t) - P) * dv + (eq.q_fn.vector(t) - Q) * v, 1.0

    chk = _sup_check(fn, ts)
    cert["check"] = chk
    cert["kernel"] = "Green kernel of the auxiliary equation (weight W(s))"
    if chk.ok:
        return _fire("XA1", Interval(a, b, True, False), cert)
    return _inconclusive("XA1", cert, "inequality fails")


def xa2_factors(P: float, a: float, b: float):
    """Bound factors of the ``Q = 0`` case, evaluated at ``|P|``; ``P -> 0`` gives ``(L/2, L^2/8)``."""
    L = b - a
    P = abs(float(P))
    if P * L < 1e-7:
        return L / 2, L * L / 8
    e1 = math.expm1(-P * L)          # e^{-PL} - 1
    f1 = abs(P * L + e1) / (P * (-e1))
    h = math.expm1(-P * L / 2)       # e^{-PL/2} - 1
    f2 = 2 * (L / 2 + h / P) / (P * (2 + h))
    return f1, f2


@_guard("XA2")
def check_XA2(eq: Equation, a, b=None, P: float = 0.0) -> Verdict:
    """``|p - P| F1 + |q| F2 <= 1`` with the ``Q = 0`` kernel bounds; conclusion on ``[a, b)``."""
    iv = _as_interval(a, b)
    if not iv.is_finite:
        return _inconclusive("XA2", note="needs a finite interval")
    a, b = iv.lo, iv.hi
    f1, f2 = xa2_factors(P, a, b)
    ts = _grid(eq, iv, interior=True)
    chk = _sup_check(lambda t: (np.abs(eq.p_fn.vector(t) - P) * f1 + np.abs(eq.q_fn.vector(t)) * f2, 1.0), ts)
    cert = {"P": P, "factor_dv": f1, "factor_v": f2, "check": chk, "factors_at": "|P|"}
    if chk.ok:
        return _fire("XA2", Interval(a, b, True, False), cert)
    return _inconclusive("XA2", cert, "inequality fails")


class _Cumulative:
    """``F(s) = int_a^s f`` for a vectorized ``f`` via composite Gauss-Legendre."""

    def __init__(self, f, a: float, b: float, panels: int = 256, cuts=()):
        edges = np.linspace(a, b, panels + 1)
        extra = [c for c in cuts if a < c < b]
        if extra:
            edges = np.unique(np.concatenate([edges, extra]))
        self.f, self.edges = f, edges
        self.cum = np.concatenate([[0.0], np.cumsum(self._panel(edges[:-1], edges[1:]))])

    def _panel(self, left, right):
        left, right = np.asarray(left, float), np.asarray(right, float)
        half = (right - left) / 2
        nodes = ((left + right) / 2)[..., None] + half[..., None] * _GL_X
        return half * (self.f(nodes) @ _GL_W)

    def __call__(self, s):
        s = np.asarray(s, float)
        k = np.clip(np.searchsorted(self.edges, s, side="right") - 1, 0, len(self.edges) - 2)
        return self.cum[k] + self._panel(self.edges[k], s)


def xa3_v(eq: Equation, a: float, b: float):
    """``v(t) = int_a^b M(t, s) ds`` for the kernel of ``x'' + p x' = 0`` (returns a callable)."""
    P1 = PrimitiveOfP(eq, a, b)
    cuts = eq.breakpoints

    def e_minus(s):
        return np.exp(-P1(s))

    E = _Cumulative(e_minus, a, b, cuts=cuts)

    def e_plus(s):
        return np.exp(P1(s))

    H = _Cumulative(e_plus, a, b, cuts=cuts)
    F = _Cumulative(lambda s: np.exp(P1(s)) * E(s), a, b, cuts=cuts)
    Eb, Hb, Fb = float(E(b)), float(H(b)), float(F(b))

    def v(t):
        Et, Ft, Ht = E(t), F(t), H(t)
        return ((Eb - Et) * Ft + Et * (Eb * (Hb - Ht) - (Fb - Ft))) / Eb

    return v


@_guard("XA3")
def check_XA3(eq: Equation, a, b=None) -> Verdict:
    """``q(t) int M(t, s) ds <= 1`` with the kernel of ``x'' + p x' = 0``; conclusion on ``[a, b)``."""
    iv = _as_interval(a, b)
    if not iv.is_finite:
        return _inconclusive("XA3", note="needs a finite interval")
    a, b = iv.lo, iv.hi
    v = xa3_v(eq, a, b)
    ts = _grid(eq, iv, interior=True)
    chk = _sup_check(lambda t: (eq.q_fn.vector(t) * v(t), 1.0), ts)
    cert = {"check": chk, "q_plus": False,
            "kernel": "Green kernel of x''+p x'=0 (weight W(s))"}
    if chk.ok:
        return _fire("XA3", Interval(a, b, True, False), cert)
    return _inconclusive("XA3", cert, "inequality fails")


# --------------------------------------------------------------------------- (p, q)-plane regions

@dataclass(frozen=True)
class RegionQuery:
    region: str             # "N", "O", "Mplus", "Mminus"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.region not in ("N", "O", "Mplus", "Mminus"):
            raise ValueError(f"unknown region {self.region!r}")
        needs = self.region in ("Mplus", "Mminus")
        if needs != (self.gamma is not None):
            raise ValueError("gamma must be given exactly for Mplus/Mminus")
        if needs and self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    def excess(self, p, q):
        """Nonpositive exactly on the region."""
        p, q = np.asarray(p, float), np.asarray(q, float)
        if self.region == "N":
            return 4 * q - p * p
        if self.region == "O":
            return p * p - 4 * q
        s = 1.0 if self.region == "Mplus" else -1.0
        return q + self.gamma ** 2 - s * self.gamma * p

    def contains(self, p, q) -> bool:
        e = self.excess(p, q)
        if self.region == "O":
            return bool(np.all(e < 0))
        return bool(np.all(e <= SLACK * np.maximum(1.0, np.abs(p) ** 2 + np.abs(q))))


def region_check(eq: Equation, iv: Interval, query: RegionQuery, n: int = GRID_N) -> dict:
    """Does the sampled curve ``t -> (p(t), q(t))`` lie in the region?"""
    win, limited = _finite(iv)
    ts = _grid(eq, win, n)
    p, q = eq.p_fn.vector(ts), eq.q_fn.vector(ts)
    e = query.excess(p, q)
    return {"region": query.region, "gamma": query.gamma, "inside": query.contains(p, q),
            "max_excess": float(np.max(e)), "window_limited": limited, "grid_points": len(ts)}


# --------------------------------------------------------------------------- main theorem

def _search_gamma(p, q, sign):
    top = 1.0 + 2 * float(np.max(np.abs(p)))

    def h(g):
        return float(np.max(q + g * g - sign * g * p))

    res = sp_optimize.minimize_scalar(h, bounds=(0.0, top), method="bounded",
                                      options={"xatol": 1e-10, "maxiter": 500})
    g = float(res.x)
    for cand in (0.0, top):
        if h(cand) < h(g):
            g = cand
    return g, h(g)


def _line_fit(p, q):
    """Total least squares line through the sampled curve."""
    X = np.column_stack([p - p.mean(), q - q.mean()])
    _, sv, vt = np.linalg.svd(X, full_matrices=False)
    scale = max(float(sv[0]), 1e-300)
    return vt[0], float(sv[-1] / scale), float(sv[0])


def check_main(eq: Equation, iv: Optional[Interval] = None, r=None, only=None) -> Verdict:
    """Conditions 1, 3, 4, 5, 2, 6 of the main theorem, first that fires wins.

    Every condition is verified through its test function, so each positive
    answer also holds on any subinterval of the grid window.  Mirror branches
    (``p' <= 0``) are evaluated and reported but never fire (see notes).
    ``only`` restricts the evaluation to the named conditions ("1".."6").
    """
    iv = iv if iv is not None else Interval.closed(-50.0, 50.0)
    try:
        with np.errstate(over="raise", divide="raise", invalid="raise", under="ignore"):
            return _check_main(eq, iv, r, None if only is None else {str(c) for c in only})
    except _NUMERIC_ERRORS as exc:
        return _inconclusive("main", {"error": type(exc).__name__}, f"numerical failure: {exc}")


def _check_main(eq, iv, r, only):
    win, limited = _finite(iv)
    ts = _grid(eq, win)
    p, q = eq.p_fn.vector(ts), eq.q_fn.vector(ts)
    conds = {}

    def want(tag):
        return only is None or tag in only

    def fire(tag, **extra):
        cert = {"fired": tag, "conditions": conds, **extra}
        return _fire("main", win, cert, f"condition {tag}", limited)

    # 1) constant p and curve in N
    pc = _const_value(eq.p_fn, ts)
    if not want("1"):
        pass
    elif pc is not None:
        chk = _sup_check(lambda t: (eq.q_fn.vector(t), pc * pc / 4), ts)
        conds["1"] = {"p": pc, "check": chk}
        if chk.ok:
            return fire("1")
    else:
        conds["1"] = {"applies": False}

    # 3) curve in M+(gamma) or M-(gamma)
    for sign, name in ((1.0, "Mplus"), (-1.0, "Mminus")) if want("3") else ():
        g, val = _search_gamma(p, q, sign)
        chk = _sup_check(lambda t, g=g, s=sign: (eq.q_fn.vector(t) + g * g - s * g * eq.p_fn.vector(t), 0.0), ts)
        conds[f"3_{name}"] = {"gamma": g, "check": chk}
        if chk.ok:
            return fire("3", region=name, gamma=g)

    # 4), 5) need p'
    try:
        dpf = _dp(eq)
        dp = dpf.vector(ts)
    except (NotDifferentiableError, ExprError) as exc:
        dpf = None
        conds["4"] = conds["5"] = conds["6"] = {"skipped": f"p not differentiable: {exc}"}
    if dpf is not None and (want("4") or want("5")):
        inN = _sup_check(lambda t: (eq.q_fn.vector(t), eq.p_fn.vector(t) ** 2 / 4), ts)
        inc = _sup_check(lambda t: (-dpf.vector(t), 0.0), ts)
        dec = _sup_check(lambda t: (dpf.vector(t), 0.0), ts)
        conds["4"] = {"in_N": inN, "p_prime_nonneg": inc, "mirror_p_prime_nonpos": dec,
                      "mirror_holds": inN.ok and dec.ok, "mirror_fires": False}
        if inN.ok and inc.ok and want("4"):
            return fire("4")
        c5 = _sup_check(lambda t: (eq.q_fn.vector(t), eq.p_fn.vector(t) ** 2 / 4 + dpf.vector(t) / 2), ts)
        c5m = _sup_check(lambda t: (eq.q_fn.vector(t), eq.p_fn.vector(t) ** 2 / 4 - dpf.vector(t) / 2), ts)
        conds["5"] = {"check": c5, "p_prime_nonneg": inc.ok, "mirror_check": c5m,
                      "mirror_holds": c5m.ok and dec.ok, "mirror_fires": False}
        if c5.ok and want("5"):
            return fire("5")

    # 2) curve on a line
    if not want("2"):
        pass
    elif pc is None or _const_value(eq.q_fn, ts) is None:
        d, resid, spread = _line_fit(p, q)
        entry = {"collinearity_residual": resid}
        conds["2"] = entry
        if resid <= 1e-8 and spread > 0:
            if abs(d[1]) <= 1e-8 * max(abs(d[0]), 1e-300):
                chk = _sup_check(lambda t: (eq.q_fn.vector(t), 0.0), ts)
                entry.update(kind="q constant", check=chk)
                if chk.ok:
                    return fire("2", line="q constant <= 0")
            elif abs(d[0]) > 1e-12:
                k = d[1] / d[0]
                c = float(np.mean(q - k * p))
                entry.update(kind="q = -gamma^2 + k p", k=k, intercept=c)
                # test function e^{-kt}: L v = (k^2 - k p + q) e^{-kt}
                chk = _sup_check(lambda t: (k * k - k * eq.p_fn.vector(t) + eq.q_fn.vector(t), 0.0), ts)
                entry["check"] = chk
                if c <= 0 and k * k <= -c * (1 + 1e-9) + SLACK and chk.ok:
                    return fire("2", line={"k": k, "gamma": math.sqrt(-c)})
    else:
        conds["2"] = {"applies": False, "reason": "constant coefficients (condition 1)"}

    # 6) comparison function r
    if dpf is not None and want("6"):
        rs = [as_expr(r)] if r is not None else [CoeffExpr.const(v) for v in R_FAMILY]
        tried = []
        for rx in rs:
            rf = rx.compile(eq.params)
            qb = _sup_check(lambda t: (eq.q_fn.vector(t), eq.p_fn.vector(t) ** 2 / 4 + rf.vector(t)), ts)
            d21 = _sup_check(lambda t: (2 * rf.vector(t), dpf.vector(t)), ts)
            d22 = _sup_check(lambda t: (eq.p_fn.vector(t) ** 2 - 4 * dpf.vector(t) + 4 * rf.vector(t), 0.0), ts)
            d22_lit = _sup_check(lambda t: (eq.p_fn.vector(t) ** 2 - 4 * dpf.vector(t) + rf.vector(t), 0.0), ts)
            d21m = _sup_check(lambda t: (dpf.vector(t), -2 * rf.vector(t)), ts)
            d22m = _sup_check(lambda t: (eq.p_fn.vector(t) ** 2 + 4 * dpf.vector(t) + 4 * rf.vector(t), 0.0), ts)
            entry = {"r": rx.text(), "q_bound": qb, "dop21": d21, "dop22": d22,
                     "dop22_as_printed": d22_lit, "mirror_dop21": d21m, "mirror_dop22": d22m}
            tried.append(entry)
            if qb.ok and (d21.ok or d22.ok):
                conds["6"] = tried
                return fire("6", r=rx.text(), branch="dop21" if d21.ok else "dop22")
        conds["6"] = tried
    return _inconclusive("main", {"conditions": conds}, "no condition holds on the grid")


# --------------------------------------------------------------------------- aggregate

@dataclass
class CriteriaOptions:
    v: Optional[object] = None        # Vallee-Poussin test function
    r: Optional[object] = None        # comparison function for condition 6
    P: Optional[float] = None         # auxiliary constants for XA1/XA2
    Q: Optional[float] = None
    tol: Tolerances = DEFAULT_TOL
    raise_on_violation: bool = True


@dataclass
class CriterionEntry:
    name: str
    verdict: Verdict
    elapsed_ms: float

    def to_json(self):
        out = {"criterion": self.name, "verdict": self.verdict.kind.value,
               "certificate": _jsonable(self.verdict.certificate), "elapsed_ms": round(self.elapsed_ms, 3)}
        if self.verdict.interval is not None:
            out["interval"] = str(self.verdict.interval)
        if self.verdict.note:
            out["note"] = self.verdict.note
        if self.verdict.witness is not None:
            out["witness"] = self.verdict.witness.to_json()
        return out


@dataclass
class CriteriaReport:
    equation: Equation
    interval: Interval
    entries: list
    oracle: Verdict
    violations: list = field(default_factory=list)

    @property
    def fired(self):
        return [e.name for e in self.entries if e.verdict.disconjugate]

    @property
    def any_fired(self) -> bool:
        return bool(self.fired)

    def __getitem__(self, name) -> Verdict:
        for e in self.entries:
            if e.name == name:
                return e.verdict
        raise KeyError(name)

    def to_json(self):
        return {"equation": self.equation.describe(), "interval": str(self.interval),
                "criteria": [e.to_json() for e in self.entries],
                "oracle": self.oracle.to_json(), "fired": self.fired,
                "violations": self.violations}


def _default_PQ(eq: Equation, iv: Interval):
    ts = _grid(eq, iv, 257, interior=True)
    P = float(np.mean(eq.p_fn.vector(ts)))
    Q = min(float(np.mean(eq.q_fn.vector(ts))), P * P / 4)
    return P, Q


def _oracle_on(eq, claim: Interval, fallback: Interval, tol):
    iv = claim if claim is not None and claim.is_finite else fallback
    iv = Interval(max(iv.lo, fallback.lo), min(iv.hi, fallback.hi),
                  iv.lo_closed if iv.lo >= fallback.lo else fallback.lo_closed,
                  iv.hi_closed if iv.hi <= fallback.hi else fallback.hi_closed)
    return is_disconjugate(eq, iv, tol), iv


def run_all(eq: Equation, iv: Interval, options: Optional[CriteriaOptions] = None) -> CriteriaReport:
    """Every applicable criterion plus the oracle on the (finite) interval.

    A criterion claiming disconjugacy where the oracle finds two zeros is a
    soundness violation and raises :class:`SoundnessViolation`.
    """
    opts = options or CriteriaOptions()
    win, _ = _finite(iv)
    P, Q = _default_PQ(eq, win)
    P = opts.P if opts.P is not None else P
    Q = opts.Q if opts.Q is not None else Q
    jobs = [
        ("constant", lambda: check_constant(eq, win)),
        ("euler", lambda: check_euler(eq, win) if win.lo >= 0 else
            _inconclusive("euler", note="interval not in (0, inf)")),
        ("lyapunov", lambda: check_lyapunov(eq, win)),
        ("A", lambda: check_A(eq, win)),
        ("B", lambda: check_B(eq, win)),
        ("C", lambda: check_C(eq, win)),
        ("D", lambda: check_D(eq, win)),
        ("XA1", lambda: check_XA1(eq, win, P=P, Q=Q)),
        ("XA2", lambda: check_XA2(eq, win, P=P)),
        ("XA3", lambda: check_XA3(eq, win)),
        ("main", lambda: check_main(eq, win, opts.r)),
    ]
    if opts.v is not None:
        jobs.insert(3, ("vallee_poussin", lambda: check_vallee_poussin(eq, win, opts.v)))
    entries = []
    for name, job in jobs:
        t0 = time.perf_counter()
        verdict = job()
        entries.append(CriterionEntry(name, verdict, 1e3 * (time.perf_counter() - t0)))
    oracle = is_disconjugate(eq, win, opts.tol)
    report = CriteriaReport(eq, win, entries, oracle)
    for e in entries:
        if not e.verdict.disconjugate:
            continue
        check, where = _oracle_on(eq, e.verdict.interval, win, opts.tol)
        if check.refuted:
            report.violations.append({"criterion": e.name, "interval": str(where),
                                      "witness": check.witness.to_json()})
    if report.violations and opts.raise_on_violation:
        exc = SoundnessViolation(f"criteria {[v['criterion'] for v in report.violations]} "
                                 f"contradict the oracle on {win}")
        exc.report = report
        raise exc
    return report


# --------------------------------------------------------------------------- half-line substitution

@dataclass
class HalfLineTransform:
    a: float
    original: Equation
    literal: Equation      # x'' + p(a+t^2) x' + q(a+t^2) x = 0
    genuine: Equation      # y(tau) = x(a + tau^2), tau > 0
    comparisons: list

    def to_json(self):
        return {"a": self.a, "literal": self.literal.describe(), "genuine": self.genuine.describe(),
                "comparisons": self.comparisons}


def substitute_half_line(eq: Equation, a: Optional[float] = None, test_intervals=None,
                         tol: Tolerances = DEFAULT_TOL) -> HalfLineTransform:
    """Composed-coefficient equation on the line and the chain-rule equation.

    With ``y(tau) = x(a + tau^2)`` the chain rule gives
    ``y'' + (2 tau p(a+tau^2) - 1/tau) y' + 4 tau^2 q(a+tau^2) y = 0`` for
    ``tau > 0``.  The literal composition drops these factors; the report
    compares oracle verdicts of all three forms on matching intervals.
    """
    if a is None:
        if not math.isfinite(eq.domain.lo):
            raise PreconditionError("need a finite left end a")
        a = eq.domain.lo
    a = float(a)
    inner = as_expr(f"{a!r}+t^2")
    pc, qc = eq.p.compose(inner), eq.q.compose(inner)
    lit_domain = Interval.real_line()
    try:
        pc.compile(eq.params).scalar(0.0)
        qc.compile(eq.params).scalar(0.0)
    except ExprDomainError:
        lit_domain = Interval.open(0.0, math.inf)
    literal = Equation(pc, qc, lit_domain, eq.params, name="literal substitution")
    pg = as_expr(f"2*t*{pc.text()} - 1/t")
    qg = as_expr(f"4*t^2*{qc.text()}")
    genuine = Equation(pg, qg, Interval.open(0.0, math.inf), eq.params, name="chain-rule substitution")

    comparisons = []
    for c, d in (test_intervals or [(a + 0.25, a + 4.0), (a + 0.5, a + 20.0)]):
        row = {"x_interval": [c, d], "tau_interval": [math.sqrt(c - a), math.sqrt(d - a)]}
        tiv = Interval.closed(math.sqrt(c - a), math.sqrt(d - a))
        try:
            row["original"] = is_disconjugate(eq, Interval.closed(c, d), tol).kind.value
            row["genuine"] = is_disconjugate(genuine, tiv, tol).kind.value
            row["literal"] = is_disconjugate(literal, tiv, tol).kind.value
        except (IntegrationError, PreconditionError) as exc:
            row["error"] = str(exc)
        row["genuine_agrees"] = row.get("genuine") == row.get("original")
        row["literal_agrees"] = row.get("literal") == row.get("original")
        comparisons.append(row)
    return HalfLineTransform(a, eq, literal, genuine, comparisons)
