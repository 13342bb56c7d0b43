"""Factorization ``Lx = h2 (h1 (h0 x)')'`` on an interval of disconjugacy, and zero counting.

With a positive solution ``y`` and a companion ``u`` whose Wronskian
``w = y u' - y' u`` is positive, ``h0 = 1/y``, ``h1 = y^2/w``, ``h2 = w/y``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize as sp_optimize

from .conjugacy import find_positive_solution, is_disconjugate
from .errors import IntegrationError, NotDisconjugateError, PreconditionError
from .expr import as_expr
from .interval import Interval
from .ode import DEFAULT_TOL, Equation, PrimitiveOfP, Tolerances, Trajectory, apply_L, integrate_ivp

__all__ = ["Factorization", "build_factorization", "verify_factorization",
           "generalized_rolle_check", "RolleResult", "distinct_zeros"]


@dataclass(eq=False)
class Factorization:
    eq: Equation
    interval: Interval
    y: Trajectory
    u: Trajectory
    w_lo: float

    def __post_init__(self):
        self._P1 = PrimitiveOfP(self.eq, self.interval.lo, self.interval.hi)

    def w(self, t):
        """Wronskian ``y u' - y' u`` via Abel's formula."""
        return self.w_lo * np.exp(-self._P1(t))

    def h0(self, t):
        return 1.0 / self.y.x(t)

    def h1(self, t):
        return self.y.x(t) ** 2 / self.w(t)

    def h2(self, t):
        return self.w(t) / self.y.x(t)

    def product(self, t):
        return self.h0(t) * self.h1(t) * self.h2(t)

    def grid(self, n: int = 512) -> np.ndarray:
        iv = self.interval
        ts = np.linspace(iv.lo, iv.hi, n)
        # y may vanish at an excluded endpoint
        if float(self.y.x(iv.lo)) <= 0:
            ts = ts[1:]
        if float(self.y.x(iv.hi)) <= 0:
            ts = ts[:-1]
        return ts

    def check(self, n: int = 512) -> dict:
        ts = self.grid(n)
        h0, h1, h2 = self.h0(ts), self.h1(ts), self.h2(ts)
        wdet = self.y.x(ts) * self.u.dx(ts) - self.y.dx(ts) * self.u.x(ts)
        return {
            "product_error": float(np.max(np.abs(h0 * h1 * h2 - 1.0))),
            "min_h0": float(np.min(h0)), "min_h1": float(np.min(h1)), "min_h2": float(np.min(h2)),
            "positive": bool(np.all(h0 > 0) and np.all(h1 > 0) and np.all(h2 > 0)),
            "wronskian_rel_gap": float(np.max(np.abs(wdet - self.w(ts)) / np.abs(self.w(ts)))),
        }

    def to_csv(self, n: int = 101, path_or_buf=None) -> str | None:
        ts = self.grid(n)
        buf = io.StringIO()
        buf.write(f"# factorization on {self.interval} p={self.eq.p.text()} q={self.eq.q.text()}\n")
        buf.write("t,h0,h1,h2,product\n")
        for t, a, b, c in zip(ts, self.h0(ts), self.h1(ts), self.h2(ts)):
            t, a, b, c = float(t), float(a), float(b), float(c)
            buf.write(f"{t!r},{a!r},{b!r},{c!r},{a * b * c!r}\n")
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)
        return None


def build_factorization(eq: Equation, iv: Interval, tol: Tolerances = DEFAULT_TOL) -> Factorization:
    """Positive ``y`` from :func:`find_positive_solution`, ``u`` shot with ``(1, 0)`` at ``iv.lo``."""
    if not iv.is_finite:
        raise PreconditionError("factorization needs a finite interval")
    y = find_positive_solution(eq, iv, tol)
    lo, hi = y.span.lo, y.span.hi
    y0, dy0 = y.state(lo)
    u0, du0 = 1.0, 0.0
    w0 = -dy0  # y u' - y' u at lo
    if abs(w0) <= 1e-12 * (abs(y0) + abs(dy0)):
        # y is itself the (1, 0) solution up to scale: take the (0, 1) one
        u0, du0 = 0.0, 1.0
        w0 = y0
    if w0 < 0:
        u0, du0, w0 = -u0, -du0, -w0
    u = integrate_ivp(eq, lo, u0, du0, hi, tol)
    fact = Factorization(eq, Interval(lo, hi, iv.lo_closed, iv.hi_closed), y, u, w0)
    if not fact.check(129)["positive"]:
        raise IntegrationError("factor functions are not positive on the grid")
    return fact


def verify_factorization(eq: Equation, fact: Factorization, u_test, grid=None) -> dict:
    """Compare ``L u`` with ``h2 (h1 (h0 u)')'`` on ``grid``.

    ``(h0 x)' = (x' y - x y')/y^2``; ``h1 (h0 x)' = (x' y - x y')/w`` and its
    derivative uses ``w' = -p w`` and ``y''`` from the dense output.
    """
    L = apply_L(eq, u_test)
    ts = fact.grid(201) if grid is None else np.asarray(grid, float)
    x, dx, ddx = L.u.vector(ts), L.du.vector(ts), L.ddu.vector(ts)
    y, dy = fact.y.state(ts)
    _, ddy = fact.y.interp_derivative(ts)
    w = fact.w(ts)
    p = eq.p_fn.vector(ts)
    m = (dx * y - x * dy) / w
    dm = ((ddx * y - x * ddy) + p * (dx * y - x * dy)) / w
    rhs = fact.h2(ts) * dm
    lhs = L(ts)
    scale = max(1.0, float(np.max(np.abs(ddx))), float(np.max(np.abs(p * dx))),
                float(np.max(np.abs(eq.q_fn.vector(ts) * x))))
    diff = float(np.max(np.abs(lhs - rhs)))
    return {"max_residual": diff, "scale": scale, "relative": diff / scale,
            "inner_max": float(np.max(np.abs(m)))}


def distinct_zeros(fn, lo: float, hi: float, include_lo: bool = True, include_hi: bool = True,
                   n: int = 4001, radius: float = 1e-7):
    """Geometrically distinct zeros of a vectorized ``fn`` on an interval.

    Sign changes are refined with Brent's method; touching zeros are found
    as grid minima of ``|fn|`` refined by bounded minimization.  Zeros closer
    than ``radius * (1 + |t|)`` are merged.  Returns ``None`` when ``fn``
    vanishes identically on the grid.
    """
    ts = np.linspace(lo, hi, n)
    f = np.asarray(fn(ts), float)
    scale = max(float(np.max(np.abs(f))), 1e-300)
    if scale <= 1e-13:
        return None
    tiny = 1e-13 * scale

    def f1(t):
        return float(fn(np.array([t]))[0])

    found = list(ts[np.abs(f) <= tiny])
    sign = np.sign(np.where(np.abs(f) <= tiny, 0.0, f))
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        # flat multiple roots may not meet xtol; the last bracket is still valid
        root, _ = sp_optimize.brentq(f1, ts[i], ts[i + 1], xtol=1e-14, rtol=1e-15, maxiter=500,
                                     full_output=True, disp=False)
        found.append(root)
    af = np.abs(f)
    for i in range(1, n - 1):
        if af[i] <= af[i - 1] and af[i] <= af[i + 1] and sign[i - 1] * sign[i + 1] > 0 and af[i] > tiny:
            r = sp_optimize.minimize_scalar(lambda t: abs(f1(t)), bounds=(ts[i - 1], ts[i + 1]),
                                            method="bounded", options={"xatol": 1e-12})
            if abs(f1(r.x)) <= 1e-10 * scale:
                found.append(float(r.x))
    found.sort()
    zeros = []
    for z in found:
        if zeros and abs(z - zeros[-1]) <= radius * (1 + abs(z)):
            continue
        zeros.append(float(z))
    rl, rh = radius * (1 + abs(lo)), radius * (1 + abs(hi))
    return [z for z in zeros
            if (include_lo or z > lo + rl) and (include_hi or z < hi - rh)]


@dataclass
class RolleResult:
    m: int
    k: float            # inf when Lu vanishes identically
    holds: bool
    zeros_u: list
    zeros_Lu: list

    def to_json(self):
        return {"m": self.m, "k": "inf" if math.isinf(self.k) else int(self.k), "holds": self.holds,
                "zeros_u": self.zeros_u, "zeros_Lu": self.zeros_Lu}


def generalized_rolle_check(eq: Equation, iv: Interval, u_test, tol: Tolerances = DEFAULT_TOL,
                            n: int = 4001) -> RolleResult:
    """Zero counts ``m`` of ``u_test`` and ``k`` of ``L u_test``; disconjugacy forces ``k >= m - 2``."""
    verdict = is_disconjugate(eq, iv, tol)
    if not verdict.disconjugate:
        raise NotDisconjugateError(f"equation is not disconjugate on {iv}", verdict)
    L = apply_L(eq, as_expr(u_test))
    args = (iv.lo, iv.hi, iv.lo_closed, iv.hi_closed, n)
    zu = distinct_zeros(L.u.vector, *args)
    zl = distinct_zeros(lambda t: L(t), *args)
    if zu is None:
        raise PreconditionError("u_test vanishes identically")
    m = len(zu)
    k = math.inf if zl is None else len(zl)
    return RolleResult(m, k, k >= m - 2, zu, zl or [])
