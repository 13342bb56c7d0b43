"""Numerical core: equations, trajectories with dense output, zeros, Wronskians.

The integrator is the Dormand-Prince 5(4) pair with Hairer's PI step-size
controller and the classical 4th-order continuous extension.  The system is
two-dimensional, so the stepper works on plain floats rather than arrays.
"""
from __future__ import annotations

import bisect
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from .errors import ExprDomainError, IntegrationError, PreconditionError, QuadratureError
from .expr import CoeffExpr, Compiled, as_expr
from .interval import Interval

__all__ = [
    "Tolerances", "Equation", "Trajectory", "Zero", "ZeroList",
    "integrate_ivp", "cauchy", "find_zeros", "wronskian", "WronskianResult",
    "apply_L", "integral_of_p", "PrimitiveOfP", "DEFAULT_TOL",
]


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")

    def tighter(self, factor: float = 100.0) -> "Tolerances":
        return Tolerances(max(self.rtol / factor, 1e-14), max(self.atol / factor, 1e-16))


DEFAULT_TOL = Tolerances()


# --------------------------------------------------------------------------- equation

@dataclass(frozen=True, eq=False)
class Equation:
    """``x'' + p(t) x' + q(t) x = 0`` on ``domain``.

    ``breakpoints`` are points where a piecewise-defined coefficient is not
    smooth; integration restarts there.
    """

    p: CoeffExpr
    q: CoeffExpr
    domain: Interval = field(default_factory=Interval.real_line)
    params: Mapping[str, float] = field(default_factory=dict)
    breakpoints: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "p", as_expr(self.p))
        object.__setattr__(self, "q", as_expr(self.q))
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "breakpoints", tuple(sorted(float(b) for b in self.breakpoints)))
        object.__setattr__(self, "p_fn", self.p.compile(self.params))
        object.__setattr__(self, "q_fn", self.q.compile(self.params))
        self._check_grid()

    @classmethod
    def from_text(cls, p: str, q: str, params=None, domain=None, **kw) -> "Equation":
        return cls(as_expr(p), as_expr(q), domain or Interval.real_line(), params or {}, **kw)

    def _check_grid(self):
        lo, hi = self.sample_window()
        n = 257
        ts = lo + (hi - lo) * (np.arange(n) + 0.5) / n
        self.p_fn.vector(ts)
        self.q_fn.vector(ts)

    def sample_window(self, width: float = 50.0):
        """Finite sub-window of the domain interior used for sanity sampling."""
        d = self.domain
        lo = d.lo if math.isfinite(d.lo) else (min(-width, d.hi - 2 * width) if math.isfinite(d.hi) else -width)
        hi = d.hi if math.isfinite(d.hi) else max(width, lo + 2 * width)
        return lo, hi

    # coefficient access ---------------------------------------------------
    def p_at(self, t):
        return self.p_fn(t)

    def q_at(self, t):
        return self.q_fn(t)

    @property
    def p_constant(self):
        return self.p_fn.constant

    @property
    def q_constant(self):
        return self.q_fn.constant

    def with_coeffs(self, p=None, q=None, **kw) -> "Equation":
        return Equation(
            as_expr(p) if p is not None else self.p,
            as_expr(q) if q is not None else self.q,
            kw.get("domain", self.domain), kw.get("params", self.params),
            kw.get("breakpoints", self.breakpoints), kw.get("name", self.name))

    def singular_at(self, t: float) -> bool:
        try:
            self.p_fn.scalar(t)
            self.q_fn.scalar(t)
        except ExprDomainError:
            return True
        return False

    def describe(self) -> dict:
        return {"p": self.p.text(), "q": self.q.text(), "params": dict(self.params),
                "domain": self.domain.to_json(), "name": self.name}

    def __repr__(self):
        extra = f", params={self.params}" if self.params else ""
        return f"Equation(p={self.p.text()!r}, q={self.q.text()!r}{extra})"


# --------------------------------------------------------------------------- Dormand-Prince tableau

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1, D3, D4, D5, D6, D7 = (
    -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072,
    701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423,
)

_SAFE, _BETA = 0.9, 0.04
_EXPO1 = 0.2 - _BETA * 0.75
_FAC_MIN, _FAC_MAX = 0.1, 5.0  # hnew in [h/5, 10h]


def _rhs_factory(eq: Equation, forcing=None):
    p = eq.p_fn.scalar
    q = eq.q_fn.scalar
    pc, qc = eq.p_constant, eq.q_constant
    if forcing is None:
        if pc is not None and qc is not None:
            return lambda t, x, v: (v, -pc * v - qc * x)
        return lambda t, x, v: (v, -p(t) * v - q(t) * x)
    f = forcing
    return lambda t, x, v: (v, f(t) - p(t) * v - q(t) * x)


def _dopri_segment(rhs, t0, x0, v0, t1, tol, steps, h_init=None, stop=None, max_steps=2_000_000):
    """Integrate one smooth segment; appends (t, h, rcont) tuples to ``steps``.

    Returns the final state and the last accepted step size.  ``stop(x_samples)``
    may end the segment early after an accepted step.
    """
    rtol, atol = tol.rtol, tol.atol
    direction = 1.0 if t1 > t0 else -1.0
    t, x, v = t0, x0, v0
    k1x, k1v = rhs(t, x, v)

    def norm2(ex, ev, xa, va, xb, vb):
        sx = atol + rtol * max(abs(xa), abs(xb))
        sv = atol + rtol * max(abs(va), abs(vb))
        return math.sqrt(((ex / sx) ** 2 + (ev / sv) ** 2) / 2)

    span = abs(t1 - t0)
    if h_init is None:
        d0 = norm2(x, v, x, v, x, v)
        d1 = norm2(k1x, k1v, x, v, x, v)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, span)
        k2x, k2v = rhs(t + direction * h0, x + direction * h0 * k1x, v + direction * h0 * k1v)
        d2 = norm2(k2x - k1x, k2v - k1v, x, v, x, v) / h0
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        h = min(100 * h0, h1, span)
    else:
        h = min(abs(h_init), span)

    facold = 1e-4
    rejected = False
    nstep = 0
    while True:
        remaining = abs(t1 - t)
        if remaining <= 1e-14 * max(1.0, abs(t1)):
            break
        last = False
        if h >= remaining * (1 - 1e-12) or h > remaining - 1e-3 * h:
            h = remaining
            last = True
        if h < 1e-13 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t!r} (h={h:.3g})")
        nstep += 1
        if nstep > max_steps:
            raise IntegrationError(f"too many steps before reaching t={t1!r}")
        hs = direction * h
        k2x, k2v = rhs(t + C2 * hs, x + hs * A21 * k1x, v + hs * A21 * k1v)
        k3x, k3v = rhs(t + C3 * hs, x + hs * (A31 * k1x + A32 * k2x), v + hs * (A31 * k1v + A32 * k2v))
        k4x, k4v = rhs(t + C4 * hs,
                       x + hs * (A41 * k1x + A42 * k2x + A43 * k3x),
                       v + hs * (A41 * k1v + A42 * k2v + A43 * k3v))
        k5x, k5v = rhs(t + C5 * hs,
                       x + hs * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x),
                       v + hs * (A51 * k1v + A52 * k2v + A53 * k3v + A54 * k4v))
        k6x, k6v = rhs(t + hs,
                       x + hs * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x),
                       v + hs * (A61 * k1v + A62 * k2v + A63 * k3v + A64 * k4v + A65 * k5v))
        xn = x + hs * (A71 * k1x + A73 * k3x + A74 * k4x + A75 * k5x + A76 * k6x)
        vn = v + hs * (A71 * k1v + A73 * k3v + A74 * k4v + A75 * k5v + A76 * k6v)
        tn = t1 if last else t + hs
        k7x, k7v = rhs(tn, xn, vn)
        ex = hs * (E1 * k1x + E3 * k3x + E4 * k4x + E5 * k5x + E6 * k6x + E7 * k7x)
        ev = hs * (E1 * k1v + E3 * k3v + E4 * k4v + E5 * k5v + E6 * k6v + E7 * k7v)
        err = norm2(ex, ev, x, v, xn, vn)
        if not math.isfinite(err):
            raise IntegrationError(f"non-finite solution near t={t!r}")
        fac11 = err ** _EXPO1 if err > 0 else 0.0
        if err <= 1.0:
            fac = fac11 / facold ** _BETA
            fac = max(_FAC_MIN, min(_FAC_MAX, fac / _SAFE))
            hnew = h / fac
            facold = max(err, 1e-4)
            # dense output coefficients
            dx, dv = xn - x, vn - v
            bx, bv = hs * k1x - dx, hs * k1v - dv
            rc = (
                x, v, dx, dv, bx, bv,
                dx - hs * k7x - bx, dv - hs * k7v - bv,
                hs * (D1 * k1x + D3 * k3x + D4 * k4x + D5 * k5x + D6 * k6x + D7 * k7x),
                hs * (D1 * k1v + D3 * k3v + D4 * k4v + D5 * k5v + D6 * k6v + D7 * k7v),
            )
            steps.append((t, hs, rc))
            t, x, v = tn, xn, vn
            k1x, k1v = k7x, k7v
            if rejected:
                hnew = min(hnew, h)
            rejected = False
            h = hnew
            if stop is not None and stop(rc):
                break
            if last:
                break
        else:
            h = h / min(_FAC_MAX, fac11 / _SAFE)
            rejected = True
    return t, x, v, h


def _sign_change_in_step(rc):
    """True when the x-component of a dense step changes sign (samples at theta = k/4)."""
    x0 = rc[0]
    prev = x0
    for th in (0.25, 0.5, 0.75, 1.0):
        th1 = 1 - th
        xv = rc[0] + th * (rc[2] + th1 * (rc[4] + th * (rc[6] + th1 * rc[8])))
        if prev != 0.0 and (xv < 0) != (prev < 0) and xv != 0.0:
            return True
        if xv == 0.0 and th > 0:
            return True
        prev = xv if xv != 0.0 else prev
    return False


# --------------------------------------------------------------------------- trajectory

class Trajectory:
    """Dense-output solution ``(x, x')`` on a closed finite span.

    Nodes are stored in increasing ``t`` irrespective of the integration
    direction.  Instances are immutable after construction.
    """

    def __init__(self, steps, tol: Tolerances, t_start: float, forcing=None, equation=None):
        if not steps:
            raise IntegrationError("empty trajectory")
        t0s = np.array([s[0] for s in steps])
        hs = np.array([s[1] for s in steps])
        rc = np.array([s[2] for s in steps]).reshape(len(steps), 5, 2)
        lo = np.minimum(t0s, t0s + hs)
        order = np.argsort(lo, kind="stable")
        self._t0 = t0s[order]
        self._h = hs[order]
        self._rc = rc[order]
        self._lo = lo[order]
        self.tol = tol
        self.t_start = float(t_start)
        self.forcing = forcing
        self.equation = equation
        ends = self._t0 + self._h
        allt = np.concatenate([self._t0, ends])
        x_all = np.concatenate([self._rc[:, 0, 0], self._rc[:, 0, 0] + self._rc[:, 1, 0]])
        v_all = np.concatenate([self._rc[:, 0, 1], self._rc[:, 0, 1] + self._rc[:, 1, 1]])
        idx = np.argsort(allt, kind="stable")
        allt, x_all, v_all = allt[idx], x_all[idx], v_all[idx]
        keep = np.concatenate([[True], np.diff(allt) > 0])
        self.t = allt[keep]
        self.x_nodes = x_all[keep]
        self.dx_nodes = v_all[keep]
        self.span = Interval.closed(self.t[0], self.t[-1])
        for arr in (self._t0, self._h, self._rc, self._lo, self.t, self.x_nodes, self.dx_nodes):
            arr.flags.writeable = False

    @property
    def t_end(self) -> float:
        return float(self.t[-1] if self.t_start == self.t[0] else self.t[0])

    @property
    def nodes(self):
        return list(zip(self.t.tolist(), self.x_nodes.tolist(), self.dx_nodes.tolist()))

    @property
    def n_steps(self) -> int:
        return len(self._h)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.span.lo, self.span.hi
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - slack) or np.any(t > hi + slack):
            raise ValueError(f"t outside trajectory span {self.span}")
        i = np.searchsorted(self._lo, t, side="right") - 1
        i = np.clip(i, 0, len(self._lo) - 1)
        theta = (t - self._t0[i]) / self._h[i]
        return i, np.clip(theta, 0.0, 1.0)

    def state(self, t):
        """``(x, x')`` at ``t`` (float or array)."""
        i, th = self._locate(t)
        r = self._rc[i]
        th = np.asarray(th)[..., None]
        th1 = 1 - th
        y = r[..., 0, :] + th * (r[..., 1, :] + th1 * (r[..., 2, :] + th * (r[..., 3, :] + th1 * r[..., 4, :])))
        if np.ndim(t) == 0:
            return float(y[0]), float(y[1])
        return y[..., 0], y[..., 1]

    def x(self, t):
        return self.state(t)[0]

    def dx(self, t):
        return self.state(t)[1]

    __call__ = x

    def interp_derivative(self, t):
        """Time derivative of the interpolating polynomial for ``(x, x')``."""
        i, th = self._locate(t)
        r = self._rc[i]
        h = self._h[i][..., None]
        th = np.asarray(th)[..., None]
        th1 = 1 - th
        r2, r3, r4, r5 = r[..., 1, :], r[..., 2, :], r[..., 3, :], r[..., 4, :]
        A = r4 + th1 * r5
        dA = -r5
        B = r3 + th * A
        dB = A + th * dA
        Cc = r2 + th1 * B
        dC = -B + th1 * dB
        dy = (Cc + th * dC) / h
        if np.ndim(t) == 0:
            return float(dy[0]), float(dy[1])
        return dy[..., 0], dy[..., 1]

    def residual(self, eq: Equation | None = None, ts=None) -> float:
        """Max scaled ODE residual of the dense output on ``ts``.

        Compares the derivative of the interpolated ``x'`` with
        ``f - p x' - q x``; the scale is the largest term, or ``max|x'|``
        over the length of ``ts`` if that is larger.
        """
        eq = eq or self.equation
        if ts is None:
            ts = np.linspace(self.span.lo, self.span.hi, 401)
        ts = np.asarray(ts, dtype=float)
        x, v = self.state(ts)
        _, dv = self.interp_derivative(ts)
        p = eq.p_fn.vector(ts)
        q = eq.q_fn.vector(ts)
        f = np.zeros_like(ts) if self.forcing is None else np.array([self.forcing(s) for s in ts])
        rhs = f - p * v - q * x
        # |x'|/length is the natural size of x'' when all terms nearly cancel
        span = max(float(ts[-1] - ts[0]), 1e-300) if len(ts) > 1 else 1.0
        scale = max(np.max(np.abs(dv)), np.max(np.abs(p * v)), np.max(np.abs(q * x)), np.max(np.abs(f)),
                    np.max(np.abs(v)) / span, 1e-300)
        return float(np.max(np.abs(dv - rhs)) / scale)

    def to_csv(self, path_or_buf=None) -> str | None:
        buf = io.StringIO()
        buf.write(f"# rtol={self.tol.rtol!r} atol={self.tol.atol!r} t_start={self.t_start!r}\n")
        buf.write("t,x,dx\n")
        for t, x, v in zip(self.t, self.x_nodes, self.dx_nodes):
            buf.write(f"{float(t)!r},{float(x)!r},{float(v)!r}\n")
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)
        return None

    def __add__(self, other: "Trajectory") -> "Trajectory":
        raise TypeError("trajectories are combined by integrating summed initial data")

    def __repr__(self):
        return f"Trajectory(span={self.span}, steps={self.n_steps}, rtol={self.tol.rtol:g})"


# --------------------------------------------------------------------------- integration

def _check_in_domain(eq: Equation, t: float, what: str):
    d = eq.domain
    if not d.contains(t):
        raise PreconditionError(f"{what}={t!r} is outside the equation domain {d}")


def integrate_ivp(eq: Equation, t0: float, x0: float, v0: float, t1: float,
                  tol: Tolerances = DEFAULT_TOL, forcing=None, stop_at_zero: bool = False) -> Trajectory:
    """Solve ``Lx = f`` (``f`` = ``forcing`` or 0) with ``x(t0)=x0, x'(t0)=v0`` up to ``t1``.

    ``t1 < t0`` integrates backwards.  With ``stop_at_zero`` the integration
    ends after the first accepted step whose dense output crosses zero
    (strictly after ``t0``); the trajectory then ends at that step.
    """
    t0, t1 = float(t0), float(t1)
    if t0 == t1:
        raise PreconditionError("t0 == t1")
    _check_in_domain(eq, t0, "t0")
    _check_in_domain(eq, t1, "t1")
    if isinstance(forcing, CoeffExpr):
        forcing = forcing.compile(eq.params).scalar
    rhs = _rhs_factory(eq, forcing)
    direction = 1.0 if t1 > t0 else -1.0
    cuts = [b for b in eq.breakpoints if min(t0, t1) < b < max(t0, t1)]
    cuts.sort(reverse=direction < 0)
    targets = cuts + [t1]

    steps = []
    stopped = [False]
    if stop_at_zero:
        def stop(rc):
            if _sign_change_in_step(rc):
                stopped[0] = True
                return True
            return False
    else:
        stop = None

    t, x, v, h = t0, float(x0), float(v0), None
    try:
        for target in targets:
            t, x, v, h = _dopri_segment(rhs, t, x, v, target, tol, steps, h_init=None, stop=stop)
            if stopped[0]:
                break
    except ExprDomainError as exc:
        raise IntegrationError(f"coefficient undefined during integration: {exc}") from exc
    except OverflowError as exc:
        raise IntegrationError(f"overflow during integration near t={t!r}") from exc
    return Trajectory(steps, tol, t0, forcing=forcing, equation=eq)


def cauchy(eq: Equation, s: float, t1: float, tol: Tolerances = DEFAULT_TOL, **kw) -> Trajectory:
    """Cauchy's function ``C(., s)``: the solution with value 0 and slope 1 at ``s``."""
    return integrate_ivp(eq, s, 0.0, 1.0, t1, tol, **kw)


# --------------------------------------------------------------------------- zeros

class Zero(NamedTuple):
    t: float
    simple: bool


@dataclass(frozen=True)
class ZeroList:
    zeros: tuple = ()

    @property
    def times(self) -> list:
        return [z.t for z in self.zeros]

    @property
    def simple_times(self) -> list:
        return [z.t for z in self.zeros if z.simple]

    @property
    def suspects(self) -> list:
        return [z.t for z in self.zeros if not z.simple]

    def __len__(self):
        return len(self.zeros)

    def __iter__(self):
        return iter(self.zeros)


def _bisect(f, a, b, fa, xtol):
    """Bisection for a bracketed sign change of ``f`` on ``[a, b]``."""
    for _ in range(200):
        if abs(b - a) <= xtol:
            break
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _sample_grid(traj: Trajectory, lo: float, hi: float, per_step: int = 8):
    t0s, hs = traj._t0, traj._h
    starts = np.minimum(t0s, t0s + hs)
    ends = np.maximum(t0s, t0s + hs)
    sel = (ends >= lo) & (starts <= hi)
    theta = np.linspace(0.0, 1.0, per_step + 1)
    pts = (starts[sel][:, None] + (ends[sel] - starts[sel])[:, None] * theta[None, :]).ravel()
    pts = np.concatenate([pts, [lo, hi]])
    pts = np.unique(np.clip(pts, lo, hi))
    return pts


def find_zeros(traj: Trajectory, window: Interval | None = None, xtol: float | None = None,
               suspect_rel: float = 1e-8, component: str = "x") -> ZeroList:
    """All zeros of the dense output inside ``window`` (default: the whole span).

    Sign changes are bracketed on a per-step sample grid and refined by
    bisection on the interpolant to ``1e-12 (1 + |t|)``.  Local minima of
    ``|x|`` below ``suspect_rel`` times the solution scale without a sign change
    are reported as suspect (non-simple) zeros.  Open window endpoints exclude
    zeros lying exactly there.
    """
    window = window or traj.span
    lo = max(window.lo, traj.span.lo)
    hi = min(window.hi, traj.span.hi)
    if hi <= lo:
        return ZeroList(())
    f = (lambda s: traj.state(s)[0]) if component == "x" else (lambda s: traj.state(s)[1])
    ts = _sample_grid(traj, lo, hi)
    vals = traj.x(ts) if component == "x" else traj.dx(ts)
    scale = float(np.max(np.abs(vals))) if len(vals) else 1.0
    if scale == 0.0:
        return ZeroList(())
    out = []
    n = len(ts)
    i = 0
    while i < n:
        if vals[i] == 0.0:
            out.append(float(ts[i]))
            i += 1
            continue
        if i + 1 < n and vals[i + 1] != 0.0 and (vals[i] < 0) != (vals[i + 1] < 0):
            tol_t = xtol if xtol is not None else 1e-12 * (1 + abs(ts[i]))
            out.append(_bisect(f, float(ts[i]), float(ts[i + 1]), float(vals[i]), tol_t))
        i += 1
    zeros = [Zero(z, True) for z in out]
    # near-tangencies: interior local minima of |x| with no sign change nearby
    a = np.abs(vals)
    thresh = suspect_rel * scale
    for j in range(1, n - 1):
        if a[j] < thresh and a[j] <= a[j - 1] and a[j] <= a[j + 1] and vals[j] != 0.0:
            if (vals[j - 1] < 0) == (vals[j] < 0) == (vals[j + 1] < 0):
                if not any(abs(z - ts[j]) < 1e-9 * (1 + abs(ts[j])) for z in out):
                    zeros.append(Zero(float(ts[j]), False))
    zeros.sort(key=lambda z: z.t)
    # mark exact-sample zeros with vanishing derivative as suspect, drop excluded endpoints
    final = []
    for z in zeros:
        if not window.contains(z.t):
            continue
        if z.simple:
            d = traj.dx(z.t) if component == "x" else 0.0
            if component == "x" and abs(d) <= thresh * max(1.0, 1.0 / max(traj.span.length, 1e-300)):
                z = Zero(z.t, False)
        if final and abs(z.t - final[-1].t) <= 1e-11 * (1 + abs(z.t)):
            continue
        final.append(z)
    return ZeroList(tuple(final))


# --------------------------------------------------------------------------- Wronskian and L

def integral_of_p(eq: Equation, a: float, t: float) -> float:
    """``int_a^t p`` by adaptive Gauss-Kronrod quadrature."""
    if a == t:
        return 0.0
    pc = eq.p_constant
    if pc is not None:
        return pc * (t - a)
    pts = [b for b in eq.breakpoints if min(a, t) < b < max(a, t)] or None
    val, err = sp_integrate.quad(eq.p_fn.scalar, a, t, limit=200, epsabs=1e-13, epsrel=1e-12,
                                 points=pts)
    if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureError(f"integral of p over [{a}, {t}] unreliable (err={err:.2g})")
    return val


class WronskianResult(NamedTuple):
    abel: float          # exp(-int_a^t p)
    determinant: float   # det of the fundamental matrix with identity at a
    rel_diff: float

    @property
    def value(self) -> float:
        return self.abel


def wronskian(eq: Equation, a: float, t: float, tol: Tolerances = DEFAULT_TOL) -> WronskianResult:
    """``W(t)/W(a)`` by Abel's formula, cross-checked with two integrated solutions."""
    abel = math.exp(-integral_of_p(eq, a, t))
    if a == t:
        return WronskianResult(1.0, 1.0, 0.0)
    y1 = integrate_ivp(eq, a, 1.0, 0.0, t, tol)
    y2 = integrate_ivp(eq, a, 0.0, 1.0, t, tol)
    x1, v1 = y1.state(t)
    x2, v2 = y2.state(t)
    det = x1 * v2 - v1 * x2
    return WronskianResult(abel, det, abs(det - abel) / max(abs(abel), 1e-300))


def apply_L(eq: Equation, u) -> Callable:
    """Residual function ``t -> u'' + p u' + q u`` built from symbolic derivatives of ``u``."""
    u = as_expr(u)
    du = u.derivative()
    ddu = du.derivative()
    params = eq.params
    uf, duf, dduf = u.compile(params), du.compile(params), ddu.compile(params)
    p, q = eq.p_fn, eq.q_fn

    def residual(t):
        return dduf(t) + p(t) * duf(t) + q(t) * uf(t)

    residual.u = uf
    residual.du = duf
    residual.ddu = dduf
    return residual


class PrimitiveOfP:
    """Tabulated ``P1(s) = int_a^s p`` on ``[a, b]`` (either order of endpoints).

    Composite 8-point Gauss-Legendre on ``panels`` equal panels (breakpoints
    added as panel boundaries); evaluation inside a panel uses a fresh
    8-point rule on the partial panel, so the result is smooth in ``s``.
    """

    _X, _W = np.polynomial.legendre.leggauss(8)

    def __init__(self, eq: Equation, a: float, b: float, panels: int = 256):
        self.a = float(a)
        lo, hi = min(a, b), max(a, b)
        edges = np.linspace(lo, hi, panels + 1)
        extra = [bp for bp in eq.breakpoints if lo < bp < hi]
        if extra:
            edges = np.unique(np.concatenate([edges, extra]))
        self.edges = edges
        self.p = eq.p_fn
        self.const = eq.p_constant
        if self.const is None:
            left, right = edges[:-1], edges[1:]
            cum = np.concatenate([[0.0], np.cumsum(self._panel(left, right))])
            # shift so that P1(a) = 0
            self.cum = cum - (cum[0] if a == lo else cum[-1])

    def _panel(self, left, right):
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        nodes = mid[..., None] + half[..., None] * self._X
        return half * (self.p.vector(nodes) @ self._W)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.const is not None:
            out = self.const * (s - self.a)
        else:
            k = np.clip(np.searchsorted(self.edges, s, side="right") - 1, 0, len(self.edges) - 2)
            left = self.edges[k]
            out = self.cum[k] + self._panel(np.asarray(left, dtype=float), s)
        return float(out) if out.ndim == 0 else out
