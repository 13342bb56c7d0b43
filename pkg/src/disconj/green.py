"""Green's function of the Dirichlet problem ``Lx = f, x(a) = x(b) = 0``.

``G(t, s) = phi(s) chi(t) / W(s)`` for ``s <= t`` and ``phi(t) chi(s) / W(s)``
for ``t < s``, where ``phi = C(., a)``, ``chi`` vanishes at ``b`` with unit
slope and ``W`` is their Wronskian (Abel's formula anchored at ``a``).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate

from .conjugacy import Kind, is_disconjugate
from .errors import NotDisconjugateError, PreconditionError, QuadratureError
from .expr import as_expr
from .interval import Interval
from .ode import DEFAULT_TOL, Equation, PrimitiveOfP, Tolerances, Trajectory, cauchy, integrate_ivp

__all__ = ["GreenEval", "GreenChecks", "green_function", "solve_bvp", "shoot_bvp", "BVPSolution"]

QUAD_EPSABS = 1e-10


@dataclass
class GreenChecks:
    """Numerical check of the defining conditions of a Green's function."""

    boundary: float          # max |G(a,s)|, |G(b,s)| relative to max |G|
    continuity: float        # max |G(s+,s) - G(s-,s)| relative to max |G|
    jump_error: float        # max |dG(s+,s) - dG(s-,s) - 1|
    ode_residual: float      # scaled residual of phi and chi
    n_positive: int          # sampled interior points with G >= 0
    n_sampled: int
    displayed_identity_gap: float  # max |G - G_displayed| relative to max |G|

    @property
    def ok(self) -> bool:
        return (self.boundary <= 1e-8 and self.continuity <= 1e-8 and self.jump_error <= 1e-6
                and self.ode_residual <= 1e-6 and self.n_positive == 0)

    def to_json(self):
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d


@dataclass(eq=False)
class GreenEval:
    eq: Equation
    a: float
    b: float
    phi: Trajectory
    chi: Trajectory
    w_a: float
    tol: Tolerances = DEFAULT_TOL
    _P1: PrimitiveOfP = field(init=False, repr=False)

    def __post_init__(self):
        self._P1 = PrimitiveOfP(self.eq, self.a, self.b)

    def wronskian_at(self, s):
        """``W(s) = W(a) exp(-int_a^s p)``."""
        return self.w_a * np.exp(-self._P1(s))

    def wronskian_check(self) -> float:
        """Relative gap between Abel's ``W(b)`` and the direct determinant ``phi(b)``."""
        direct = self.phi.x(self.b)  # chi(b)=0, chi'(b)=1
        abel = float(self.wronskian_at(self.b))
        return abs(direct - abel) / abs(abel)

    def __call__(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        lower = s <= t
        first = np.where(lower, s, t)   # argument of phi
        second = np.where(lower, t, s)  # argument of chi
        g = self.phi.x(first) * self.chi.x(second) / self.wronskian_at(s)
        return float(g) if g.ndim == 0 else g

    def dt(self, t, s, side: int = 0):
        """``dG/dt``; ``side=+1/-1`` selects the branch on the diagonal."""
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        lower = (s < t) | ((s == t) & (side >= 0))
        w = self.wronskian_at(s)
        upper_val = self.phi.dx(t) * self.chi.x(s) / w
        lower_val = self.phi.x(s) * self.chi.dx(t) / w
        g = np.where(lower, lower_val, upper_val)
        return float(g) if g.ndim == 0 else g

    def displayed_identity(self, t: float, s: float) -> float:
        """``-C(b,t) C(s,a) / C(b,a)`` (and its mirror for ``t <= s``).

        Coincides with ``G`` only when ``p`` vanishes identically.
        """
        cba = self.phi.x(self.b)
        if s < t:
            cbt = 0.0 if t >= self.b else cauchy(self.eq, t, self.b, self.tol).x(self.b)
            return -cbt * self.phi.x(s) / cba
        cbs = 0.0 if s >= self.b else cauchy(self.eq, s, self.b, self.tol).x(self.b)
        return -self.phi.x(t) * cbs / cba

    def grid(self, n: int = 21):
        ts = np.linspace(self.a, self.b, n)
        T, S = np.meshgrid(ts, ts, indexing="ij")
        return T, S, self(T, S)

    def scale(self) -> float:
        _, _, g = self.grid(41)
        return max(float(np.max(np.abs(g))), 1e-300)

    def verify(self, n: int = 21, n_random: int = 100, seed: int = 0,
               identity_points: int = 5) -> GreenChecks:
        a, b = self.a, self.b
        scale = self.scale()
        s = np.linspace(a, b, n + 2)[1:-1]
        boundary = max(np.max(np.abs(self(a, s))), np.max(np.abs(self(b, s)))) / scale
        h = 1e-9 * (b - a)
        cont = np.max(np.abs(self(s + h, s) - self(s - h, s)))
        # the secant across the diagonal moves by at most 2h*max|dG|
        slope = np.max(np.abs(self.dt(s, s, 1))) + np.max(np.abs(self.dt(s, s, -1)))
        cont = max(0.0, cont - 2 * h * slope) / scale
        jump = np.max(np.abs(self.dt(s, s, 1) - self.dt(s, s, -1) - 1.0))
        resid = max(self.phi.residual(self.eq), self.chi.residual(self.eq))

        rng = np.random.default_rng(seed)
        tt = a + (b - a) * rng.uniform(1e-3, 1 - 1e-3, n_random)
        ss = a + (b - a) * rng.uniform(1e-3, 1 - 1e-3, n_random)
        n_pos = int(np.sum(self(tt, ss) >= 0))

        pts = np.linspace(a, b, identity_points + 2)[1:-1]
        gap = 0.0
        for ti in pts:
            for si in pts:
                gap = max(gap, abs(self(ti, si) - self.displayed_identity(ti, si)))
        return GreenChecks(float(boundary), float(cont), float(jump), float(resid),
                           n_pos, n_random, gap / scale)

    def to_csv(self, n: int = 21, path_or_buf=None) -> str | None:
        T, S, G = self.grid(n)
        buf = io.StringIO()
        buf.write(f"# green a={self.a!r} b={self.b!r} p={self.eq.p.text()} q={self.eq.q.text()} "
                  f"rtol={self.tol.rtol!r}\n")
        buf.write("t,s,G\n")
        for t, s, g in zip(T.ravel(), S.ravel(), G.ravel()):
            buf.write(f"{float(t)!r},{float(s)!r},{float(g)!r}\n")
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)
        return None


def green_function(eq: Equation, a: float, b: float, tol: Tolerances = DEFAULT_TOL) -> GreenEval:
    """Green's function on ``[a, b]``; requires disconjugacy there."""
    a, b = float(a), float(b)
    if not a < b:
        raise PreconditionError("need a < b")
    verdict = is_disconjugate(eq, Interval.closed(a, b), tol)
    if verdict.kind is Kind.NOT_DISCONJUGATE:
        raise NotDisconjugateError(f"equation is not disconjugate on [{a}, {b}]", verdict)
    phi = cauchy(eq, a, b, tol)
    if abs(phi.x(b)) <= 1e-12 * max(1.0, float(np.max(np.abs(phi.x_nodes)))):
        raise PreconditionError("C(b, a) = 0: the Dirichlet problem is degenerate")
    chi = integrate_ivp(eq, b, 0.0, 1.0, a, tol)
    w_a = -chi.x(a)  # phi(a)=0, phi'(a)=1
    return GreenEval(eq, a, b, phi, chi, w_a, tol)


def _coerce_forcing(eq: Equation, f):
    return as_expr(f).compile(eq.params)


@dataclass(eq=False)
class BVPSolution:
    """Solution of ``Lx = f, x(a) = x(b) = 0`` by quadrature against ``G``.

    ``trajectory`` is the forced initial value solution started with the
    quadrature slope at ``a``; it serves as the residual check.
    """

    green: GreenEval
    f: object
    trajectory: Trajectory

    def _parts(self, t: float):
        g = self.green
        f = self.f.scalar
        a, b = g.a, g.b

        def left(s):
            return g.phi.x(s) * f(s) / float(g.wronskian_at(s))

        def right(s):
            return g.chi.x(s) * f(s) / float(g.wronskian_at(s))

        A = _quad(left, a, t)
        B = _quad(right, t, b)
        return A, B

    def state(self, t):
        g = self.green
        ts = np.atleast_1d(np.asarray(t, float))
        xs, vs = np.empty_like(ts), np.empty_like(ts)
        for i, ti in enumerate(ts):
            A, B = self._parts(float(ti))
            xs[i] = g.chi.x(ti) * A + g.phi.x(ti) * B
            vs[i] = g.chi.dx(ti) * A + g.phi.dx(ti) * B
        if np.ndim(t) == 0:
            return float(xs[0]), float(vs[0])
        return xs, vs

    def x(self, t):
        return self.state(t)[0]

    __call__ = x

    def residual(self) -> float:
        return self.trajectory.residual(self.green.eq)

    def boundary_error(self) -> float:
        g = self.green
        scale = max(float(np.max(np.abs(self.trajectory.x_nodes))), 1e-300)
        return max(abs(self.x(g.a)), abs(self.x(g.b)), abs(self.trajectory.x(g.b))) / scale

    def consistency(self, n: int = 11) -> float:
        """Max gap between quadrature and the trajectory on an ``n``-point grid, relative."""
        ts = np.linspace(self.green.a, self.green.b, n)
        xq = self.x(ts)
        xt = self.trajectory.x(ts)
        scale = max(float(np.max(np.abs(xt))), 1e-300)
        return float(np.max(np.abs(xq - xt)) / scale)


def _quad(fn, lo, hi):
    if lo == hi:
        return 0.0
    val, err = sp_integrate.quad(fn, lo, hi, epsabs=QUAD_EPSABS, epsrel=1e-11, limit=200)
    if not math.isfinite(val) or err > 1e-7 * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature over [{lo}, {hi}] unreliable (err={err:.2g})")
    return val


def solve_bvp(eq: Equation, f, a: float, b: float, tol: Tolerances = DEFAULT_TOL) -> BVPSolution:
    """``x(t) = int_a^b G(t,s) f(s) ds`` split at ``s = t``."""
    g = green_function(eq, a, b, tol)
    fc = _coerce_forcing(eq, f)
    sol = BVPSolution(g, fc, None)
    _, slope_a = sol.state(g.a)
    sol.trajectory = integrate_ivp(eq, g.a, 0.0, slope_a, g.b, tol, forcing=fc.scalar)
    return sol


def shoot_bvp(eq: Equation, f, a: float, b: float, tol: Tolerances = DEFAULT_TOL):
    """Independent two-point shooting: particular solution plus a multiple of ``C(., a)``.

    Returns a callable ``t -> x(t)``.
    """
    fc = _coerce_forcing(eq, f)
    xp = integrate_ivp(eq, a, 0.0, 0.0, b, tol, forcing=fc.scalar)
    phi = cauchy(eq, a, b, tol)
    c = xp.x(b) / phi.x(b)

    def x(t):
        return xp.x(t) - c * phi.x(t)

    return x
