"""Disconjugacy analysis of ``x'' + p(t) x' + q(t) x = 0``."""

__version__ = "0.1.0"

from .errors import (DisconjError, ExprDomainError, ExprError, ExprSyntaxError, IntegrationError,
                     NotDifferentiableError, NotDisconjugateError, PreconditionError, QuadratureError,
                     SoundnessViolation)
from .interval import Interval
from .expr import CoeffExpr, as_expr
from .ode import DEFAULT_TOL, Equation, Tolerances, Trajectory, cauchy, integrate_ivp, wronskian
from .conjugacy import Kind, Verdict, Witness, is_disconjugate, rho_minus, rho_plus
from .green import green_function, shoot_bvp, solve_bvp
from .criteria import CriteriaOptions, check_main, run_all, substitute_half_line
from .factorization import build_factorization, generalized_rolle_check, verify_factorization
from .periodic import check_periodicity, check_theorem_periodic, monodromy

__all__ = [
    "DisconjError", "ExprDomainError", "ExprError", "ExprSyntaxError", "IntegrationError",
    "NotDifferentiableError", "NotDisconjugateError", "PreconditionError", "QuadratureError",
    "SoundnessViolation", "Interval", "CoeffExpr", "as_expr", "DEFAULT_TOL", "Equation", "Tolerances",
    "Trajectory", "cauchy", "integrate_ivp", "wronskian", "Kind", "Verdict", "Witness",
    "is_disconjugate", "rho_minus", "rho_plus", "green_function", "shoot_bvp", "solve_bvp",
    "CriteriaOptions", "check_main", "run_all", "substitute_half_line", "build_factorization",
    "generalized_rolle_check", "verify_factorization", "check_periodicity", "check_theorem_periodic",
    "monodromy",
]
