"""Command-line front end.

Exit codes: 0 success, 1 soundness violation, 2 no criterion fired
(``criteria`` only), 3 a catalog fact failed, 64 bad input, 65 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .catalog import CATALOG_IDS, catalog_list, run_catalog
from .conjugacy import _jsonable, is_disconjugate, rho_map, rho_map_csv
from .criteria import CriteriaOptions, run_all, substitute_half_line
from .errors import (DisconjError, ExprDomainError, ExprError, IntegrationError, NotDisconjugateError,
                     PreconditionError, QuadratureError, SoundnessViolation)
from .factorization import build_factorization, generalized_rolle_check, verify_factorization
from .green import green_function, solve_bvp
from .interval import Interval
from .ode import Equation, Tolerances
from .periodic import check_theorem_periodic

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_VIOLATION, EXIT_INCONCLUSIVE, EXIT_FACT_FAILED = 0, 1, 2, 3
EXIT_USAGE, EXIT_NUMERIC = 64, 65
COMMANDS = ("oracle", "rho", "criteria", "green", "factorize", "periodic", "transform", "catalog")
DEFAULTS = {"p": "0", "q": "0", "format": "json", "rtol": 1e-10, "atol": 1e-12,
            "step": 0.1, "T": 2 * math.pi, "a": 0.0, "n": 21}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(sp):
    g = sp.add_argument_group("equation")
    g.add_argument("--p", help="coefficient p(t) (default 0)")
    g.add_argument("--q", help="coefficient q(t) (default 0)")
    g.add_argument("--param", action="append", metavar="NAME=VALUE", help="parameter value (repeatable)")
    g.add_argument("--domain", help="coefficient domain, e.g. '(0, inf)' (default the real line)")
    g.add_argument("--interval", help="interval in bracket notation, e.g. '[0, pi)'")
    g.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"),
                   help="finite window; stands in for --interval as [LO, HI]")
    o = sp.add_argument_group("output")
    o.add_argument("--format", choices=("json", "csv"))
    o.add_argument("--output", help="write the report here instead of stdout")
    o.add_argument("--request", help="JSON request file; flags override its fields")
    t = sp.add_argument_group("tolerances")
    t.add_argument("--rtol", type=float, help="integrator relative tolerance (default 1e-10)")
    t.add_argument("--atol", type=float, help="integrator absolute tolerance (default 1e-12)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="disconj", description="Disconjugacy analysis of x'' + p(t) x' + q(t) x = 0.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    sp = sub.add_parser("oracle", help="decide disconjugacy on an interval by shooting")
    _common(sp)

    sp = sub.add_parser("rho", help="tabulate the conjugate points rho+ and rho-")
    _common(sp)
    sp.add_argument("--from", dest="start", type=float, help="first base point")
    sp.add_argument("--to", dest="stop", type=float, help="last base point")
    sp.add_argument("--step", type=float, help="spacing of base points (default 0.1)")

    sp = sub.add_parser("criteria", help="run every sufficient criterion plus the oracle")
    _common(sp)
    sp.add_argument("--v", help="test function for the Vallee-Poussin check")
    sp.add_argument("--r", help="comparison function for main-theorem condition 6")
    sp.add_argument("--P", type=float, help="auxiliary constant P for XA1/XA2")
    sp.add_argument("--Q", type=float, help="auxiliary constant Q for XA1")

    sp = sub.add_parser("green", help="Green's function on [a, b] and an optional BVP solve")
    _common(sp)
    sp.add_argument("--f", help="forcing term for x(a) = x(b) = 0")
    sp.add_argument("--n", type=int, help="grid size per axis (default 21)")

    sp = sub.add_parser("factorize", help="factorization into positive factors, plus zero counting")
    _common(sp)
    sp.add_argument("--u", action="append", help="test function (repeatable)")
    sp.add_argument("--n", type=int, help="rows in the CSV table (default 21)")

    sp = sub.add_parser("periodic", help="periodic-solution test via the monodromy matrix")
    _common(sp)
    sp.add_argument("--T", type=float, help="period (default 2 pi)")
    sp.add_argument("--a", type=float, help="base point (default 0)")

    sp = sub.add_parser("transform", help="half-line substitution t -> a + t^2")
    _common(sp)
    sp.add_argument("--a", type=float, help="left end of the half-line (default 0)")

    sp = sub.add_parser("catalog", help="list or run the reference equations")
    _common(sp)
    sp.add_argument("--list", action="store_true", help="list entries and their facts")
    sp.add_argument("--run", nargs="+", metavar="ID", help=f"'all' or ids from: {', '.join(CATALOG_IDS)}")
    return parser


# --------------------------------------------------------------------------- request handling

def _merge_request(args, parser):
    """Fill unset options from the request file; command-line values win."""
    if not getattr(args, "request", None):
        return args
    try:
        with open(args.request) as fh:
            req = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read request file: {exc}") from exc
    if not isinstance(req, dict):
        raise UsageError("request file must hold a JSON object")
    aliases = {"p_src": "p", "q_src": "q", "from": "start", "to": "stop"}
    for key, value in req.items():
        key = aliases.get(key, key)
        if key == "command":
            if value != args.command:
                raise UsageError(f"request is for {value!r} but the command is {args.command!r}")
            continue
        if key == "params" and isinstance(value, dict):
            given = dict(_params(args.param))
            args.param = [f"{k}={v}" for k, v in {**value, **given}.items()]
            continue
        if not hasattr(args, key):
            raise UsageError(f"unknown request field {key!r}")
        if getattr(args, key) is None:
            setattr(args, key, value)
    return args


_VALUE_OPTIONS = {"--p", "--q", "--v", "--r", "--f", "--u", "--interval", "--domain"}


def _glue_values(argv):
    """Bind expression values to their option so ``--p -t/2`` is not read as a flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_OPTIONS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def _command_from_request(argv):
    """Allow ``disconj --request file.json`` with the command named in the file."""
    if "--request" not in argv or any(a in COMMANDS for a in argv):
        return argv
    i = argv.index("--request")
    try:
        with open(argv[i + 1]) as fh:
            cmd = json.load(fh).get("command")
    except (OSError, IndexError, ValueError, AttributeError):
        return argv
    return [cmd] + list(argv) if cmd in COMMANDS else argv


def _params(items):
    out = {}
    for item in items or ():
        name, sep, value = str(item).partition("=")
        if not sep:
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"parameter {name!r} is not a number: {value!r}") from None
    return out


def _get(args, name):
    v = getattr(args, name, None)
    return DEFAULTS.get(name) if v is None else v


def _interval(args, required=True):
    if args.interval is not None:
        try:
            return Interval.parse(args.interval)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if args.window is not None:
        lo, hi = map(float, args.window)
        if not lo < hi:
            raise UsageError("--window needs LO < HI")
        return Interval.closed(lo, hi)
    if required:
        raise UsageError(f"{args.command} needs --interval or --window")
    return None


def _equation(args) -> Equation:
    domain = None
    if args.domain:
        try:
            domain = Interval.parse(args.domain)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return Equation.from_text(str(_get(args, "p")), str(_get(args, "q")), _params(args.param), domain)


def _tol(args) -> Tolerances:
    try:
        return Tolerances(float(_get(args, "rtol")), float(_get(args, "atol")))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _csv_unsupported(args):
    if _get(args, "format") == "csv":
        raise UsageError(f"{args.command} has no CSV output; use --format json")


# --------------------------------------------------------------------------- commands

def cmd_oracle(args):
    eq, iv, tol = _equation(args), _interval(args), _tol(args)
    v = is_disconjugate(eq, iv, tol)
    if _get(args, "format") == "csv":
        meta = f"# oracle {iv} p={eq.p.text()} q={eq.q.text()} verdict={v.kind.value}\n"
        if v.witness is None:
            return EXIT_OK, meta + "verdict,rho_plus_lo\n" + \
                f"{v.kind.value},{_jsonable(v.certificate.get('rho_plus_lo'))}\n"
        return EXIT_OK, meta + v.witness.trajectory.to_csv()
    return EXIT_OK, {"equation": eq.describe(), "interval": str(iv), "verdict": v.to_json()}


def cmd_rho(args):
    eq, tol = _equation(args), _tol(args)
    if args.start is None or args.stop is None:
        raise UsageError("rho needs --from and --to")
    step = float(_get(args, "step"))
    if step <= 0:
        raise UsageError("--step must be positive")
    start, stop = float(args.start), float(args.stop)
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    points = [round(start + i * step, 12) for i in range(max(n, 0))]
    window = tuple(args.window) if args.window is not None else None
    rows = rho_map(eq, points, window, tol)
    if _get(args, "format") == "csv":
        meta = f"rho p={eq.p.text()} q={eq.q.text()} params={json.dumps(eq.params, sort_keys=True)} " \
               f"rtol={tol.rtol!r} atol={tol.atol!r}"
        return EXIT_OK, rho_map_csv(rows, meta)
    return EXIT_OK, {"equation": eq.describe(),
                     "rows": [{"a": a, "rho_plus": rp.text(), "rho_minus": rm.text(),
                               "window_limited": rp.window_limited or rm.window_limited}
                              for a, rp, rm in rows]}


def cmd_criteria(args):
    _csv_unsupported(args)
    eq, iv, tol = _equation(args), _interval(args), _tol(args)
    opts = CriteriaOptions(v=args.v, r=args.r, P=args.P, Q=args.Q, tol=tol)
    try:
        report = run_all(eq, iv, opts)
    except SoundnessViolation as exc:
        out = exc.report.to_json() if getattr(exc, "report", None) is not None else {}
        out["error"] = str(exc)
        return EXIT_VIOLATION, _strip_times(out)
    return (EXIT_OK if report.any_fired else EXIT_INCONCLUSIVE), _strip_times(report.to_json())


def _strip_times(report):
    """Keep JSON byte-identical across runs: drop the wall-clock fields."""
    for entry in report.get("criteria", []):
        entry.pop("elapsed_ms", None)
    return report


def cmd_green(args):
    eq, iv, tol = _equation(args), _interval(args), _tol(args)
    if not iv.is_finite:
        raise UsageError("green needs a finite interval")
    g = green_function(eq, iv.lo, iv.hi, tol)
    n = int(_get(args, "n"))
    if _get(args, "format") == "csv":
        return EXIT_OK, g.to_csv(n)
    out = {"equation": eq.describe(), "interval": str(Interval.closed(iv.lo, iv.hi)),
           "checks": g.verify().to_json(), "wronskian_check": g.wronskian_check()}
    if args.f:
        sol = solve_bvp(eq, args.f, iv.lo, iv.hi, tol)
        ts = np.linspace(iv.lo, iv.hi, n)
        out["bvp"] = {"f": args.f, "residual": sol.residual(), "boundary_error": sol.boundary_error(),
                      "consistency": sol.consistency(), "t": ts.tolist(), "x": sol.x(ts).tolist()}
    return EXIT_OK, out


def cmd_factorize(args):
    eq, iv, tol = _equation(args), _interval(args), _tol(args)
    fact = build_factorization(eq, iv, tol)
    if _get(args, "format") == "csv":
        return EXIT_OK, fact.to_csv(int(_get(args, "n")))
    out = {"equation": eq.describe(), "interval": str(iv), "check": fact.check()}
    tests = []
    for u in args.u or ():
        tests.append({"u": u, "verification": verify_factorization(eq, fact, u),
                      "rolle": generalized_rolle_check(eq, iv, u, tol).to_json()})
    out["tests"] = tests
    return EXIT_OK, out


def cmd_periodic(args):
    _csv_unsupported(args)
    eq, tol = _equation(args), _tol(args)
    T, a = float(_get(args, "T")), float(_get(args, "a"))
    if not T > 0:
        raise UsageError("--T must be positive")
    window = tuple(args.window) if args.window is not None else None
    # monodromy runs at its own tighter default unless tolerances are given
    kw = {} if args.rtol is None and args.atol is None else {"tol": tol}
    v = check_theorem_periodic(eq, T, window, a, **kw)
    return EXIT_OK, {"equation": eq.describe(), **v.to_json()}


def cmd_transform(args):
    _csv_unsupported(args)
    eq, tol = _equation(args), _tol(args)
    a = args.a
    if a is None and eq.domain.lo > -math.inf:
        a = eq.domain.lo
    tr = substitute_half_line(eq, 0.0 if a is None else float(a), tol=tol)
    return EXIT_OK, {"equation": eq.describe(), **tr.to_json()}


def cmd_catalog(args):
    _csv_unsupported(args)
    if args.run:
        unknown = [i for i in args.run if i != "all" and i not in CATALOG_IDS]
        if unknown:
            raise UsageError(f"unknown catalog id(s) {', '.join(unknown)}; known: {', '.join(CATALOG_IDS)}")
        results = run_catalog(args.run)
        for r in results:
            for f in r["facts"]:
                f.pop("elapsed_ms", None)
        ok = all(r["passed"] for r in results)
        summary = {"entries": len(results), "facts": sum(len(r["facts"]) for r in results),
                   "failed": [f"{r['id']}:{f['fact']}" for r in results for f in r["facts"] if not f["passed"]]}
        return (EXIT_OK if ok else EXIT_FACT_FAILED), {"summary": summary, "results": results}
    return EXIT_OK, {"entries": [e.to_json() for e in catalog_list()]}


HANDLERS = {"oracle": cmd_oracle, "rho": cmd_rho, "criteria": cmd_criteria, "green": cmd_green,
            "factorize": cmd_factorize, "periodic": cmd_periodic, "transform": cmd_transform,
            "catalog": cmd_catalog}


def _emit(payload, args):
    if isinstance(payload, str):
        text = payload
    else:
        if isinstance(payload, dict):
            payload = {"schema_version": SCHEMA_VERSION, "command": args.command, **payload}
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=False) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(args, code, exc):
    sys.stderr.write(f"disconj: {type(exc).__name__}: {exc}\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(_command_from_request(_glue_values(argv)))
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        args = _merge_request(args, parser)
        code, payload = HANDLERS[args.command](args)
    except (UsageError, ExprError, ValueError) as exc:
        if isinstance(exc, ExprDomainError):
            return _error(args, EXIT_NUMERIC, exc)
        return _error(args, EXIT_USAGE, exc)
    except NotDisconjugateError as exc:
        if exc.verdict is not None:
            _emit({"error": str(exc), "verdict": exc.verdict.to_json()}, args)
        return _error(args, EXIT_USAGE, exc)
    except PreconditionError as exc:
        return _error(args, EXIT_USAGE, exc)
    except SoundnessViolation as exc:
        return _error(args, EXIT_VIOLATION, exc)
    except (IntegrationError, QuadratureError, FloatingPointError, OverflowError, DisconjError) as exc:
        return _error(args, EXIT_NUMERIC, exc)
    _emit(payload, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
