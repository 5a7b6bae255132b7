"""breuil-tame: command-line access to the solvers, lattices, reductions and checks.

Every subcommand prints one JSON document on stdout (or a short table with
--format table).  Output is deterministic for fixed flags.

Exit codes
    0   success
    1   a verification ran and reported a failure
    2   inadmissible parameters (including a missing square root in E)
    3   precision exhausted
    4   any other computation error
    64  usage error
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from fractions import Fraction

from . import __version__
from .breuil import find_morphisms, reduce_T0, standard_rank1
from .coeff_rings import CoeffRing, FiniteField
from .dp_series import FieldDatum
from .errors import BreuilError, InadmissibleParameters, NoRootInE, PrecisionExhausted
from .filtered_modules import (TameType, build_D_principal, build_D_supercuspidal,
                               check_weak_admissibility)
from .reduction_engine import (FAMILIES, PadicInput, check_no_subalgebra_descent, classify,
                               deformation_ring_answer, default_level, describe_form,
                               modular_form_reduction, reduce_principal, reduce_supercuspidal,
                               symbolic_forms)
from .sdm_lattices import SdmParameters, build_sdm, verify_sdm
from .special_elements import solve

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAILED, EXIT_INADMISSIBLE, EXIT_PRECISION, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 3, 4, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# argument parsing helpers

_VAL_SHORT = re.compile(r"^([0-9./]+)-valuation$")


def padic_arg(text: str) -> PadicInput:
    """'val=1/2,unit=3', '0.5-valuation' (unit 1) or a plain integer."""
    m = _VAL_SHORT.match(text.strip())
    try:
        if m:
            return PadicInput(Fraction(m.group(1)), 1)
        return PadicInput.parse(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad p-adic value {text!r}: {exc}") from exc


def tau_arg(text: str, p: int) -> TameType:
    kind, _, rest = text.partition(":")
    try:
        if kind == "prin":
            i, j = (int(x) for x in rest.split(","))
            return TameType.principal(i, j, p)
        if kind == "super":
            return TameType.supercuspidal(int(rest), p)
    except ValueError as exc:
        raise UsageError(f"bad type {text!r}") from exc
    raise UsageError(f"type must be prin:i,j or super:m, got {text!r}")


def _kv(text: str) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        key, _, val = item.partition("=")
        if not _:
            raise UsageError(f"expected key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _level(args) -> int:
    return args.precision or default_level()


def _check_p(p: int):
    if p < 3 or any(p % d == 0 for d in range(2, int(p ** 0.5) + 1)):
        raise UsageError("p must be an odd prime")


# ---------------------------------------------------------------------------
# serialization

def coefficient_json(x) -> str:
    return x.to_str()


def series_json(s, limit: int | None = None) -> dict:
    U = s.U if limit is None else min(limit, s.U)
    comps = []
    for c in range(s.field.f):
        terms = {}
        for j in range(U):
            x = s.coefficient(j, c)
            if not x.is_zero():
                terms[str(j)] = coefficient_json(x)
        comps.append(terms)
    return {"basis": "u^j/floor(j/e)!", "p_digits": s.level, "u_truncation": s.U, "components": comps}


def envelope(command: str, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "tool_version": __version__, "command": command, "result": body}


def _emit(doc: dict, fmt: str):
    if fmt == "table":
        _print_table(doc["result"])
    else:
        print(json.dumps(doc, sort_keys=True, indent=2))


def _print_table(obj, indent: int = 0):
    pad = "  " * indent
    if isinstance(obj, dict):
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)):
                print(f"{pad}{k}:")
                _print_table(v, indent + 1)
            else:
                print(f"{pad}{k}: {v}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                print(f"{pad}-")
                _print_table(v, indent + 1)
            else:
                print(f"{pad}- {v}")
    else:
        print(f"{pad}{obj}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve_element(args) -> tuple[dict, int]:
    p = args.p
    kind = args.kind
    n = 1 if kind in ("V", "U", "Vprime", "Uprime") else 2
    params = {}
    needs_pi = False
    inputs = {}
    for name in ("x", "b", "w"):
        val = getattr(args, name)
        if val is not None:
            inputs[name] = val
            needs_pi |= val.needs_ramified()
    ring = CoeffRing(p, n, 2 if needs_pi else 1, _level(args) + 4)
    F = FieldDatum("F1" if n == 1 else "F2", ring, U=args.u_truncation)
    for name, val in inputs.items():
        val.check(p)
        params[name] = val.element(ring)
    if kind in ("V", "U", "Vprime", "Uprime"):
        if args.j is None or "x" not in params or "w" not in params:
            raise UsageError(f"--kind {kind} needs --x, --w and --j")
        params["j"] = args.j
    else:
        if "b" not in params or "w" not in params:
            raise UsageError(f"--kind {kind} needs --b and --w")
        if kind == "W":
            if args.i is None:
                raise UsageError("--kind W needs --i")
            params["i"] = p if args.i == "p" else int(args.i)
    elem = solve(kind, F, params, args.branch)
    body = {"kind": kind, "p": p, "inputs": {k: v.describe() for k, v in inputs.items()},
            "j": args.j, "i": params.get("i"), "branch": args.branch,
            "certified": {"p_digits": elem.certified_precision, "u_degree": elem.certified_truncation},
            "residual_zero": elem.residual().is_zero(),
            "series": series_json(elem.series, args.terms)}
    return body, EXIT_OK


def _build_params(args) -> SdmParameters:
    vals = {}
    for key, raw in _kv(args.values).items():
        vals[key] = int(raw)
    return SdmParameters(args.variant, args.p, vals, level=_level(args), branch=args.branch)


def cmd_build_sdm(args) -> tuple[dict, int]:
    M = build_sdm(_build_params(args))
    R = reduce_T0(M)
    body = {"variant": M.variant, "p": args.p, "rank": M.rank, "descent": [list(d) for d in M.descent],
            "reduction": R.to_json()}
    return body, EXIT_OK


def cmd_verify_sdm(args) -> tuple[dict, int]:
    M = build_sdm(_build_params(args))
    report = verify_sdm(M)
    body = {"p": args.p, **report}
    return body, EXIT_OK if report["all_pass"] else EXIT_FAILED


def cmd_reduce(args) -> tuple[dict, int]:
    p = args.p
    level = _level(args)
    if args.tau == "prin":
        if args.x1 is None or args.x2 is None or args.j is None:
            raise UsageError("reduce --tau prin needs --x1, --x2 and --j")
        reports = [reduce_principal(p, args.x1, args.x2, args.j, level)]
    else:
        if args.m is None or args.b is None or args.w is None:
            raise UsageError("reduce --tau super needs --m, --b and --w")
        reports = reduce_supercuspidal(p, args.m, args.b, args.w, level)
    return {"reports": [r.to_json() for r in reports]}, EXIT_OK


def cmd_classify(args) -> tuple[dict, int]:
    tau = tau_arg(args.tau, args.p)
    result = classify(tau, sweep=args.sweep, draws=args.draws, level=args.precision)
    body = result.to_json()
    code = EXIT_OK
    if args.sweep and not (result.sound and result.complete):
        code = EXIT_FAILED
    return body, code


RHOBAR_CLASSES = ("tri1", "tri2", "niveau2", "niveau2b", "other")


def cmd_defring(args) -> tuple[dict, int]:
    tau = tau_arg(args.tau, args.p)
    forms = symbolic_forms(tau)
    index = {"tri1": 0, "tri2": 1, "niveau2": 2, "niveau2b": 3}.get(args.rhobar)
    if index is not None and index >= len(forms):
        raise UsageError(f"--rhobar {args.rhobar} does not exist for {tau.describe()}")
    form = None if index is None else forms[index]
    ans = deformation_ring_answer(tau, form, run_check=not args.no_check, check_p=args.check_p)
    body = ans.to_json()
    body["rhobar_class"] = args.rhobar
    return body, EXIT_OK


def cmd_modform(args) -> tuple[dict, int]:
    p = args.p
    if args.ap is None:
        raise UsageError("modform needs --ap")
    ap = args.ap
    if args.slope is not None:
        if ap.val not in (None, Fraction(0)) and ap.val != args.slope:
            raise UsageError("--slope disagrees with the valuation given in --ap")
        ap = PadicInput(args.slope, ap.unit)
    rep = modular_form_reduction(p, args.j, ap, args.chi, _level(args))
    return rep.to_json(), EXIT_OK


def cmd_wadm(args) -> tuple[dict, int]:
    p = args.p
    ramified = any(v is not None and v.needs_ramified() for v in (args.x1, args.x2))
    if args.tau == "prin":
        ring = CoeffRing(p, 1 if args.over == "F1" else 2, 2 if ramified else 1, _level(args))
        if args.x1 is None or args.x2 is None:
            raise UsageError("wadm --tau prin needs --x1 and --x2")
        D = build_D_principal(args.x1.element(ring), args.x2.element(ring), args.i, args.j, args.over)
    else:
        if args.m is None or args.w is None:
            raise UsageError("wadm --tau super needs --m and --w")
        ring = CoeffRing(p, 2, 1, _level(args))
        x = ring.from_int(p * args.w)
        a = ring.from_int(args.a)
        b = args.b.element(ring) if args.b is not None else ring.zero()
        D = build_D_supercuspidal(args.m, a, b, x)
    out = check_weak_admissibility(D)
    return {"p": p, "shape": D.shape, "field": D.field, **out}, EXIT_OK if out["admissible"] else EXIT_FAILED


def _module_spec(text: str, p: int, level: int):
    """'sdm:variant:k=v,...' (reduced) or 'std:which:a:exponent[:n]' (standard rank one)."""
    kind, _, rest = text.partition(":")
    if kind == "sdm":
        variant, _, vals = rest.partition(":")
        values = {k: int(v) for k, v in _kv(vals).items()}
        branch = values.pop("branch", None)
        return reduce_T0(build_sdm(SdmParameters(variant, p, values, level=level,
                                                 branch={1: "+", -1: "-"}.get(branch))))
    if kind == "std":
        parts = rest.split(":")
        if len(parts) not in (3, 4):
            raise UsageError(f"bad standard module spec {text!r}")
        which, a, exponent = parts[0], int(parts[1]), int(parts[2])
        n = int(parts[3]) if len(parts) == 4 else (1 if which == "F1" else 2)
        return standard_rank1(which, a, exponent, FiniteField(p, n))
    raise UsageError(f"module spec must start with sdm: or std:, got {text!r}")


def cmd_hom(args) -> tuple[dict, int]:
    level = _level(args)
    M = _module_spec(args.source, args.p, level)
    N = _module_spec(args.target, args.p, level)
    maps = find_morphisms(M, N)
    body = {"source": M.name, "target": N.name, "dimension_Fp": len(maps),
            "basis": [f.to_json() for f in maps] if args.show_maps else None,
            "injective": [f.injective for f in maps]}
    return body, EXIT_OK


def cmd_descent(args) -> tuple[dict, int]:
    chk = check_no_subalgebra_descent(args.family, args.p, corruption=args.corruption)
    return chk.to_json(), EXIT_OK if chk.status == "PASS" else EXIT_FAILED


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="breuil-tame", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=int, required=True)
    common.add_argument("--precision", type=int, default=None,
                        help="p-adic digits (default: BREUIL_PRECISION or 6)")
    common.add_argument("--format", choices=("json", "table"), default="json")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve-element", parents=[common], help="solve for V, U, V', U', W or X")
    s.add_argument("--kind", required=True, choices=("V", "U", "Vprime", "Uprime", "W", "X"))
    s.add_argument("--x", type=padic_arg)
    s.add_argument("--b", type=padic_arg)
    s.add_argument("--w", type=padic_arg)
    s.add_argument("--j", type=int)
    s.add_argument("--i")
    s.add_argument("--branch", choices=("+", "-"))
    s.add_argument("--u-truncation", type=int, default=None)
    s.add_argument("--terms", type=int, default=None, help="only print coefficients below u^terms")
    s.set_defaults(func=cmd_solve_element)

    for name, func, helptext in (("build-sdm", cmd_build_sdm, "build a lattice and print its reduction"),
                                 ("verify-sdm", cmd_verify_sdm, "check the axioms of a lattice")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--variant", required=True)
        s.add_argument("--values", default="", help="k=v,... integer parameters")
        s.add_argument("--branch", choices=("+", "-"))
        s.set_defaults(func=func)

    s = sub.add_parser("reduce", parents=[common], help="mod p reduction of a catalogued lattice")
    s.add_argument("--tau", required=True, choices=("prin", "super"))
    s.add_argument("--x1", type=padic_arg)
    s.add_argument("--x2", type=padic_arg)
    s.add_argument("--j", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--b", type=padic_arg)
    s.add_argument("--w", type=int)
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("classify", parents=[common], help="possible reductions for a tame type")
    s.add_argument("--tau", required=True, help="prin:i,j or super:m")
    s.add_argument("--sweep", action="store_true", help="also run the reducers over all regimes")
    s.add_argument("--draws", type=int, default=None)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("defring", parents=[common], help="deformation ring and mu_gal")
    s.add_argument("--tau", required=True, help="prin:i,j or super:m")
    s.add_argument("--rhobar", required=True, choices=RHOBAR_CLASSES)
    s.add_argument("--no-check", action="store_true", help="skip the descent computation")
    s.add_argument("--check-p", type=int, default=None)
    s.set_defaults(func=cmd_defring)

    s = sub.add_parser("modform", parents=[common], help="reduction of a weight two newform")
    s.add_argument("--j", type=int, required=True)
    s.add_argument("--ap", type=padic_arg)
    s.add_argument("--slope", type=Fraction, default=None)
    s.add_argument("--chi", type=int, default=1, help="chi_N(p) mod p")
    s.set_defaults(func=cmd_modform)

    s = sub.add_parser("wadm", parents=[common], help="weak admissibility of a filtered module")
    s.add_argument("--tau", required=True, choices=("prin", "super"))
    s.add_argument("--over", choices=("F1", "F2"), default="F1")
    s.add_argument("--x1", type=padic_arg)
    s.add_argument("--x2", type=padic_arg)
    s.add_argument("--i", type=int, default=0)
    s.add_argument("--j", type=int, default=1)
    s.add_argument("--m", type=int)
    s.add_argument("--a", type=int, default=1)
    s.add_argument("--b", type=padic_arg)
    s.add_argument("--w", type=int)
    s.set_defaults(func=cmd_wadm)

    s = sub.add_parser("hom", parents=[common], help="Hom between two Breuil modules")
    s.add_argument("--source", required=True, help="sdm:variant:k=v,... or std:which:a:exponent")
    s.add_argument("--target", required=True)
    s.add_argument("--show-maps", action="store_true")
    s.set_defaults(func=cmd_hom)

    s = sub.add_parser("descent", parents=[common], help="no-subalgebra-descent check for a family")
    s.add_argument("--family", required=True, choices=FAMILIES)
    s.add_argument("--corruption", choices=("drop_nilpotent",), default=None)
    s.set_defaults(func=cmd_descent)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_p(args.p)
        if args.precision is None and "BREUIL_PRECISION" in os.environ:
            args.precision = int(os.environ["BREUIL_PRECISION"])
        body, code = args.func(args)
    except UsageError as exc:
        print(f"breuil-tame: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InadmissibleParameters, NoRootInE) as exc:
        print(f"breuil-tame: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except PrecisionExhausted as exc:
        print(f"breuil-tame: PrecisionExhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except BreuilError as exc:
        print(f"breuil-tame: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(envelope(args.command, body), args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
