"""Command line front end.

Exit codes: 0 pass, 1 verification failure, 2 parse or usage error,
3 expression outside the supported class.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (
    ArityMismatch,
    ConslawError,
    IncompatibleFluxes,
    NoRuleApplies,
    ParseError,
    UnboundAtom,
    UnsupportedExpression,
    UnsupportedKind,
)
from .expr import Expr, to_text
from .laws import (
    cosymmetry_test,
    extract_characteristic,
    verify_characteristic,
    verify_conserved_vector,
)
from .parser import Scope, SystemFile, parse_expression, parse_system_file, parse_tuple
from .potential import (
    build_abelian_covering,
    build_general_covering,
    build_potential_system_2d,
    build_standard_potential_system,
    purity_test,
)
from .variational import euler, homotopy_divergence, is_total_divergence, solve_null_divergence_2d

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_UNSUPPORTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# Loading


def load_system(path: str) -> SystemFile:
    """A system file path, or ``corpus:<name>`` for a bundled corpus file."""
    if path.startswith("corpus:"):
        from .corpus import corpus_text

        try:
            text = corpus_text(path[len("corpus:"):])
        except FileNotFoundError:
            raise UsageError(f"no corpus file {path!r}") from None
    else:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"cannot read {path!r}")
        text = p.read_text(encoding="utf-8")
    return parse_system_file(text)


def _expr(f: SystemFile, text: str):
    return parse_expression(text, f.scope)


def _cv_arg(f: SystemFile, text: str) -> tuple:
    if text in f.cvs:
        return f.cv(text)
    return parse_tuple(text, f.scope)


def _target(f: SystemFile, on: str | None, need_structure: bool = False):
    name = on or (f.default_target() if need_structure else "base")
    if need_structure:
        if name == "base":
            raise UsageError("this command needs a potential structure (declare one or pass --on)")
        return f.structure(name)
    return f.system(name)


def _texts(items) -> list:
    return [to_text(e) for e in items]


def _weights(S) -> dict:
    return {d: S.weighting.get(d, 0) for d in S.dep}


# --------------------------------------------------------------------------
# Commands; each returns (passed, result dict, human text, system or None)


def cmd_check_cv(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    F = [_expr(f, x) for x in a.components]
    ok = verify_conserved_vector(F, S)
    return ok, {"conserved": ok}, "true" if ok else "false", S


def cmd_char(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    F = [_expr(f, x) for x in a.components]
    char, Ft = extract_characteristic(F, S, extended=a.extended)
    res = {
        "labels": list(char.labels),
        "characteristic": _texts(char.components),
        "conserved_vector": _texts(Ft),
    }
    lines = [f"{l}: {c}" for l, c in zip(res["labels"], res["characteristic"])]
    lines.append("F~ = (" + ", ".join(res["conserved_vector"]) + ")")
    return True, res, "\n".join(lines), S


def cmd_verify_char(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    n = len(S.indep)
    if len(a.items) <= n:
        raise UsageError(f"expected {n} conserved vector components followed by the characteristic")
    F = [_expr(f, x) for x in a.items[:n]]
    lam = [_expr(f, x) for x in a.items[n:]]
    ok = verify_characteristic(lam, F, S)
    return ok, {"characteristic_form": ok}, "true" if ok else "false", S


def cmd_euler(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    e = _expr(f, a.expr)
    res = {d: to_text(euler(e, d)) for d in S.dep}
    return True, {"euler": res}, "\n".join(f"E_{d}: {v}" for d, v in res.items()), S


def _free_scope(a) -> Scope:
    return Scope(indep=a.indep, free=True)


def cmd_div_test(a):
    e = parse_expression(a.expr, _free_scope(a))
    ok = is_total_divergence(e)
    return ok, {"divergence": ok}, "true" if ok else "false", None


def cmd_homotopy(a):
    e = parse_expression(a.expr, _free_scope(a))
    F = homotopy_divergence(e, a.indep)
    res = dict(zip(a.indep, _texts(F)))
    return True, {"components": res}, "(" + ", ".join(res.values()) + ")", None


def cmd_phi(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    phi = solve_null_divergence_2d(_expr(f, a.alpha), _expr(f, a.beta), S)
    return True, {"phi": to_text(phi)}, to_text(phi), S


def cmd_potentialize(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    if a.kind in ("2d", "standard"):
        if not a.cv:
            raise UsageError(f"--kind {a.kind} needs at least one --cv")
        cvs = [_cv_arg(f, c) for c in a.cv]
        names = a.vars or [f"v{k + 1}" for k in range(len(cvs))]
        build = build_potential_system_2d if a.kind == "2d" else build_standard_potential_system
        P = build(S, cvs, names)
    else:
        if not a.flux:
            raise UsageError(f"--kind {a.kind} needs at least one --flux")
        G = {}
        for spec in a.flux:
            name, comps = spec[0], spec[1:]
            if name not in f.scope.deps:
                f.scope.deps.append(name)
            body = {}
            for c in comps:
                d, sep, text = c.partition("=")
                if not sep or d.strip() not in S.indep:
                    raise UsageError(f"flux components are written DIR=EXPR, got {c!r}")
                body[d.strip()] = _expr(f, text)
            G[name] = body
        build = build_abelian_covering if a.kind == "abelian" else build_general_covering
        P = build(S, G, list(G))
    Ssys = P.system
    eqs = [{"label": eq.label, "lhs": to_text(eq.lhs), "rhs": to_text(eq.rhs), "part": eq.part}
           for eq in Ssys.equations]
    res = {"kind": a.kind, "potentials": list(P.potentials), "equations": eqs,
           "minimal": list(Ssys.minimal_labels)}
    lines = [f"{e['lhs']} = {e['rhs']}    [{e['label']}]" + ("" if e["label"] in res["minimal"] else " (dropped)")
             for e in eqs]
    return True, res, "\n".join(lines), Ssys


def cmd_reduce(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    r = S.reduce(_expr(f, a.expr))
    return True, {"normal_form": to_text(r)}, to_text(r), S


def cmd_purity(a):
    f = load_system(a.system)
    P = _target(f, a.on, need_structure=True)
    lam = [_expr(f, x) for x in a.char]
    F = _cv_arg(f, a.cv) if a.cv else None
    r = purity_test(lam, P, F)
    res = {
        "verdict": r.verdict.value,
        "reduced": _texts(r.reduced.components),
        "potential_atoms": [to_text(Expr.atom(x)) for x in r.potential_atoms],
        "witness": _texts(r.witness) if r.witness is not None else None,
        "note": r.note,
    }
    text = r.verdict.value
    if res["witness"] is not None:
        text += "\nwitness (" + ", ".join(res["witness"]) + ")"
    return True, res, text, P.system


def cmd_cosym(a):
    f = load_system(a.system)
    S = _target(f, a.on)
    ok = cosymmetry_test([_expr(f, x) for x in a.char], S)
    return ok, {"cosymmetry": ok}, "true" if ok else "false", S


def cmd_corpus(a):
    from .corpus import run_corpus

    rep = run_corpus(a.filter, jobs=a.jobs)
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.case}" + (f"  {r.detail}" if not r.passed else "")
             for r in rep.results]
    for r in rep.failures:
        for res in r.residuals:
            lines.append(f"    residual {res}")
    lines.append(f"{len(rep.results) - len(rep.failures)}/{len(rep.results)} claims pass")
    return rep.ok, rep.as_dict(), "\n".join(lines), None


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conslaw", description="Exact conservation-law calculus on jet spaces.")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--weights", action="store_true", help="report the weights of the system's variables")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def with_system(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("system", help="system file, or corpus:<name>")
        sp.add_argument("--on", help="potential structure of the file to work on (default: the base system)")
        sp.set_defaults(fn=fn)
        return sp

    sp = with_system("check-cv", cmd_check_cv, "verify a conserved vector")
    sp.add_argument("components", nargs="+")
    sp = with_system("char", cmd_char, "extract a characteristic")
    sp.add_argument("components", nargs="+")
    sp.add_argument("--extended", action="store_true", help="use every equation, including dropped ones")
    sp = with_system("verify-char", cmd_verify_char, "check Div F = lambda L identically")
    sp.add_argument("items", nargs="+", help="conserved vector components, then characteristic components")
    sp = with_system("euler", cmd_euler, "Euler operator of an expression")
    sp.add_argument("expr")
    for name, fn, help in (("div-test", cmd_div_test, "is the expression a total divergence"),
                           ("homotopy", cmd_homotopy, "invert a total divergence")):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("expr")
        sp.add_argument("--indep", nargs="+", default=["t", "x"], help="independent variables (default: t x)")
        sp.set_defaults(fn=fn)
    sp = with_system("phi", cmd_phi, "solve D_x Phi = alpha, D_t Phi = -beta")
    sp.add_argument("alpha")
    sp.add_argument("beta")
    sp = with_system("potentialize", cmd_potentialize, "build a potential system or covering")
    sp.add_argument("--kind", required=True, choices=["2d", "abelian", "standard", "covering"])
    sp.add_argument("--cv", action="append", help="conserved vector name or '(E1, E2, ...)'")
    sp.add_argument("--vars", nargs="+", help="potential names")
    sp.add_argument("--flux", action="append", nargs="+", metavar="ITEM",
                    help="NAME DIR=EXPR [DIR=EXPR ...]")
    sp = with_system("reduce", cmd_reduce, "normal form modulo the system")
    sp.add_argument("expr")
    sp = with_system("purity", cmd_purity, "decide whether a potential conservation law is induced")
    sp.add_argument("char", nargs="+", help="characteristic components in minimal-label order")
    sp.add_argument("--cv", help="conserved vector (name or tuple) for a localization witness")
    sp.set_defaults(on=None)
    sp = with_system("cosym", cmd_cosym, "cosymmetry test")
    sp.add_argument("char", nargs="+")
    sp = sub.add_parser("corpus", help="run the bundled worked examples")
    sp.add_argument("--filter", help="case id glob or substring")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(fn=cmd_corpus)
    return p


def _option_strings(parser: argparse.ArgumentParser) -> set:
    out = set(parser._option_string_actions)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                out |= _option_strings(sp)
    return out


def _protect_negative(argv: list, parser) -> list:
    """Keep expressions such as ``-exp(v)*u`` from being read as options."""
    opts = _option_strings(parser)
    return [" " + x if x.startswith("-") and x.split("=", 1)[0] not in opts else x for x in argv]


def _emit(args, payload: dict, text: str, out):
    if args.json:
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        out.write(text + "\n")


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    # global flags are accepted anywhere on the line
    want_json = "--json" in argv
    want_weights = "--weights" in argv
    argv = [x for x in argv if x not in ("--json", "--weights")]
    parser = build_parser()
    argv = _protect_negative(argv, parser)
    args = argparse.Namespace(json=want_json, weights=want_weights, command=None)
    try:
        parser.parse_args(argv, namespace=args)
        args.json, args.weights = want_json, want_weights
        passed, result, text, system = args.fn(args)
    except UsageError as exc:
        return _fail(args, "usage", str(exc), EXIT_USAGE, out)
    except ParseError as exc:
        return _fail(args, exc.code, str(exc), EXIT_USAGE, out, line=exc.line, column=exc.column)
    except (ArityMismatch, UnboundAtom) as exc:
        return _fail(args, exc.code, str(exc), EXIT_USAGE, out)
    except (UnsupportedExpression, UnsupportedKind, NoRuleApplies) as exc:
        return _fail(args, exc.code, str(exc), EXIT_UNSUPPORTED, out)
    except IncompatibleFluxes as exc:
        extra = {"residual": to_text(exc.residual)} if exc.residual is not None else {}
        return _fail(args, exc.code, str(exc), EXIT_FAIL, out, **extra)
    except ConslawError as exc:
        return _fail(args, exc.code, str(exc), EXIT_FAIL, out)
    payload = {"command": args.command, "status": "pass" if passed else "fail", "result": result}
    if want_weights and system is not None:
        payload["weights"] = _weights(system)
        text += "\nweights: " + ", ".join(f"{d}={w}" for d, w in payload["weights"].items())
    _emit(args, payload, text, out)
    return EXIT_PASS if passed else EXIT_FAIL


def _fail(args, code, message, status, out, **extra) -> int:
    if getattr(args, "json", False):
        err = {"code": code, "message": message}
        err.update({k: v for k, v in extra.items() if v is not None})
        payload = {"command": getattr(args, "command", None), "status": "error", "error": err}
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"error [{code}]: {message}\n")
        if "residual" in extra:
            sys.stderr.write(f"residual: {extra['residual']}\n")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
