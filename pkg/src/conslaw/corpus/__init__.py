"""Diffusion-convection worked examples stored as system files, and their verification battery."""

from __future__ import annotations

import fnmatch
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

from ..errors import ConslawError
from ..expr import is_zero, to_text
from ..laws import (
    Characteristic,
    as_characteristic,
    cosymmetry_test,
    div,
    equivalent_conserved_vectors,
    extract_characteristic,
    is_trivial_characteristic,
    is_trivial_conserved_vector,
    verify_characteristic,
    verify_conserved_vector,
)
from ..parser import Check, SystemFile, parse_system_file
from ..potential import (
    covering_residuals,
    localize_conserved_vector,
    locality_statements,
    potential_derivative_cv,
    purity_test,
)
from ..variational import solve_null_divergence_2d


@dataclass
class ClaimResult:
    case: str
    kind: str
    passed: bool
    detail: str = ""
    residuals: list = field(default_factory=list)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "kind": self.kind,
            "passed": self.passed,
            "detail": self.detail,
            "residuals": list(self.residuals),
            "seconds": round(self.seconds, 4),
        }


@dataclass
class CorpusCase:
    """One corpus file, optionally with its constants instantiated."""

    id: str
    text: str
    bindings: dict = field(default_factory=dict)

    def load(self) -> SystemFile:
        return parse_system_file(self.text, self.bindings)


@dataclass
class CorpusReport:
    results: list

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "passed": sum(r.passed for r in self.results),
            "failed": len(self.failures),
            "results": [r.as_dict() for r in self.results],
        }


def corpus_names() -> list:
    root = resources.files(__name__)
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".sys"))


def corpus_text(name: str) -> str:
    return resources.files(__name__).joinpath(name + ".sys").read_text(encoding="utf-8")


def load(name: str, bindings: dict | None = None) -> SystemFile:
    return parse_system_file(corpus_text(name), bindings)


def corpus_cases() -> list:
    """Every file once symbolically and once per declared constant value."""
    out = []
    for name in corpus_names():
        text = corpus_text(name)
        out.append(CorpusCase(name, text))
        for const, values in parse_system_file(text).variants:
            for val in values:
                out.append(CorpusCase(f"{name}[{const}={val}]", text, {const: val}))
    return out


# --------------------------------------------------------------------------
# Claim evaluation


def _vector(f: SystemFile, subject) -> tuple:
    return f.cv(subject) if isinstance(subject, str) else tuple(subject)


def _text(items) -> list:
    return [to_text(e) for e in items]


def _char_matches(lam, F, S) -> tuple:
    lam = as_characteristic(lam, S)
    if verify_characteristic(lam, F, S):
        return True, "exact characteristic form", []
    char, _ = extract_characteristic(F, S)
    diff = Characteristic(char.labels, tuple(a - lam.get(l) for l, a in zip(char.labels, char.components)))
    if is_trivial_characteristic(diff, S):
        return True, "equal to the extracted characteristic on solutions", []
    return False, "characteristic differs from the extracted one", _text(S.reduce(c) for c in diff.components)


def _minimal_matches(S, expected) -> tuple:
    """Minimal equations of ``S`` coincide with ``expected`` residuals up to order and sign."""
    have = [S.residual(l) for l in S.minimal_labels]
    left = list(expected)
    for r in have:
        hit = next((k for k, e in enumerate(left) if is_zero(r - e) or is_zero(r + e)), None)
        if hit is None:
            return False, "unexpected minimal equation", [to_text(r)]
        left.pop(hit)
    if left:
        return False, "missing minimal equations", _text(left)
    return True, "minimal set " + ", ".join(S.minimal_labels), []


def evaluate_check(f: SystemFile, c: Check) -> tuple:
    """``(passed, detail, residuals)`` for one claim."""
    kind = c.kind
    S = f.system(c.on or c.in_)
    if kind == "conserved":
        F = _vector(f, c.subjects[0])
        ok = verify_conserved_vector(F, S)
        return ok, "", [] if ok else [to_text(S.reduce(div(F, S)))]
    if kind == "char":
        F = _vector(f, c.subjects[0])
        if not verify_conserved_vector(F, S):
            return False, "not a conserved vector", []
        return _char_matches(c.expect, F, S)
    if kind == "cosym":
        return cosymmetry_test(c.subjects[0], S), "", []
    if kind == "phi":
        alpha, beta = c.subjects[0]
        phi = solve_null_divergence_2d(alpha, beta, S)
        d = phi - c.expect
        ok = d.is_constant()
        return ok, f"Phi = {to_text(phi)}", [] if ok else [to_text(d)]
    if kind == "trivial":
        return is_trivial_conserved_vector(_vector(f, c.subjects[0]), S), "", []
    if kind == "equiv":
        return equivalent_conserved_vectors(_vector(f, c.subjects[0]), _vector(f, c.subjects[1]), S), "", []
    if kind == "residual":
        G = {v: dict(body) for v, body in c.fluxes}
        res = [r for _, _, _, r in covering_residuals(S, G, [v for v, _ in c.fluxes], lift_constraints=c.lift)]
        want = list(c.expect)
        ok = len(res) == len(want) and all(is_zero(a - b) for a, b in zip(res, want))
        return ok, "residuals " + ", ".join(_text(res)), [] if ok else _text(res)
    if kind == "minimal":
        return _minimal_matches(S, c.expect)
    P = f.structure(c.in_)
    F = _vector(f, c.subjects[0])
    if kind == "localize":
        char, _ = extract_characteristic(F, P.system)
        out = localize_conserved_vector(F, char, P)
        ok = verify_conserved_vector(c.expect, P.base) and equivalent_conserved_vectors(out, c.expect, P.base)
        return ok, "localized to (" + ", ".join(_text(out)) + ")", [] if ok else _text(out)
    if kind == "purity":
        char, _ = extract_characteristic(F, P.system)
        r = purity_test(char, P, F)
        ok = r.verdict.value == c.expect
        detail = r.verdict.value
        res = []
        if c.witness is not None:
            if r.witness is None:
                ok = False
                detail += ", no witness"
            else:
                detail += ", witness (" + ", ".join(_text(r.witness)) + ")"
                if not equivalent_conserved_vectors(r.witness, c.witness, P.base):
                    ok = False
                    res = [to_text(a - b) for a, b in zip(r.witness, c.witness)]
        return ok, detail, res
    if kind == "locality":
        rep = locality_statements(F, P)
        ok = rep.consistent
        if c.expect is not None:
            ok = ok and rep.induced == (c.expect == "Induced")
        detail = (f"induced={rep.induced} potential_free_cv={rep.potential_free_cv} "
                  f"induced_extended_char={rep.induced_extended_char} potential_free_char={rep.potential_free_char}")
        return ok, detail, []
    if kind == "dv":
        char, _ = extract_characteristic(F, P.system)
        dF, dl = potential_derivative_cv(F, c.wrt, P, char)
        ok_char, _, _ = _char_matches(dl, dF, P.system)
        ok = ok_char and equivalent_conserved_vectors(dF, c.expect, P.system)
        return ok, "d/d" + c.wrt + " = (" + ", ".join(_text(dF)) + ")", [] if ok else _text(dF)
    raise ConslawError(f"unknown check kind {kind!r}")  # pragma: no cover


def _matches(pattern: str | None, case_id: str) -> bool:
    if not pattern:
        return True
    if any(ch in pattern for ch in "*?["):
        return fnmatch.fnmatchcase(case_id, pattern)
    return pattern in case_id


def run_case(case: CorpusCase, pattern: str | None = None) -> list:
    try:
        f = case.load()
    except ConslawError as exc:
        return [ClaimResult(f"{case.id}/load", "load", False, f"{exc.code}: {exc}")]
    out = []
    for c in f.checks:
        cid = f"{case.id}/{c.id}"
        if not _matches(pattern, cid):
            continue
        t0 = time.perf_counter()
        try:
            ok, detail, res = evaluate_check(f, c)
        except ConslawError as exc:
            ok, detail, res = False, f"{exc.code}: {exc}", []
        out.append(ClaimResult(cid, c.kind, bool(ok), detail, res, time.perf_counter() - t0))
    return out


def _run_one(args):
    return run_case(*args)


def run_corpus(filter: str | None = None, jobs: int = 1) -> CorpusReport:
    """Verify every corpus claim whose id ``file/check`` matches ``filter``.

    ``filter`` is a glob pattern when it contains wildcards and a substring
    otherwise.  ``jobs > 1`` spreads the files over worker processes.
    """
    cases = corpus_cases()
    work = [(case, filter) for case in cases]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_one, work))
    else:
        chunks = [_run_one(w) for w in work]
    return CorpusReport([r for chunk in chunks for r in chunk])


__all__ = [
    "ClaimResult",
    "CorpusCase",
    "CorpusReport",
    "corpus_cases",
    "corpus_names",
    "corpus_text",
    "evaluate_check",
    "load",
    "run_case",
    "run_corpus",
]
