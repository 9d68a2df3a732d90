import pytest

from conslaw.corpus import (
    CorpusCase,
    corpus_cases,
    corpus_names,
    evaluate_check,
    load,
    run_case,
    run_corpus,
)


def test_every_claim_holds():
    report = run_corpus()
    assert report.ok, [(r.case, r.detail, r.residuals) for r in report.failures]
    assert len(report.results) >= 100
    kinds = {r.kind for r in report.results}
    assert {"conserved", "char", "cosym", "phi", "localize", "purity", "locality", "residual", "minimal"} <= kinds


def test_corpus_files():
    assert {"b0", "ba", "burgers", "general", "heat", "u2diff", "u2conv", "bintaua", "standard"} <= set(corpus_names())
    ids = [c.id for c in corpus_cases()]
    assert "ba[eps=0]" in ids and "ba[eps=-1]" in ids


@pytest.mark.parametrize("pattern, expected", [("heat/phi", 1), ("*/purity-F5*", 3), ("b0/potsys*", 4)])
def test_filter(pattern, expected):
    report = run_corpus(pattern)
    assert len(report.results) == expected
    assert report.ok


def test_parallel_matches_serial():
    serial = run_corpus("u2*")
    parallel = run_corpus("u2*", jobs=2)
    assert [r.case for r in serial.results] == [r.case for r in parallel.results]
    assert parallel.ok


def test_false_claims_fail_with_residuals():
    text = """\
indep t x
dep u
eq u_t = u_xx label L
check wrong: conserved (u^2, -u_x)
check wrong-char: char (u, -u_x) = (2)
check wrong-phi: phi (1, 0) = x^2
check wrong-residual: residual flux v (t: u, x: u) = (0)
"""
    results = run_case(CorpusCase("scratch", text))
    assert [r.passed for r in results] == [False, False, False, False]
    assert results[0].residuals
    d = results[0].as_dict()
    assert d["case"] == "scratch/wrong" and d["passed"] is False


def test_load_errors_become_failed_claims():
    (r,) = run_case(CorpusCase("broken", "indep t x\ndep u\neq u_t = \n"))
    assert not r.passed and r.kind == "load"


def test_evaluate_single_check():
    f = load("burgers")
    check = next(c for c in f.checks if c.id == "covering-residual")
    ok, detail, res = evaluate_check(f, check)
    assert ok and "exp(v)" in detail and res == []


def test_report_dict():
    d = run_corpus("general/*").as_dict()
    assert d["ok"] and d["failed"] == 0 and d["passed"] == len(d["results"])
