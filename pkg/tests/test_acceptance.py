"""Acceptance suite: one or more tests per criterion, named ``test_cNN_*``.

The terminal summary (see conftest.py) prints one pass/fail line per
criterion.  Run on its own with ``pytest tests/test_acceptance.py``.
"""
from hypothesis import HealthCheck, given, settings, strategies as st

from irw.boehm import boehm_tree, check_prs_eq_bohm, compress, fragile, root_active
from irw.develop import (OccurrenceSet, automaton_term, build_paths, complete_development, diamond_join,
                         matching_term)
from irw.reduction import (run_certified, strategy_from_spec, strong_m_limit, strong_p_limit,
                           weak_m_limit, weak_p_limit)
from irw.term_core import TermSequence, parse_term, truncate
from irw.trs import load_trs, make_trs

from irw.cli import CORPUS_DIR
from gen import development_instances, partial_terms, ra_instances, residual_instances
from props import check_agreement, check_development, check_lattice, check_liminf, check_residuals

P = parse_term
O = OccurrenceSet

CRITERIA = {
    1: "collapsing left argument next to a growing right one (strong p / weak m limits)",
    2: "argument swap cycle (strong vs weak p-limit)",
    3: "volatile positions of an outermost run",
    4: "mutually collapsing pair (developments, Boehm tree, diamond)",
    5: "path traces and matching terms",
    6: "lattice and metric laws, 10000 random partial terms",
    7: "liminf laws, 1000 eventually periodic sequences",
    8: "residual laws, 1000 random reductions",
    9: "development laws, 500 random instances",
    10: "cross-checks: strong limits, p-limit = Boehm tree, compression",
    11: "root-activeness verdicts and agreement on 500 terms",
}

PROPS = dict(deadline=None, suppress_health_check=list(HealthCheck), derandomize=True)


def golden(name):
    return load_trs(CORPUS_DIR / f"{name}.trs")


def certified_run(trs, t, spec):
    return run_certified(trs, t, strategy_from_spec(spec), 1000)


# ------------------------------------------------------------ golden runs

def test_c01_collapsing_and_growing_arguments():
    trs = golden("prsconv")
    red = certified_run(trs, trs.terms["t"], "alternating")
    sp = strong_p_limit(red, 10)
    assert sp.certificate == "exact-rational"
    assert sp.limit == P("f(_|_, mu x. g(x))")
    assert ((0,), "certified", True) in sp.volatile
    wm = weak_m_limit(red, 10)
    assert truncate(wm.limit, 10) == truncate(P("f(h(mu x. g(x)), mu x. g(x))"), 10)


def test_c02_swap_cycle():
    trs = golden("weakvsstrong")
    red = certified_run(trs, trs.terms["t"], "script:1")
    sp = strong_p_limit(red, 4)
    assert sp.certificate == "exact-rational" and sp.limit == P("f(a, _|_)")
    assert weak_p_limit(red, 4).limit == P("f(a, f(g(_|_), g(_|_)))")


def test_c03_volatile_positions():
    trs = golden("volpos")
    red = certified_run(trs, trs.terms["t"], "outermost")
    sp = strong_p_limit(red, 4)
    assert sp.limit == P("f(s(0), _|_)")
    assert {(p, o) for p, _, o in sp.volatile} == {((1,), True), ((1, 0), False)}


def test_c04_mutually_collapsing_pair():
    trs = golden("mconfl")
    t = trs.terms["t"]
    F, G = O.parse("@node:f"), O.parse("@node:g")
    dev_f = complete_development(trs, t, F)
    dev_g = complete_development(trs, t, G)
    assert dev_f.limit == P("mu x. g(x)") and dev_g.limit == P("mu x. f(x)")
    assert matching_term(trs, t, F) == dev_f.limit
    assert matching_term(trs, t, G) == dev_g.limit
    bt = boehm_tree(trs, t, 5)
    assert bt.tree == P("_|_") and not bt.positions_unknown
    assert diamond_join(trs, t, F, G)[2] == P("_|_")


def test_c05_paths():
    trs = golden("paths")
    U = O.parse("@node:f,@node:h")
    for name in ("t1", "t2"):
        A = build_paths(trs, trs.terms[name], U)
        assert A.traces(16) == {("g", 0, "h", 0, "g", 0)}
        assert automaton_term(A) == P("g(h(g(_|_)))")
        assert matching_term(trs, trs.terms[name], U) == P("g(h(g(_|_)))")


# ------------------------------------------------------- property suites

@settings(max_examples=10000, **PROPS)
@given(partial_terms(), partial_terms(), partial_terms())
def test_c06_lattice_and_metric(s, t, u):
    check_lattice(s, t, u)


@settings(max_examples=1000, **PROPS)
@given(st.lists(partial_terms(4), max_size=3), st.lists(partial_terms(4), min_size=1, max_size=3))
def test_c07_liminf(prefix, tail):
    check_liminf(TermSequence(prefix, tail))


@settings(max_examples=1000, **PROPS)
@given(residual_instances())
def test_c08_residuals(inst):
    check_residuals(*inst)


@settings(max_examples=500, **PROPS)
@given(development_instances())
def test_c09_developments(inst):
    check_development(*inst)


# ----------------------------------------------------------- cross-checks

GOLDEN_RUNS = [("prsconv", "t", "alternating"), ("weakvsstrong", "t", "script:1"),
               ("volpos", "t", "outermost"), ("afa", "t", "outermost"), ("strweak", "t", "script:0"),
               ("mconfl", "t", "outermost"), ("paths", "t1", "outermost"), ("paths", "t2", "outermost")]


def test_c10_total_strong_limits_are_metric_limits():
    totals = 0
    for name, term, spec in GOLDEN_RUNS:
        trs = golden(name)
        red = certified_run(trs, trs.terms[term], spec)
        sp = strong_p_limit(red, 16)
        if sp.limit is not None and sp.limit.is_total():
            totals += 1
            sm = strong_m_limit(red, 16)
            assert sm.converges and truncate(sm.limit, 16) == truncate(sp.limit, 16)
    assert totals >= 1


def test_c10_p_limits_are_boehm_trees():
    for name, term, spec in GOLDEN_RUNS:
        trs = golden(name)
        rep = check_prs_eq_bohm(trs, trs.terms[term], strategy_from_spec(spec))
        assert rep["status"] == "pass", (name, rep)


def test_c10_no_compression_without_left_linearity():
    trs = golden("compression")
    rep = compress(trs, trs.terms["t"])
    assert rep["stages"] == ["f(mu x. g(x), mu x. g(x))", "c"]
    assert rep["status"] == "absent"
    looping = make_trs("f/2 a/0 b/0 c/0", {"r1": "f(x, x) -> c", "r2": "a -> a", "r3": "b -> b"})
    rep = compress(looping, P("f(a, b)"))
    assert rep["stages"] == ["f(_|_, _|_)", "c"] and rep["status"] == "absent"


# -------------------------------------------------------- root-activeness

def test_c11_verdicts():
    collapse = make_trs("f/1 g/1", {"r1": "f(x) -> x", "r2": "g(x) -> x"})
    for t in ("mu x. f(x)", "mu x. g(x)"):
        assert root_active(collapse, P(t), 2000).verdict == "yes"
    loop = make_trs("h/1 g/1 a/0 b/0", {"r1": "h(x) -> h(g(x))", "r2": "b -> g(b)"})
    assert root_active(loop, P("h(a)"), 2000).verdict == "yes"
    assert root_active(loop, P("b"), 2000).verdict == "no"
    afa = make_trs("f/1 a/0", {"r": "a -> f(a)"})
    assert root_active(afa, P("a"), 2000).verdict == "no"
    assert fragile(afa, P("a"), 2000).verdict == "no"


@settings(max_examples=500, **PROPS)
@given(ra_instances())
def test_c11_agreement(inst):
    check_agreement(*inst, 300)


if __name__ == "__main__":
    import pytest
    raise SystemExit(pytest.main([__file__, "-q"]))
