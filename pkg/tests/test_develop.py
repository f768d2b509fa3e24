import pytest
from hypothesis import HealthCheck, given, settings

from irw.develop import (OccurrenceSet, automaton_term, build_paths, complete_development, descendants,
                         descendants_via_labels, diamond_join, mark, matching_term, non_conflicting,
                         read_marks, strip_project, unmark)
from irw.reduction import is_destructive, record, run_certified, strategy_from_spec, strong_p_limit
from irw.term_core import IrwError, parse_term
from irw.trs import make_trs

from gen import development_instances, residual_instances
from props import check_development, check_residuals

P = parse_term
O = OccurrenceSet

COLLAPSE = make_trs("f/1", {"r": "f(x) -> x"})
MCONFL = make_trs("f/1 g/1", {"r1": "f(x) -> x", "r2": "g(x) -> x"})
AB = make_trs("f/2 a/0 b/0 c/0 d/0", {"r1": "a -> c", "r2": "b -> d"})
PATHS = make_trs("f/1 g/1 h/1", {"r1": "f(x) -> h(x)", "r2": "h(x) -> x"})


def _both(U, red, depth=9):
    a = descendants(U, red, depth).positions(None, depth)
    assert a == descendants_via_labels(U, red, depth).positions(None, depth)
    return a


def test_occurrence_set_parsing():
    assert O.parse("{0, 1.0}").positions(None, 5) == {(0,), (1, 0)}
    t = P("mu x. g(f(x))")
    assert O.parse("@node:f").positions(t, 3) == {(0,), (0, 0, 0)}


def test_descendant_examples():
    dup = make_trs("f/1 g/2 a/0", {"r": "f(x) -> g(x, x)"})
    assert _both(O([(0,)]), record(dup, P("f(a)"), [((), "r")])) == {(0,), (1,)}
    red = run_certified(COLLAPSE, P("mu s. f(s)"), strategy_from_spec("script:"), 100)
    assert _both(O.parse("@node:f"), red, 6) == set()
    pat = make_trs("f/1 g/1 a/0", {"r": "f(g(x)) -> x"})
    assert _both(O([(0,)]), record(pat, P("f(g(a))"), [((), "r")])) == set()
    swap = make_trs("f/2 c/0 d/0", {"r": "f(x, y) -> f(y, x)"})
    assert _both(O([(0,)]), record(swap, P("f(c, d)"), [((), "r")])) == {(1,)}
    with pytest.raises(IrwError) as e:
        descendants_via_labels(O([(0,)]), record(swap, P("f(_|_, c)"), [((), "r")]))
    assert e.value.code == "occurrence-at-bot"


def test_non_conflicting():
    assert non_conflicting(MCONFL, P("mu t. g(f(t))"), O.parse("@node:f,@node:g"))
    ov = make_trs("f/1 g/1 a/0 b/0 c/0", {"r1": "f(g(x)) -> a", "r2": "g(b) -> c"})
    assert not non_conflicting(ov, P("f(g(b))"), O([(), (0,)]))
    assert non_conflicting(ov, P("f(g(b))"), O([(0,)]))


def test_complete_developments():
    assert complete_development(AB, P("f(a, b)"), O([(0,), (1,)])).limit == P("f(c, d)")
    t = P("mu t. g(f(t))")
    assert complete_development(MCONFL, t, O.parse("@node:f")).limit == P("mu x. g(x)")
    assert complete_development(MCONFL, t, O.parse("@node:g")).limit == P("mu x. f(x)")
    assert complete_development(COLLAPSE, P("mu s. f(s)"), O.parse("@node:f")).limit == P("_|_")


def test_matching_terms():
    t = P("mu t. g(f(t))")
    for U in ("@node:f", "@node:g"):
        assert matching_term(MCONFL, t, O.parse(U)) == complete_development(MCONFL, t, O.parse(U)).limit
    assert matching_term(AB, P("f(a, b)"), O([])) == P("f(a, b)")
    assert matching_term(COLLAPSE, P("mu s. f(s)"), O.parse("@node:f")) == P("_|_")


def test_paths():
    for t in ("g(f(g(h(_|_))))", "g(f(g(mu x. h(x))))"):
        A = build_paths(PATHS, P(t), O.parse("@node:f,@node:h"))
        assert A.traces(12) == {("g", 0, "h", 0, "g", 0)}
        assert automaton_term(A) == P("g(h(g(_|_)))")
    A = build_paths(PATHS, P("g(f(g(h(_|_))))"), O([]))
    assert automaton_term(A) == P("g(f(g(h(_|_))))")


def test_diamond():
    assert diamond_join(AB, P("f(a, b)"), O([(0,)]), O([(1,)])) == (P("f(c, b)"), P("f(a, d)"), P("f(c, d)"))
    assert diamond_join(AB, P("f(a, b)"), O([(0,)]), O([(0,)])) == (P("f(c, b)"),) * 3
    t = P("mu t. g(f(t))")
    assert diamond_join(MCONFL, t, O.parse("@node:f"), O.parse("@node:g")) == \
        (P("mu x. g(x)"), P("mu x. f(x)"), P("_|_"))


def test_strip_projection():
    S = record(AB, P("f(a, b)"), [((0,), "r1")])
    proj, rest = strip_project(AB, S, O([(1,)]))
    assert [(s.position, s.rule.name) for s in proj.steps] == [((0,), "r1")]
    assert rest.positions(None, 5) == {(1,)}
    S = record(AB, P("f(a, b)"), [((0,), "r1"), ((1,), "r2")])
    proj, rest = strip_project(AB, S, O([(1,)]))
    assert [(s.position, s.rule.name) for s in proj.steps] == [((0,), "r1")]
    assert rest.positions(None, 5) == set()
    S = run_certified(COLLAPSE, P("mu s. f(s)"), strategy_from_spec("script:"), 100)
    proj, _ = strip_project(COLLAPSE, S, O([(0,)]))
    assert is_destructive(proj)[0] and strong_p_limit(proj).limit == P("_|_")


def test_marks_round_trip():
    t = P("f(a, b)")
    m = mark(t, O([(0,)]), "u", AB, True)
    assert unmark(m) == t and read_marks(m, "u").positions(None, 5) == {(0,)}
    with pytest.raises(IrwError) as e:
        mark(t, O([()]), "u", AB, True)
    assert e.value.code == "occurrence-not-a-redex"


@settings(max_examples=150, deadline=None, suppress_health_check=list(HealthCheck))
@given(residual_instances())
def test_residual_laws(inst):
    check_residuals(*inst)


@settings(max_examples=100, deadline=None, suppress_health_check=list(HealthCheck))
@given(development_instances())
def test_development_laws(inst):
    check_development(*inst)
