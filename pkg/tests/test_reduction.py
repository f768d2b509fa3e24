import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from irw.reduction import (fold_rational, is_destructive, detect_volatile, record, run,
                           run_certified, certify, strategy_from_spec, strong_m_limit, strong_p_limit,
                           weak_m_limit, weak_p_limit)
from irw.term_core import IrwError, glb, leq_bot, parse_term, truncate
from irw.trs import make_trs

from gen import orthogonal_trs, random_steps, small_terms

P = parse_term

SWAP = make_trs("f/2 g/1 a/0 b/0", {"r": "f(x, y) -> f(y, x)"})
PRSCONV = make_trs("f/2 h/1 g/1 a/0 b/0", {"r1": "h(x) -> h(g(x))", "r2": "b -> g(b)"})
VOLPOS = make_trs("f/2 s/1 h/1 g/1 0/0", {"r1": "h(x) -> g(x)", "r2": "s(g(x)) -> s(h(s(x)))"})
AFA = make_trs("g/1 f/1 a/0", {"r": "a -> f(a)"})


def _run(trs, t, spec, budget=1000):
    return run_certified(trs, P(t), strategy_from_spec(spec), budget)


def test_outermost_steps():
    red = run(AFA, P("g(a)"), strategy_from_spec("outermost"), 3)
    assert [s.after for s in red.steps] == [P("g(f(a))"), P("g(f(f(a)))"), P("g(f(f(f(a))))")]
    assert red.stop_reason == "budget"


def test_cycle_is_recorded():
    red = _run(SWAP, "f(a, f(g(a), g(b)))", "script:1", 4)
    assert red.cycle == (0, 2)
    assert red.stop_reason == "cycle"


def test_normal_form_run_is_empty():
    red = _run(make_trs("c/0 a/0", {"r": "a -> a"}), "c", "outermost", 10)
    assert len(red) == 0 and red.stop_reason == "normal-form"


def test_strong_p_limits():
    out = strong_p_limit(_run(PRSCONV, "f(h(a), b)", "alternating"), 6)
    assert out.limit == P("f(_|_, mu x. g(x))") and out.certificate == "exact-rational"
    assert out.volatile == [((0,), "certified", True)]
    out = strong_p_limit(_run(VOLPOS, "f(s(0), s(h(0)))", "outermost"), 4)
    assert out.limit == P("f(s(0), _|_)")
    assert {(p, o) for p, _, o in out.volatile} == {((1,), True), ((1, 0), False)}
    out = strong_p_limit(_run(SWAP, "f(a, f(g(a), g(b)))", "script:1"), 4)
    assert out.limit == P("f(a, _|_)") and out.certificate == "exact-rational"
    assert out.volatile == [((1,), "certified", True)]


def test_weak_p_limits():
    red = _run(SWAP, "f(a, f(g(a), g(b)))", "script:1")
    assert weak_p_limit(red, 4).limit == P("f(a, f(g(_|_), g(_|_)))")
    closed = record(AFA, P("g(f(f(a)))"), [])
    assert weak_p_limit(closed).limit == P("g(f(f(a)))")
    sw = make_trs("f/1 h/1 g/1 a/0", {"r1": "h(x) -> h(g(x))", "r2": "f(x) -> g(x)"})
    assert weak_p_limit(_run(sw, "f(h(a))", "script:0"), 6).limit == P("f(h(mu x. g(x)))")


def test_m_limits():
    out = strong_m_limit(_run(AFA, "g(a)", "outermost"), 16)
    assert out.converges and out.limit == P("g(mu x. f(x))")
    root = make_trs("g/1 f/1 a/0", {"r": "g(x) -> g(f(x))"})
    red = _run(root, "g(a)", "script:")
    assert strong_m_limit(red, 6).limit is None and not strong_m_limit(red, 6).converges
    assert weak_m_limit(red, 6).limit == P("g(mu x. f(x))")
    assert weak_m_limit(_run(SWAP, "f(a, f(g(a), g(b)))", "script:1"), 4).limit is None
    nf = _run(SWAP, "g(a)", "outermost")
    assert strong_m_limit(nf).limit == weak_m_limit(nf).limit == P("g(a)")


def test_detect_volatile_and_destructive():
    assert detect_volatile(_run(SWAP, "f(a, f(g(a), g(b)))", "script:1")) == [((1,), "certified", True)]
    loop = make_trs("h/1 g/1 a/0", {"r": "h(x) -> h(g(x))"})
    assert detect_volatile(_run(loop, "h(a)", "script:")) == [((), "certified", True)]
    assert detect_volatile(_run(SWAP, "g(a)", "outermost")) == []
    collapse = make_trs("f/1", {"r": "f(x) -> x"})
    red = _run(collapse, "mu t. f(t)", "script:")
    assert is_destructive(red)[0] and strong_p_limit(red).limit == P("_|_")
    assert not is_destructive(_run(AFA, "a", "outermost"))[0]
    assert not is_destructive(_run(collapse, "_|_", "outermost"))[0]


def test_fold_rational():
    ts = [P(x) for x in ["_|_", "f(_|_)", "f(f(_|_))", "f(f(f(_|_)))"]]
    assert fold_rational(ts) == P("mu x. f(x)")
    assert fold_rational([P(x) for x in ["_|_", "g(_|_)", "g(f(_|_))"]]) is None
    assert fold_rational([P(x) for x in ["_|_", "f(_|_)", "g(f(_|_))"]]) is None


def test_cycle_limit_is_glb_of_cycle_contexts():
    red = _run(SWAP, "f(a, f(g(a), g(b)))", "script:1")
    k, p = red.cycle
    assert strong_p_limit(red, 4).limit == glb([s.context for s in red.steps[k:k + p]])


def test_parallel_growth_sites():
    trs = make_trs("f/2 g/1 a/0 b/0 c/0", {"r1": "f(x, x) -> c", "r2": "a -> g(a)", "r3": "b -> g(b)"})
    out = strong_p_limit(_run(trs, "f(a, b)", "parallel-outermost"))
    assert out.certificate == "exact-rational"
    assert out.limit == P("f(mu x. g(x), mu y. g(y))")
    same = make_trs("f/2 g/1 a/0 b/0 c/0", {"r1": "f(x, x) -> c", "r2": "a -> g(a)", "r3": "b -> g(a)"})
    assert strong_p_limit(_run(same, "f(a, b)", "parallel-outermost")).limit == P("c")


def test_bad_strategy():
    with pytest.raises(IrwError) as e:
        strategy_from_spec("sideways")
    assert e.value.code == "invalid-strategy"


@settings(max_examples=200, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.data())
def test_context_below_both_ends(data):
    trs = data.draw(orthogonal_trs())
    t = data.draw(small_terms(trs=trs))
    steps = data.draw(random_steps(trs, t))
    red = record(trs, t, steps)
    for i, s in enumerate(red.steps):
        assert leq_bot(s.context, glb([red.term(i), red.term(i + 1)]))


@settings(max_examples=80, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.data())
def test_limit_modes_agree_where_they_should(data):
    trs = data.draw(orthogonal_trs())
    t = data.draw(small_terms(trs=trs))
    spec = data.draw(st.sampled_from(["outermost", "innermost", "parallel-outermost"]))
    red = run_certified(trs, t, strategy_from_spec(spec), 200)
    if certify(red) is None:
        return
    D = 8
    sp, wp = strong_p_limit(red, D), weak_p_limit(red, D)
    assert sp.certificate == wp.certificate == "exact-rational"
    assert leq_bot(truncate(sp.limit, D), truncate(wp.limit, D))
    if sp.limit.is_total():
        sm = strong_m_limit(red, D)
        assert sm.converges and truncate(sm.limit, D) == truncate(sp.limit, D)
        assert not any(v in ("certified", "suspected") for _, v, _ in detect_volatile(red))
    if red.closed:
        assert sp.limit == wp.limit == red.final


@settings(max_examples=150, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.data())
def test_concatenation(data):
    trs = data.draw(orthogonal_trs())
    t = data.draw(small_terms(trs=trs))
    steps = data.draw(random_steps(trs, t))
    k = data.draw(st.integers(0, len(steps)))
    whole = record(trs, t, steps)
    first = record(trs, t, steps[:k])
    second = record(trs, first.final, steps[k:])
    assert second.final == whole.final
    assert strong_p_limit(whole).limit == strong_p_limit(second).limit == whole.final
    assert [s.context for s in whole.steps] == [s.context for s in first.steps + second.steps]
