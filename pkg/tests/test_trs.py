import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from irw.term_core import BOT, ParseError, glb, leq_bot, parse_term, positions_to_depth, symbol_at
from irw.trs import (MATCH, apply_subst, is_normal_form, make_trs, match, node_status, parse_trs,
                     redexes, rewrite_step, unify)

from gen import orthogonal_trs, small_rational_terms, small_terms

P = parse_term


def test_match():
    assert match(P("f(x, y)"), P("f(a, g(b))")) == {"x": P("a"), "y": P("g(b)")}
    assert match(P("f(x)"), P("g(a)")) is None
    assert match(P("h(x)"), P("h(_|_)")) == {"x": P("_|_")}
    assert match(P("f(x, x)"), P("f(_|_, _|_)")) == {"x": P("_|_")}


def test_apply_subst():
    assert apply_subst({"x": P("a")}, P("f(x, x)")) == P("f(a, a)")
    assert apply_subst({}, P("f(x, b)")) == P("f(x, b)")
    assert apply_subst({"x": P("mu y. f(y)")}, P("g(x)")) == P("g(mu y. f(y))")


def test_rewrite_step():
    afa = make_trs("f/1 a/0", {"r": "a -> f(a)"})
    assert rewrite_step(afa, P("a"), (), afa.rule("r")) == P("f(a)")
    mc = make_trs("f/1 g/1", {"r1": "f(x) -> x", "r2": "g(x) -> x"})
    out = rewrite_step(mc, P("mu t. g(f(t))"), (0,), mc.rule("r1"))
    assert out == P("g(mu t. g(f(t)))")
    pc = make_trs("f/2 h/1 g/1 a/0 b/0", {"r1": "h(x) -> h(g(x))", "r2": "b -> g(b)"})
    assert rewrite_step(pc, P("f(h(a), b)"), (0,), pc.rule("r1")) == P("f(h(g(a)), b)")


def test_redexes():
    afa = make_trs("g/1 f/1 a/0", {"r": "a -> f(a)"})
    assert [(p, r.name) for p, r in redexes(afa, P("g(a)"), 2)] == [((0,), "r")]
    mc = make_trs("f/1 g/1", {"r1": "f(x) -> x", "r2": "g(x) -> x"})
    assert [(p, r.name) for p, r in redexes(mc, P("mu t. g(f(t))"), 1)] == [((), "r2"), ((0,), "r1")]
    empty = make_trs("f/1 a/0", {})
    assert redexes(empty, P("f(a)"), 5) == []
    assert is_normal_form(empty, P("f(a)"))


def test_linearity_and_orthogonality():
    assert make_trs("f/2", {"r": "f(x, y) -> f(y, x)"}).left_linear
    nl = make_trs("f/2 c/0", {"r": "f(x, x) -> c"})
    assert not nl.left_linear
    assert (nl.linearity_witness[0].name, nl.linearity_witness[1]) == ("r", "x")
    assert make_trs("f/1", {}).left_linear
    assert make_trs("f/1 g/1", {"r1": "f(x) -> x", "r2": "g(x) -> x"}).orthogonal
    assert make_trs("h/1 g/1 s/1 0/0", {"r1": "h(x) -> g(x)", "r2": "s(g(x)) -> s(h(s(x)))"}).orthogonal
    ov = make_trs("f/1 g/1 a/0 b/0 c/0", {"r1": "f(g(x)) -> a", "r2": "g(b) -> c"})
    assert not ov.orthogonal
    assert ov.orthogonality_witness[0] == "overlap" and ov.orthogonality_witness[3] == (0,)


def test_parse_errors_carry_location():
    with pytest.raises(ParseError) as e:
        parse_trs("sig f/1\nrule r: f(x) -> q(x)\n")
    assert e.value.code == "parse-error" and "line 2" in str(e.value)
    with pytest.raises(ParseError):
        parse_trs("sig f:1\n")
    with pytest.raises(ParseError):
        parse_trs("bogus line\n")


def test_file_format():
    trs = parse_trs("# comment\nsig f/2 a/0\nrule r: f(x, y) -> f(y, x)  # swap\nterm t = f(a, mu z. f(z, a))\n")
    assert trs.rule("r").lhs == P("f(x, y)")
    assert trs.terms["t"] == P("f(a, mu z. f(z, a))")


def _tuple(t, n=0, tag=""):
    lab = t.labels[n]
    if lab[0] == "?":
        return lab + tag
    return (lab,) + tuple(_tuple(t, c, tag) for c in t.kids[n])


def _walk(x, s):
    while isinstance(x, str) and x in s:
        x = s[x]
    return x


def _occurs(v, x, s):
    x = _walk(x, s)
    if isinstance(x, str):
        return x == v
    return any(_occurs(v, c, s) for c in x[1:])


def _unifiable(a, b, s=None):
    s = {} if s is None else s
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = _walk(x, s), _walk(y, s)
        if x == y:
            continue
        if isinstance(x, str):
            if _occurs(x, y, s):
                return False
            s[x] = y
        elif isinstance(y, str):
            stack.append((y, x))
        elif x[0] != y[0] or len(x) != len(y):
            return False
        else:
            stack.extend(zip(x[1:], y[1:]))
    return True


def _subterms(x, pos=()):
    if isinstance(x, str):
        return
    yield pos, x
    for i, c in enumerate(x[1:]):
        yield from _subterms(c, pos + (i,))


def _brute_orthogonal(trs):
    if not trs.left_linear:
        return False
    for r1 in trs.rules:
        for r2 in trs.rules:
            for w, sub in _subterms(_tuple(r1.lhs)):
                if r1 is r2 and not w:
                    continue
                if _unifiable(sub, _tuple(r2.lhs, tag="'")):
                    return False
    return True


@st.composite
def _any_trs(draw):
    syms = {"f": 2, "g": 1, "a": 0, "b": 0}

    def term(d, vs):
        if d == 0 or draw(st.integers(0, 2)) == 0:
            return draw(st.sampled_from(vs + ["a"]))
        n = draw(st.sampled_from(["f", "g", "b"]))
        if syms[n] == 0:
            return n
        return f"{n}(" + ", ".join(term(d - 1, vs) for _ in range(syms[n])) + ")"

    rules = {}
    for i in range(draw(st.integers(1, 3))):
        head = draw(st.sampled_from(["f", "g"]))
        args = [term(2, ["x", "y", "z"]) for _ in range(syms[head])]
        lhs = f"{head}(" + ", ".join(args) + ")"
        rules[f"r{i}"] = f"{lhs} -> a"
    return make_trs("f/2 g/1 a/0 b/0", rules)


def test_unify():
    assert unify(("g", (("?", "x"),)), ("g", (("b", ()),)))
    assert not unify(("g", (("a", ()),)), ("g", (("b", ()),)))
    assert not unify(("?", "x"), ("g", (("?", "x"),)))


@settings(max_examples=300, deadline=None, suppress_health_check=list(HealthCheck))
@given(_any_trs())
def test_orthogonality_matches_brute_force(trs):
    assert trs.orthogonal == _brute_orthogonal(trs)


@settings(max_examples=200, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.data())
def test_step_leaves_outside_untouched(data):
    trs = data.draw(orthogonal_trs())
    t = data.draw(st.one_of(small_terms(trs=trs), small_rational_terms(trs=trs)))
    rs = redexes(trs, t, 4)
    if not rs:
        return
    pos, rule = data.draw(st.sampled_from(rs))
    out = rewrite_step(trs, t, pos, rule)
    for q in positions_to_depth(t, 5):
        if q[:len(pos)] != pos:
            assert symbol_at(out, q) == symbol_at(t, q)
    assert BOT not in out.labels


@settings(max_examples=200, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.data())
def test_redexes_are_monotone(data):
    trs = data.draw(orthogonal_trs())
    t = data.draw(small_terms(trs=trs))
    u = data.draw(small_terms(trs=trs))
    s = glb([t, u])
    assert leq_bot(s, t)
    for n in range(len(s)):
        st_, rule = node_status(trs, s, n)
        if st_ == MATCH:
            for q in positions_to_depth(s, 6):
                if s.node_at(q) == n:
                    assert node_status(trs, t, t.node_at(q))[1] == rule
                    break
