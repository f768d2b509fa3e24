"""Strategies, recorded reductions and limits of reductions.

A run records finitely many steps.  Limits of the omega-continuation are
established by certificates:

* a closed run (normal form, or the strategy has nothing left to do) is its
  own limit;
* a *period*: from index k the run repeats a fixed block of p steps on a
  pattern ``P`` (a generalisation of the term at k) whose variables are
  rewritten by a substitution ``tau`` after every block.  The block's steps
  are replayed symbolically on ``P`` and must not depend on what the pattern
  variables stand for;
* a *shift*: from index k every block of p steps happens below a position
  q, and after each block the subterm at q has grown by a fixed context C
  on top of what it was.  The limit is then ``Q[mu X. C[X]]``;
* runs of the alternating strategy on disjoint slots are certified slot by
  slot.

Anything else is reported from the finite prefix with certificate
``budget-exhausted``.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .term_core import (BOT, GraphBuilder, IrwError, Term, base, bottom, build, format_position,
                        glb, is_prefix, min_depths, node_positions, replace_at,
                        shortest_position, truncate)
from .trs import (DEPENDS, MATCH, NOMATCH, NotARedex, Trs, apply_subst, is_pattern_var,
                  match_nodes, node_status, rewrite_step)

DEFAULT_BUDGET = 1000
DEFAULT_DEPTH = 10
SUSPECT_K = 16
MAX_K = 24
MAX_P = 8

HOLE = "?#h"
TRUNC = "?#t"


class Depends(Exception):
    """A strategy decision would depend on the contents of a pattern variable."""


def status_fn(strat, trs, t: Term, symbolic: bool = False):
    cache = {}

    def status(n):
        r = cache.get(n)
        if r is None:
            if symbolic and is_pattern_var(t.labels[n]):
                r = (NOMATCH, None)
            else:
                r = strat.node_status(trs, t, n, symbolic)
            cache[n] = r
        if r[0] == DEPENDS:
            raise Depends
        return r

    return status


# ---------------------------------------------------------------- strategies

class Strategy:
    kind = ""
    shift_invariant = False
    content_sensitive = True

    def resolve(self, t: Term) -> "Strategy":
        return self

    def initial_cursor(self):
        return None

    def prepare(self, trs, t, cursor):
        return t, cursor

    def post_step(self, trs, t, cursor):
        return t, cursor

    def node_status(self, trs, t, n, three=False):
        return node_status(trs, t, n, three)

    def neutral(self, cursor) -> bool:
        return cursor is None

    def choose(self, trs, t, cursor, status):
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind

    def __repr__(self):
        return f"<strategy {self.describe()}>"


def _shallowest(t, status, start=0):
    seen = {start}
    stack = [start]
    found = []
    while stack:
        n = stack.pop()
        if status(n)[0] == MATCH:
            found.append(n)
        for c in t.kids[n]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    pos = shortest_position(t, found, start)
    if pos is None:
        return None
    n = start
    for i in pos:
        n = t.kids[n][i]
    return pos, status(n)[1]


class Outermost(Strategy):
    """Leftmost redex among the shallowest ones."""

    kind = "outermost"
    shift_invariant = True

    def choose(self, trs, t, cursor, status):
        r = _shallowest(t, status)
        return None if r is None else (r[0], r[1], cursor)


class Innermost(Strategy):
    """Leftmost among the shallowest redexes without a redex strictly below.

    On cyclic terms every redex may have a redex below it; the strategy then
    falls back to the outermost choice.
    """

    kind = "innermost"
    shift_invariant = True

    def choose(self, trs, t, cursor, status):
        red = {n for n in range(len(t)) if status(n)[0] == MATCH}
        if not red:
            return None
        inner = []
        for n in red:
            seen = set()
            stack = list(t.kids[n])
            clean = True
            while stack and clean:
                m = stack.pop()
                if m in seen:
                    continue
                seen.add(m)
                if m in red:
                    clean = False
                stack.extend(t.kids[m])
            if clean:
                inner.append(n)
        pos = shortest_position(t, inner or red)
        return pos, status(t.node_at(pos))[1], cursor


class ParallelOutermost(Strategy):
    """Rounds of outermost redexes, contracted left to right.

    A round is the set of outermost redex positions no deeper than the
    shallowest one plus ``window``; the cursor holds what is left of it.
    """

    kind = "parallel-outermost"
    shift_invariant = True

    def __init__(self, window: int = 8, limit: int = 64):
        self.window = window
        self.limit = limit

    def initial_cursor(self):
        return ()

    def neutral(self, cursor):
        return cursor == ()

    def _round(self, t, status):
        out = []
        frontier = [((), 0)]
        dmin = None
        depth = 0
        while frontier and len(out) < self.limit:
            if dmin is not None and depth > dmin + self.window:
                break
            nxt = []
            for pos, n in frontier:
                if status(n)[0] == MATCH:
                    out.append(pos)
                    if dmin is None:
                        dmin = depth
                else:
                    nxt.extend((pos + (i,), c) for i, c in enumerate(t.kids[n]))
            frontier = nxt
            depth += 1
        return tuple(sorted(out))

    def choose(self, trs, t, cursor, status):
        rest = tuple(cursor or ())
        while True:
            if not rest:
                rest = self._round(t, status)
                if not rest:
                    return None
            pos, rest = rest[0], rest[1:]
            if t.has_position(pos):
                st, rule = status(t.node_at(pos))
                if st == MATCH:
                    return pos, rule, rest


class Alternating(Strategy):
    """Cycle through slot positions, contracting the leftmost-outermost redex
    inside the current slot and skipping slots without one."""

    kind = "alternating"

    def __init__(self, slots=None):
        self.slots = None if slots is None else tuple(tuple(s) for s in slots)

    def resolve(self, t):
        if self.slots is not None:
            return self
        return Alternating([(i,) for i in range(len(t.kids[0]))])

    def initial_cursor(self):
        return 0

    def neutral(self, cursor):
        return False

    def disjoint(self) -> bool:
        ss = self.slots or ()
        return all(not is_prefix(a, b) for a in ss for b in ss if a != b)

    def choose(self, trs, t, cursor, status):
        n = len(self.slots)
        for j in range(n):
            i = (cursor + j) % n
            s = self.slots[i]
            if not t.has_position(s):
                continue
            r = _shallowest(t, status, t.node_at(s))
            if r is not None:
                return s + r[0], r[1], (i + 1) % n
        return None

    def describe(self):
        return "alternating:" + ";".join(".".join(map(str, s)) for s in self.slots or ())


class Script(Strategy):
    """Explicit steps, repeated cyclically.  A rule of None means the first
    rule matching at that position."""

    kind = "script"
    content_sensitive = False

    def __init__(self, steps):
        if not steps:
            raise IrwError("invalid-argument", "empty script")
        self.steps = tuple((tuple(p), r) for p, r in steps)

    def initial_cursor(self):
        return 0

    def neutral(self, cursor):
        return False

    def choose(self, trs, t, cursor, status):
        pos, rname = self.steps[cursor]
        if not t.has_position(pos):
            raise NotARedex(f"script position {format_position(pos)} not in term")
        st, rule = status(t.node_at(pos))
        if rname is not None:
            rule = trs.rule(rname) if isinstance(rname, str) else rname
            stt, _ = match_nodes(rule.lhs, t, t.node_at(pos), three=True)
            if stt == DEPENDS:
                raise Depends
            st = stt
        if st != MATCH:
            raise NotARedex(f"script step at {format_position(pos)} is not a redex")
        return pos, rule, (cursor + 1) % len(self.steps)

    def describe(self):
        return "script:" + ",".join(".".join(map(str, p)) + (f"@{r}" if isinstance(r, str) else "")
                                    for p, r in self.steps)


def strategy_from_spec(spec: str) -> Strategy:
    """Parse ``outermost``, ``innermost``, ``parallel-outermost``,
    ``alternating[:0;1.0]`` or ``script:1,0.1@rule``."""
    name, _, arg = spec.partition(":")
    pos = lambda s: tuple(int(x) for x in s.split(".") if x != "")
    try:
        if name == "outermost":
            return Outermost()
        if name == "innermost":
            return Innermost()
        if name == "parallel-outermost":
            return ParallelOutermost()
        if name == "alternating":
            return Alternating([pos(s) for s in arg.split(";")] if arg else None)
        if name == "script":
            steps = []
            for item in arg.split(","):
                p, _, r = item.partition("@")
                steps.append((pos(p.strip()), r.strip() or None))
            return Script(steps)
    except ValueError:
        pass
    raise IrwError("invalid-strategy", spec)


# ---------------------------------------------------------------- reductions

class Step:
    __slots__ = ("before", "position", "rule", "after", "cursor", "_context")

    def __init__(self, before, position, rule, after, cursor=None):
        self.before = before
        self.position = position
        self.rule = rule
        self.after = after
        self.cursor = cursor
        self._context = None

    @property
    def context(self) -> Term:
        if self._context is None:
            self._context = replace_at(self.before, self.position, bottom())
        return self._context

    @property
    def depth(self) -> int:
        return len(self.position)


@dataclass
class Reduction:
    trs: Trs
    origin: Term
    strategy: Strategy | None
    steps: list = field(default_factory=list)
    cursor: object = None
    cycle: tuple | None = None
    stop_reason: str = "budget"
    strategy_start: int = 0
    _cert: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.steps)

    def term(self, i: int) -> Term:
        return self.origin if i == 0 else self.steps[i - 1].after

    @property
    def final(self) -> Term:
        return self.term(len(self.steps))

    @property
    def terms(self) -> list:
        return [self.origin] + [s.after for s in self.steps]

    def cursor_at(self, i: int):
        return self.steps[i].cursor if i < len(self.steps) else self.cursor

    @property
    def closed(self) -> bool:
        return self.stop_reason in ("normal-form", "strategy-exhausted", "finite")

    def extend(self, budget: int) -> "Reduction":
        if self.stop_reason != "budget" or self.strategy is None:
            return self
        more = _run_from(self.trs, self.final, self.strategy, self.cursor, budget)
        red = Reduction(self.trs, self.origin, self.strategy, self.steps + more.steps, more.cursor,
                        None, more.stop_reason, self.strategy_start)
        if more.cycle is not None:
            red.cycle = (more.cycle[0] + len(self.steps), more.cycle[1])
        return red

    def trace(self) -> list:
        return [{"index": i, "position": list(s.position), "rule": s.rule.name, "depth": s.depth}
                for i, s in enumerate(self.steps)]

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.trace())


def _run_from(trs, t, strat, cursor, budget):
    steps = []
    seen = {(t, cursor): 0}
    stop = "budget"
    cycle = None
    for i in range(budget):
        status = status_fn(strat, trs, t)
        try:
            ch = strat.choose(trs, t, cursor, status)
        except NotARedex as e:
            raise NotARedex(f"step {i}: {e.message}") from None
        if ch is None:
            stop = "strategy-exhausted" if _has_redex(trs, t) else "normal-form"
            break
        pos, rule, cur2 = ch
        after = rewrite_step(trs, t, pos, rule)
        after, cur2 = strat.post_step(trs, after, cur2)
        steps.append(Step(t, pos, rule, after, cursor))
        t, cursor = after, cur2
        key = (t, cursor)
        if key in seen:
            cycle = (seen[key], len(steps) - seen[key])
            stop = "cycle"
            break
        seen[key] = len(steps)
    else:
        status = status_fn(strat, trs, t)
        if strat.choose(trs, t, cursor, status) is None:
            stop = "strategy-exhausted" if _has_redex(trs, t) else "normal-form"
    red = Reduction(trs, steps[0].before if steps else t, strat, steps, cursor, cycle, stop)
    return red


def _has_redex(trs, t):
    return any(node_status(trs, t, n)[0] == MATCH for n in range(len(t)))


def run(trs: Trs, t: Term, strat: Strategy, budget: int = DEFAULT_BUDGET) -> Reduction:
    if budget < 0:
        raise IrwError("invalid-argument", "negative budget")
    strat = strat.resolve(t)
    cursor = strat.initial_cursor()
    t, cursor = strat.prepare(trs, t, cursor)
    red = _run_from(trs, t, strat, cursor, budget)
    red.origin = t
    return red


def record(trs: Trs, t: Term, steps) -> Reduction:
    """A finite reduction from explicit ``(position, rule)`` steps."""
    out = []
    for pos, rule in steps:
        if isinstance(rule, str):
            rule = trs.rule(rule)
        after = rewrite_step(trs, t, tuple(pos), rule)
        out.append(Step(t, tuple(pos), rule, after))
        t = after
    origin = out[0].before if out else t
    return Reduction(trs, origin, None, out, None, None, "finite", len(out))


def run_certified(trs, t, strat, budget: int = DEFAULT_BUDGET, chunk: int = 32) -> Reduction:
    """Run in growing chunks, stopping as soon as the omega-run is certified."""
    red = run(trs, t, strat, min(chunk, budget))
    while red.stop_reason == "budget" and len(red) < budget and certify(red) is None:
        red = red.extend(min(len(red), budget - len(red)))
    return red


# -------------------------------------------------------------- certificates

@dataclass
class Period:
    k: int
    p: int
    pattern: Term
    sigma: dict          # pattern variable -> Term (contents at index k)
    tau: dict            # pattern variable -> Term over pattern variables
    symbolic: list       # P_0 .. P_p
    positions: list      # step positions of the block


@dataclass
class Shift:
    """Growth at disjoint sites: t_{k+jp} = outer[ctx_i^j[w_i]]_i."""
    k: int
    p: int
    sites: tuple         # (q, v, ctx, w) per site; ctx has its hole at v
    outer: Term          # t_k with hole i (label HOLE + str(i)) at site i

    @property
    def q(self):
        return self.sites[0][0]

    @property
    def v(self):
        return self.sites[0][1]

    def limit(self) -> Term:
        g = GraphBuilder()
        o = g.embed(self.outer)
        roots = [g.embed(ctx) for _, _, ctx, _ in self.sites]
        for i, lab in enumerate(self.outer.labels):
            if lab.startswith(HOLE):
                g.labels[o + i] = None
                g.kids[o + i] = [roots[int(lab[len(HOLE):])]]
        for r, (_, _, ctx, _) in zip(roots, self.sites):
            for i, lab in enumerate(ctx.labels):
                if lab == HOLE:
                    g.labels[r + i] = None
                    g.kids[r + i] = [r]
        return g.term(o)


@dataclass
class Slots:
    slots: tuple
    parts: list          # (slot, Reduction)


@dataclass
class Closed:
    pass


def _pattern_match(pat: Term, t: Term, n: int = 0):
    """Bind pattern variables of ``pat`` to nodes of ``t``; None on mismatch."""
    binding = {}
    seen = set()
    stack = [(0, n)]
    while stack:
        a, b = stack.pop()
        if (a, b) in seen:
            continue
        seen.add((a, b))
        la = pat.labels[a]
        if is_pattern_var(la):
            if binding.setdefault(la[1:], b) != b:
                return None
            continue
        if la != t.labels[b] or len(pat.kids[a]) != len(t.kids[b]):
            return None
        stack.extend(zip(pat.kids[a], t.kids[b]))
    return binding


def _unfold_with_vars(t: Term, cuts) -> Term:
    """``t`` with the subterm at every position in ``cuts`` replaced by a
    distinct pattern variable (cuts must be pairwise disjoint)."""
    trie = {}
    for c in cuts:
        node = trie
        for i in c:
            node = node.setdefault(i, {})
        node[None] = True
    g = GraphBuilder()
    count = [0]
    memo = {}

    def go(n, tr):
        if tr is None:
            key = (n, None)
            if key in memo:
                return memo[key]
            r = memo[key] = g.alias(None)
            return r
        if None in tr:
            r = g.node(f"?#{count[0]}")
            count[0] += 1
            return r
        me = g.node(t.labels[n])
        g.kids[me] = [go(c, tr.get(i)) for i, c in enumerate(t.kids[n])]
        return me

    root = go(0, trie)
    # untouched parts: alias into an embedded copy of t
    off = g.embed(t)
    for (n, _), a in memo.items():
        g.kids[a][0] = off + n
    return g.term(root)


def _cut_positions(t: Term, h: int):
    frontier = [((), 0)]
    for d in range(h):
        nxt = []
        for pos, n in frontier:
            nxt.extend((pos + (i,), c) for i, c in enumerate(t.kids[n]))
        frontier = nxt
    return [p for p, _ in frontier]


def _candidates(red: Reduction, k: int):
    t = red.term(k)
    yield t
    st = red.steps[k] if k < len(red.steps) else None
    if st is not None:
        cuts = [st.position + w for ps in st.rule.var_positions.values() for w in ps]
        if cuts:
            yield _unfold_with_vars(t, cuts)
    for h in range(1, 7):
        cuts = _cut_positions(t, h)
        if not cuts:
            break
        if len(cuts) > 64:
            break
        yield _unfold_with_vars(t, cuts)


def _max_pattern_depth(terms) -> int:
    d = 0
    for s in terms:
        ds = min_depths(s)
        for n, lab in enumerate(s.labels):
            if not is_pattern_var(lab) and ds[n] is not None:
                d = max(d, ds[n])
    return d


def _rooted(t: Term, n: int) -> Term:
    return t.sub(n)


def _content_ok(red, strat, trs, tk: Term, sigma_nodes: dict) -> bool:
    status = status_fn(strat, trs, tk)
    seen = set()
    stack = list(sigma_nodes.values())
    while stack:
        m = stack.pop()
        if m in seen:
            continue
        seen.add(m)
        if status(m)[0] != NOMATCH:
            return False
        stack.extend(tk.kids[m])
    return True


def _tau_ok(strat, trs, sigma: dict, tau: dict) -> bool:
    """Every node created by iterating ``tau`` over the contents is inert."""
    names = sorted(tau)
    dtau = _max_pattern_depth(tau.values())
    H = trs.max_height + dtau + 1
    cur = {v: truncate(sigma[v], H, TRUNC) for v in names}
    seen = set()
    for _ in range(64):
        key = tuple(cur[v] for v in names)
        if key in seen:
            return True
        seen.add(key)
        nxt = {}
        for v in names:
            img = tau[v]
            g = GraphBuilder()
            g.embed(img)
            roots = {w: g.embed(cur[w]) for w in names}
            own = []
            for i, lab in enumerate(img.labels):
                if is_pattern_var(lab):
                    g.labels[i] = None
                    g.kids[i] = [roots[lab[1:]]]
                else:
                    own.append(i)
            term, mp = build(g.labels, g.kids, 0, with_map=True)
            status = status_fn(strat, trs, term, symbolic=True)
            try:
                for i in own:
                    if i in mp and status(mp[i])[0] != NOMATCH:
                        return False
            except Depends:
                return False
            nxt[v] = truncate(term, H, TRUNC)
        cur = nxt
    return False


def _try_period(red: Reduction, k: int, p: int, P: Term):
    trs, strat = red.trs, red.strategy
    tk = red.term(k)
    sig_nodes = _pattern_match(P, tk)
    if sig_nodes is None:
        return None
    cursor = red.cursor_at(k)
    cur = P
    syms = [P]
    for j in range(p):
        st = red.steps[k + j]
        try:
            ch = strat.choose(trs, cur, cursor, status_fn(strat, trs, cur, symbolic=True))
        except (Depends, NotARedex):
            return None
        if ch is None or ch[0] != st.position or ch[1] is not st.rule:
            return None
        try:
            nxt = rewrite_step(trs, cur, ch[0], ch[1])
        except NotARedex:
            return None
        cur, cursor = strat.post_step(trs, nxt, ch[2])
        syms.append(cur)
    if cursor != red.cursor_at(k + p):
        return None
    tau_nodes = _pattern_match(P, cur)
    if tau_nodes is None:
        return None
    sigma = {v: tk.sub(n) for v, n in sig_nodes.items()}
    tau = {v: cur.sub(n) for v, n in tau_nodes.items()}
    if strat.content_sensitive and sigma:
        if not _content_ok(red, strat, trs, tk, sig_nodes):
            return None
        if not _tau_ok(strat, trs, sigma, tau):
            return None
    return Period(k, p, P, sigma, tau, syms, [red.steps[k + j].position for j in range(p)])


def _embed_site(tk, tkp, q):
    """(w, W, v) when t_k|q reappears strictly inside t_{k+p}|q."""
    if not (tk.has_position(q) and tkp.has_position(q)):
        return None
    w = tk.sub(tk.node_at(q))
    W = tkp.sub(tkp.node_at(q))
    for n, ps in sorted(node_positions(W, 16).items(), key=lambda kv: (len(kv[1][0]), kv[1][0])):
        if W.sub(n) == w:
            cands = [x for x in ps if x]
            if cands:
                return w, W, min(cands, key=lambda x: (len(x), x))
    return None


def _try_shift(red: Reduction, k: int, p: int):
    strat, trs = red.strategy, red.trs
    if not strat.shift_invariant:
        return None
    if not (strat.neutral(red.cursor_at(k)) and strat.neutral(red.cursor_at(k + p))):
        return None
    poss = [red.steps[k + j].position for j in range(p)]
    common = poss[0]
    for q in poss[1:]:
        i = 0
        while i < min(len(common), len(q)) and common[i] == q[i]:
            i += 1
        common = common[:i]
    tk, tkp = red.term(k), red.term(k + p)
    hole = Term((HOLE,), ((),))
    for L in range(len(common), -1, -1):
        q = common[:L]
        found = _embed_site(tk, tkp, q)
        if found is None:
            continue
        w, W, v = found
        if replace_at(tk, q, W) != tkp:
            continue
        ctx = replace_at(W, v, hole)
        outer = replace_at(tk, q, Term((HOLE + "0",), ((),)))
        if not (_inert(strat, trs, ctx) and _inert(strat, trs, outer)):
            continue
        return Shift(k, p, ((q, v, ctx, w),), outer)
    return _try_multi_shift(red, k, p, poss, tk, tkp)


def _try_multi_shift(red, k, p, poss, tk, tkp):
    """Several independent growth sites, e.g. one per argument."""
    strat, trs = red.strategy, red.trs
    sites = []
    for s in sorted(set(poss), key=lambda x: (len(x), x)):
        if any(is_prefix(q, s) for q, _, _, _ in sites):
            continue
        for L in range(len(s), -1, -1):
            found = _embed_site(tk, tkp, s[:L])
            if found is not None:
                w, W, v = found
                sites.append((s[:L], v, W, w))
                break
        else:
            return None
    if len(sites) < 2:
        return None
    qs = [q for q, _, _, _ in sites]
    if any(is_prefix(a, b) for a in qs for b in qs if a != b):
        return None
    sites.sort(key=lambda x: x[0])
    t, outer = tk, tk
    for q, _, W, _ in sites:
        t = replace_at(t, q, W)
    if t != tkp:
        return None
    hole = Term((HOLE,), ((),))
    out = []
    for i, (q, v, W, w) in enumerate(sites):
        ctx = replace_at(W, v, hole)
        if not _inert(strat, trs, ctx):
            return None
        out.append((q, v, ctx, w))
        outer = replace_at(outer, q, Term((HOLE + str(i),), ((),)))
    if not _frame_inert(strat, trs, outer, out):
        return None
    return Shift(k, p, tuple(out), outer)


def _inert(strat, trs, t: Term) -> bool:
    status = status_fn(strat, trs, t, symbolic=True)
    try:
        return all(status(n)[0] == NOMATCH for n in range(len(t)))
    except Depends:
        return False


def _frame_inert(strat, trs, outer: Term, sites) -> bool:
    """No frame node of ``outer`` is a redex at any stage of a multi-site shift.

    Undecided non-linear matches are settled by comparing the frame below
    both bindings: site contents ctx^j[w] are injective in w, so equal
    contexts with different seeds stay apart forever.
    """
    plain = type(strat).node_status is Strategy.node_status
    for n in range(len(outer)):
        if is_pattern_var(outer.labels[n]):
            continue
        st, _ = strat.node_status(trs, outer, n, True)
        if st == MATCH:
            return False
        if st == DEPENDS:
            if not plain or not all(_never_matches(r.lhs, outer, n, sites) for r in trs.rules):
                return False
    return True


def _never_matches(lhs: Term, t: Term, n: int, sites) -> bool:
    binding = {}
    stack = [(0, n)]
    while stack:
        a, b = stack.pop()
        la, lb = lhs.labels[a], t.labels[b]
        if la[0] == "?":
            binding.setdefault(la[1:], []).append(b)
            continue
        if lb.startswith(HOLE):
            return False
        if base(lb) != la or len(t.kids[b]) != len(lhs.kids[a]):
            return True
        stack.extend(zip(lhs.kids[a], t.kids[b]))
    return any(_frame_eq(t, nodes[0], m, sites) == "never"
               for nodes in binding.values() for m in nodes[1:])


def _frame_eq(t: Term, a: int, b: int, sites) -> str:
    """'always', 'never' or 'unknown' equality of two frame nodes across stages."""
    verdict = "always"
    seen = set()
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x == y or (x, y) in seen:
            continue
        seen.add((x, y))
        lx, ly = t.labels[x], t.labels[y]
        hx, hy = lx.startswith(HOLE), ly.startswith(HOLE)
        if hx and hy:
            i, l = int(lx[len(HOLE):]), int(ly[len(HOLE):])
            if sites[i][2] == sites[l][2] and sites[i][1] == sites[l][1]:
                if sites[i][3] != sites[l][3]:
                    return "never"
            else:
                verdict = "unknown"
        elif hx or hy:
            verdict = "unknown"
        elif lx != ly or len(t.kids[x]) != len(t.kids[y]):
            return "never"
        else:
            stack.extend(zip(t.kids[x], t.kids[y]))
    return verdict


def certify(red: Reduction):
    """Find a certificate for the omega-continuation of ``red`` (or None)."""
    if red._cert is not None:
        return red._cert
    cert = _certify(red)
    red._cert = cert
    return cert


def _certify(red: Reduction):
    if red.closed:
        return Closed()
    if red.strategy is None:
        return None
    s0 = red.strategy_start
    if isinstance(red.strategy, Alternating) and red.strategy.disjoint() and s0 == 0 and red.strategy.slots:
        parts = []
        for s in red.strategy.slots:
            if not red.origin.has_position(s):
                continue
            used = sum(1 for st in red.steps if is_prefix(s, st.position))
            sub = run_certified(red.trs, red.origin.sub(red.origin.node_at(s)), Outermost(),
                                max(used, 1) + 2 * MAX_K)
            if certify(sub) is None:
                return None
            parts.append((s, sub))
        return Slots(red.strategy.slots, parts)
    if red.cycle is not None:
        k, p = red.cycle
        c = _try_period(red, k, p, red.term(k))
        if c is not None:
            return c
    n = len(red.steps)
    for e in range(s0 + 1, min(n, MAX_K + MAX_P) + 1):
        for p in range(1, min(MAX_P, e - s0) + 1):
            k = e - p
            if k > MAX_K:
                continue
            for P in _candidates(red, k):
                c = _try_period(red, k, p, P)
                if c is not None:
                    return c
            c = _try_shift(red, k, p)
            if c is not None:
                return c
    return None


# ------------------------------------------------------------------- limits

@dataclass
class LimitOutcome:
    mode: str
    limit: Term | None
    converges: bool | None
    certificate: str
    depth: int
    volatile: list = field(default_factory=list)   # (position, verdict, outermost)
    destructive: bool = False

    def to_json(self) -> dict:
        from .term_core import render
        return {
            "mode": self.mode,
            "limit": None if self.limit is None else render(self.limit),
            "converges": self.converges,
            "certificate": self.certificate,
            "depth": self.depth,
            "volatile": [{"position": list(p), "verdict": v, "outermost": o} for p, v, o in self.volatile],
            "destructive": self.destructive,
        }


def _outermost_flags(positions):
    ps = sorted(set(positions), key=lambda x: (len(x), x))
    return [(p, not any(q != p and is_prefix(q, p) for q in ps)) for p in ps]


def _bot_at(t: Term, positions) -> Term:
    for p in sorted(positions):
        if t.has_position(p):
            t = replace_at(t, p, bottom())
    return t


def _subst(m: dict, t: Term) -> Term:
    return apply_subst(m, t)


def _period_components(c: Period) -> list:
    """Limits of the subsequences t_{k + (M n + r) p + j}."""
    names = sorted(c.tau)
    for M in range(1, 4 * len(names) + 3):
        rho = {v: Term((f"?{v}",), ((),)) for v in names}
        for _ in range(M):
            rho = {v: _subst(c.tau, rho[v]) for v in names}
        ok = all(rho[v] == Term((f"?{v}",), ((),)) or not is_pattern_var(rho[v].labels[0]) for v in names)
        if ok:
            break
    else:
        return None
    # solve X_v = rho(v) for guarded v; identity variables keep their content
    g = GraphBuilder()
    root = {}
    for v in names:
        if rho[v].labels[0] == f"?{v}":
            root[v] = g.embed(c.sigma[v])
        else:
            root[v] = g.alias(None)
    for v in names:
        if rho[v].labels[0] == f"?{v}":
            continue
        off = g.embed(rho[v])
        for i, lab in enumerate(rho[v].labels):
            if is_pattern_var(lab):
                g.labels[off + i] = None
                g.kids[off + i] = [root[lab[1:]]]
        g.kids[root[v]][0] = off
    sol = {v: g.term(root[v]) for v in names}
    comps = []
    step = {v: Term((f"?{v}",), ((),)) for v in names}
    for r in range(M):
        for j in range(c.p):
            comps.append(_subst(sol, _subst(step, c.symbolic[j])))
        step = {v: _subst(c.tau, step[v]) for v in names}
    return comps


def _limit_from_cert(red, cert, mode, D):
    """(limit, converges, volatile) from a certificate, or None."""
    if isinstance(cert, Closed):
        return red.final, True, []
    if isinstance(cert, Shift):
        return cert.limit(), True, []
    if isinstance(cert, Period):
        tk = red.term(cert.k)
        vol = [(p, "certified", o) for p, o in _outermost_flags(cert.positions)]
        if mode == "strong-p":
            return _bot_at(tk, [p for p, _, o in vol if o]), True, vol
        if mode == "strong-m":
            return None, False, []
        comps = _period_components(cert)
        if comps is None:
            return None
        if mode == "weak-p":
            return glb(comps), True, vol
        same = all(x == comps[0] for x in comps)
        return (comps[0] if same else None), same, vol
    if isinstance(cert, Slots):
        t = red.origin
        vol = []
        conv = True
        pieces = []
        for s, sub in cert.parts:
            r = _limit_from_cert(sub, certify(sub), mode, D)
            if r is None:
                return None
            lim, cv, v = r
            conv = conv and cv
            pieces.append((s, lim))
            vol.extend((s + p, verdict, o) for p, verdict, o in v)
        if not conv:
            return None, False, vol if mode != "strong-m" else []
        for s, lim in pieces:
            t = replace_at(t, s, lim)
        return t, True, vol
    return None


def _limit(red: Reduction, mode: str, D: int) -> LimitOutcome:
    cert = certify(red)
    if cert is not None:
        r = _limit_from_cert(red, cert, mode, D)
        if r is not None:
            lim, conv, vol = r
            if mode == "strong-m":
                vol = []
            destructive = any(p == () for p, _, _ in vol)
            return LimitOutcome(mode, lim, conv, "exact-rational", D, vol, destructive)
    return _uncertified(red, mode, D)


def _uncertified(red: Reduction, mode: str, D: int) -> LimitOutcome:
    n = len(red.steps)
    half = red.steps[n // 2:]
    vol = [(p, "suspected", o) for p, o in _outermost_flags(suspected_positions(red))]
    tN = red.final
    if mode == "strong-p":
        lim = truncate(_bot_at(tN, [s.position for s in half if not any(
            is_prefix(o.position, s.position) and o.position != s.position for o in half)]), D)
        return LimitOutcome(mode, lim, None, "budget-exhausted", D, vol, False)
    if mode == "weak-p":
        terms = red.terms[n // 2:]
        return LimitOutcome(mode, truncate(glb(terms), D), None, "budget-exhausted", D, vol, False)
    terms = [truncate(x, D) for x in red.terms[n // 2:]]
    if mode == "weak-m":
        same = all(x == terms[-1] for x in terms)
        return LimitOutcome(mode, terms[-1] if same else None, None, "budget-exhausted", D, vol, False)
    deep = all(s.depth > D for s in half)
    return LimitOutcome(mode, terms[-1] if deep else None, None, "budget-exhausted", D, [], False)


def strong_p_limit(red: Reduction, D: int = DEFAULT_DEPTH) -> LimitOutcome:
    return _limit(red, "strong-p", D)


def weak_p_limit(red: Reduction, D: int = DEFAULT_DEPTH) -> LimitOutcome:
    return _limit(red, "weak-p", D)


def strong_m_limit(red: Reduction, D: int = DEFAULT_DEPTH) -> LimitOutcome:
    return _limit(red, "strong-m", D)


def weak_m_limit(red: Reduction, D: int = DEFAULT_DEPTH) -> LimitOutcome:
    return _limit(red, "weak-m", D)


def limit(red: Reduction, mode: str, D: int = DEFAULT_DEPTH) -> LimitOutcome:
    if mode not in ("strong-p", "weak-p", "strong-m", "weak-m"):
        raise IrwError("invalid-argument", f"unknown mode {mode}")
    return _limit(red, mode, D)


def suspected_positions(red: Reduction, K: int = SUSPECT_K) -> list:
    n = len(red.steps)
    counts = Counter(s.position for s in red.steps)
    last = {s.position: i for i, s in enumerate(red.steps)}
    return [p for p, c in counts.items() if c >= K and last[p] >= n // 2]


def detect_volatile(red: Reduction, K: int = SUSPECT_K) -> list:
    """(position, verdict, outermost) triples."""
    cert = certify(red)
    if cert is not None:
        r = _limit_from_cert(red, cert, "strong-p", 0)
        if r is not None:
            return r[2]
    return [(p, "suspected", o) for p, o in _outermost_flags(suspected_positions(red, K))]


def is_destructive(red: Reduction):
    for p, verdict, _ in detect_volatile(red):
        if p == ():
            return verdict == "certified", verdict
    return False, "certified" if certify(red) is not None else "none"


# ------------------------------------------------------------ rational folds

def fold_rational(truncs):
    """Guess a rational term whose d-th truncation is ``truncs[d]`` for every
    d, or None.  ``truncs[0]`` must be bottom."""
    ts = list(truncs)
    if not ts or ts[0] != bottom():
        return None
    m = len(ts) - 1
    for d in range(m):
        if truncate(ts[d + 1], d) != ts[d]:
            return None
    if m >= 1 and ts[m] == ts[m - 1]:
        return ts[m]
    T = ts[m]
    if m < 2:
        return None
    # depth-first over positions of T; link back to an ancestor when the
    # remaining data agrees and the loop has been witnessed at least once
    g = GraphBuilder()
    ok = [True]

    def agree(a, b, budget):
        # compare T|a and T|b down to ``budget`` levels
        stack = [(a, b, 0)]
        while stack:
            x, y, d = stack.pop()
            if d >= budget:
                continue
            if T.labels[x] != T.labels[y] or len(T.kids[x]) != len(T.kids[y]):
                return False
            stack.extend((cx, cy, d + 1) for cx, cy in zip(T.kids[x], T.kids[y]))
        return True

    def go(n, depth, anc):
        if depth >= m:
            ok[0] = False
            return g.node(BOT)
        if T.labels[n] == BOT:
            return g.node(BOT)
        for an, ad, gid in reversed(anc):
            span = depth - ad
            if span >= 1 and span <= m - depth and agree(an, n, m - depth):
                return gid
        me = g.node(T.labels[n])
        kids = [go(c, depth + 1, anc + [(n, depth, me)]) for c in T.kids[n]]
        g.kids[me] = kids
        return me

    root = go(0, 0, [])
    if not ok[0]:
        return None
    cand = g.term(root)
    for d in range(m + 1):
        if truncate(cand, d) != ts[d]:
            return None
    return cand


def limits_json(outcomes) -> str:
    return json.dumps([o.to_json() for o in outcomes])
