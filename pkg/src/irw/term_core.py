"""Partial terms as canonical rational term graphs.

A term is a finite rooted graph whose nodes carry a label (function symbol,
variable or bottom) and an ordered list of children.  Cycles encode infinite
regular terms.  Every ``Term`` is kept minimal (no two bisimilar nodes) and
numbered breadth-first from the root, so structural equality of the two
tuples is equality of the denoted terms.
"""
from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

BOT = "_|_"
INF = math.inf

Position = tuple  # tuple[int, ...]


class IrwError(Exception):
    """Base error; ``code`` is stable and machine readable."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message


class PositionError(IrwError):
    def __init__(self, pos):
        super().__init__("position-out-of-domain", format_position(pos))
        self.position = pos


class NoUpperBound(IrwError):
    def __init__(self, message=""):
        super().__init__("no-upper-bound", message)


class ParseError(IrwError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("parse-error", f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class Symbol(NamedTuple):
    name: str
    arity: int


class Signature:
    def __init__(self, symbols: Iterable[Symbol | tuple] = ()):
        self._arity: dict[str, int] = {}
        for name, arity in symbols:
            if name == BOT:
                raise IrwError("invalid-signature", "bottom is reserved")
            if arity < 0:
                raise IrwError("invalid-signature", f"negative arity for {name}")
            if self._arity.get(name, arity) != arity:
                raise IrwError("invalid-signature", f"{name} declared twice")
            self._arity[name] = arity

    def __contains__(self, name):
        return name in self._arity

    def arity(self, name: str) -> int:
        return self._arity[name]

    @property
    def symbols(self) -> tuple[Symbol, ...]:
        return tuple(Symbol(n, a) for n, a in self._arity.items())

    def extended(self) -> tuple[Symbol, ...]:
        return self.symbols + (Symbol(BOT, 0),)

    def __eq__(self, other):
        return isinstance(other, Signature) and self._arity == other._arity

    def __hash__(self):
        return hash(frozenset(self._arity.items()))

    def __repr__(self):
        return "Signature(" + " ".join(f"{n}/{a}" for n, a in self._arity.items()) + ")"


# Labels are plain strings.  Variables carry a leading "?", marked symbols
# (labelled terms) carry a "'" followed by mark letters.

def is_var(label) -> bool:
    return label[0] == "?"


def is_bot(label) -> bool:
    return label == BOT


def is_symbol(label) -> bool:
    return label != BOT and label[0] != "?"


def base(label: str) -> str:
    i = label.find("'")
    return label if i < 0 else label[:i]


def marks(label: str) -> str:
    i = label.find("'")
    return "" if i < 0 else label[i + 1:]


def with_marks(label: str, ms: str) -> str:
    b = base(label)
    ms = "".join(sorted(set(ms)))
    return b + "'" + ms if ms else b


def var(name: str) -> str:
    return "?" + name


class Term:
    """Canonical rational partial term; construct through ``build``."""

    __slots__ = ("labels", "kids", "_hash")

    def __init__(self, labels: tuple, kids: tuple):
        self.labels = labels
        self.kids = kids
        self._hash = None

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        return self.labels == other.labels and self.kids == other.kids

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.labels, self.kids))
        return self._hash

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        return f"Term({render(self)!r})"

    def __str__(self):
        return render(self)

    @property
    def root_label(self) -> str:
        return self.labels[0]

    def label(self, n: int) -> str:
        return self.labels[n]

    def children(self, n: int) -> tuple:
        return self.kids[n]

    def node_at(self, pos: Sequence[int]) -> int:
        n = 0
        for i in pos:
            ks = self.kids[n]
            if not 0 <= i < len(ks):
                raise PositionError(tuple(pos))
            n = ks[i]
        return n

    def has_position(self, pos: Sequence[int]) -> bool:
        n = 0
        for i in pos:
            ks = self.kids[n]
            if not 0 <= i < len(ks):
                return False
            n = ks[i]
        return True

    def sub(self, n: int) -> "Term":
        """The subterm rooted at node ``n`` (already minimal, just renumbered)."""
        if n == 0:
            return self
        return _renumber(self.labels, self.kids, n)

    def is_finite(self) -> bool:
        return not _has_cycle(self.kids)

    def is_total(self) -> bool:
        return BOT not in self.labels

    def variables(self) -> set[str]:
        return {l[1:] for l in self.labels if l[0] == "?"}


def _renumber(labels, kids, root) -> Term:
    ids = {root: 0}
    order = [root]
    i = 0
    while i < len(order):
        for c in kids[order[i]]:
            if c not in ids:
                ids[c] = len(order)
                order.append(c)
        i += 1
    return Term(tuple(labels[n] for n in order),
                tuple(tuple(ids[c] for c in kids[n]) for n in order))


def _has_cycle(kids) -> bool:
    color = [0] * len(kids)
    for s in range(len(kids)):
        if color[s]:
            continue
        stack = [(s, 0)]
        color[s] = 1
        while stack:
            n, i = stack[-1]
            if i < len(kids[n]):
                stack[-1] = (n, i + 1)
                c = kids[n][i]
                if color[c] == 1:
                    return True
                if color[c] == 0:
                    color[c] = 1
                    stack.append((c, 0))
            else:
                color[n] = 2
                stack.pop()
    return False


def _sccs(nodes, kids):
    """Iterative Tarjan; yields SCCs children-first."""
    index = {}
    low = {}
    on = set()
    st = []
    out = []
    counter = 0
    for s in nodes:
        if s in index:
            continue
        work = [(s, 0)]
        index[s] = low[s] = counter
        counter += 1
        st.append(s)
        on.add(s)
        while work:
            n, i = work[-1]
            ks = kids[n]
            if i < len(ks):
                work[-1] = (n, i + 1)
                c = ks[i]
                if c not in index:
                    index[c] = low[c] = counter
                    counter += 1
                    st.append(c)
                    on.add(c)
                    work.append((c, 0))
                elif c in on:
                    low[n] = min(low[n], index[c])
            else:
                work.pop()
                if work:
                    p = work[-1][0]
                    low[p] = min(low[p], low[n])
                if low[n] == index[n]:
                    comp = []
                    while True:
                        m = st.pop()
                        on.discard(m)
                        comp.append(m)
                        if m == n:
                            break
                    out.append(comp)
    return out


def build(labels: Sequence, kids: Sequence[Sequence[int]], root: int = 0, with_map: bool = False):
    """Canonicalize an arbitrary term graph.

    A label of ``None`` marks an indirection node with exactly one child;
    cycles made only of indirections denote bottom.  With ``with_map`` the
    result is ``(term, mapping)`` where mapping sends every input node
    reachable from ``root`` to its node in the term.
    """
    n_all = len(labels)
    # resolve indirections
    target = list(range(n_all))
    state = [0] * n_all
    bot_node = None
    for s in range(n_all):
        if labels[s] is not None or state[s] == 2:
            continue
        chain = []
        m = s
        while labels[m] is None and state[m] == 0:
            state[m] = 1
            chain.append(m)
            m = kids[m][0]
        if labels[m] is None and state[m] == 1:
            res = -1  # indirection cycle
        elif labels[m] is None:
            res = target[m]
        else:
            res = m
        for c in chain:
            target[c] = res
            state[c] = 2
    labels = list(labels)
    if -1 in target:
        bot_node = len(labels)
        labels.append(BOT)
        kids = list(kids) + [()]
        target.append(bot_node)
        target = [bot_node if x == -1 else x for x in target]

    def tgt(c):
        return target[c]

    root = tgt(root)
    # reachable subgraph with resolved children
    rk = {}
    order = [root]
    rk[root] = None
    i = 0
    while i < len(order):
        n = order[i]
        ks = tuple(tgt(c) for c in kids[n])
        rk[n] = ks
        for c in ks:
            if c not in rk:
                rk[c] = None
                order.append(c)
        i += 1
    for n in order:
        lab = labels[n]
        if lab is None:
            raise IrwError("internal", "unresolved indirection")

    comps = _sccs(order, rk)
    cls: dict[int, tuple] = {}
    finite_tab: dict[tuple, tuple] = {}
    infinite: list[int] = []
    for comp in comps:
        n0 = comp[0]
        cyclic = len(comp) > 1 or n0 in rk[n0]
        if not cyclic and all(cls.get(c, ("I",))[0] == "F" for c in rk[n0]):
            key = (labels[n0], tuple(cls[c] for c in rk[n0]))
            c = finite_tab.get(key)
            if c is None:
                c = ("F", len(finite_tab))
                finite_tab[key] = c
            cls[n0] = c
        else:
            for m in comp:
                cls[m] = ("I",)
                infinite.append(m)
    if infinite:
        inf_set = set(infinite)

        def kid_key(c, blk):
            return ("I", blk[c]) if c in inf_set else cls[c]

        blk = {}
        tab = {}
        for m in infinite:
            key = (labels[m], len(rk[m]), tuple(cls[c] if c not in inf_set else None for c in rk[m]))
            blk[m] = tab.setdefault(key, len(tab))
        count = len(tab)
        while True:
            tab = {}
            nb = {}
            for m in infinite:
                key = (blk[m], tuple(kid_key(c, blk) for c in rk[m]))
                nb[m] = tab.setdefault(key, len(tab))
            blk = nb
            if len(tab) == count:
                break
            count = len(tab)
        for m in infinite:
            cls[m] = ("I", blk[m])
    # quotient numbered breadth-first
    rep = {}
    for n in order:
        rep.setdefault(cls[n], n)
    ids = {cls[root]: 0}
    q = [cls[root]]
    i = 0
    out_l = []
    out_k = []
    while i < len(q):
        c = q[i]
        n = rep[c]
        out_l.append(labels[n])
        ks = []
        for k in rk[n]:
            kc = cls[k]
            j = ids.get(kc)
            if j is None:
                j = ids[kc] = len(q)
                q.append(kc)
            ks.append(j)
        out_k.append(tuple(ks))
        i += 1
    t = Term(tuple(out_l), tuple(out_k))
    if not with_map:
        return t
    mapping = {n: ids[cls[target[n]]] for n in range(n_all) if target[n] in rk}
    return t, mapping


def canonicalize(t, kids=None, root: int = 0) -> Term:
    """Minimal breadth-first numbered graph; accepts a Term or raw labels/kids."""
    if isinstance(t, Term):
        return build(t.labels, t.kids, 0)
    return build(t, kids, root)


class GraphBuilder:
    """Mutable scratch graph used to assemble terms before canonicalization."""

    def __init__(self):
        self.labels: list = []
        self.kids: list = []

    def node(self, label, kids=()) -> int:
        self.labels.append(label)
        self.kids.append(list(kids))
        return len(self.labels) - 1

    def alias(self, to: int | None = None) -> int:
        self.labels.append(None)
        self.kids.append([to])
        return len(self.labels) - 1

    def embed(self, t: Term) -> int:
        off = len(self.labels)
        self.labels.extend(t.labels)
        self.kids.extend([[c + off for c in ks] for ks in t.kids])
        return off

    def term(self, root: int) -> Term:
        return build(self.labels, self.kids, root)


def mk(label: str, *args: Term) -> Term:
    g = GraphBuilder()
    roots = [g.embed(a) for a in args]
    return g.term(g.node(label, roots))


def bottom() -> Term:
    return Term((BOT,), ((),))


# ---------------------------------------------------------------- positions

def format_position(pos) -> str:
    return "<" + ",".join(str(i) for i in pos) + ">"


def positions_to_depth(t: Term, d: int) -> set:
    if d < 0:
        raise IrwError("invalid-argument", "negative depth")
    out = set()
    frontier = [((), 0)]
    for depth in range(d + 1):
        nxt = []
        for pos, n in frontier:
            out.add(pos)
            if depth < d:
                for i, c in enumerate(t.kids[n]):
                    nxt.append((pos + (i,), c))
        frontier = nxt
    return out


def symbol_at(t: Term, pos) -> str:
    return t.labels[t.node_at(pos)]


def subterm_at(t: Term, pos) -> Term:
    return t.sub(t.node_at(pos))


def replace_at(t: Term, pos, s: Term) -> Term:
    """``t[s]_pos``; the spine above ``pos`` is unrolled first."""
    pos = tuple(pos)
    t.node_at(pos)
    if not pos:
        return s
    g = GraphBuilder()
    g.embed(t)
    s_root = g.embed(s)
    n = 0
    prev = None
    for depth, i in enumerate(pos):
        copy = g.node(t.labels[n], t.kids[n])
        if prev is not None:
            g.kids[prev][pos[depth - 1]] = copy
        else:
            root = copy
        prev = copy
        n = t.kids[n][i]
    g.kids[prev][pos[-1]] = s_root
    return g.term(root)


def node_positions(t: Term, depth: int) -> dict:
    """Map node -> positions of that node with length <= depth."""
    out: dict[int, list] = {}
    frontier = [((), 0)]
    for d in range(depth + 1):
        nxt = []
        for pos, n in frontier:
            out.setdefault(n, []).append(pos)
            if d < depth:
                for i, c in enumerate(t.kids[n]):
                    nxt.append((pos + (i,), c))
        frontier = nxt
    return out


def min_depths(t: Term) -> list:
    depth = [None] * len(t)
    depth[0] = 0
    q = deque([0])
    while q:
        n = q.popleft()
        for c in t.kids[n]:
            if depth[c] is None:
                depth[c] = depth[n] + 1
                q.append(c)
    return depth


def shortest_position(t: Term, targets, start: int = 0) -> tuple | None:
    """Shortest, then leftmost, position (relative to ``start``) whose node
    lies in ``targets``."""
    targets = set(targets)
    if not targets:
        return None
    # distance to a target, computed on the reversed graph
    parents: list[list[int]] = [[] for _ in t.labels]
    for n, ks in enumerate(t.kids):
        for c in ks:
            parents[c].append(n)
    dist = [None] * len(t)
    q = deque()
    for n in targets:
        dist[n] = 0
        q.append(n)
    while q:
        n = q.popleft()
        for p in parents[n]:
            if dist[p] is None:
                dist[p] = dist[n] + 1
                q.append(p)
    if dist[start] is None:
        return None
    pos = []
    n = start
    while dist[n] > 0:
        for i, c in enumerate(t.kids[n]):
            if dist[c] is not None and dist[c] == dist[n] - 1:
                pos.append(i)
                n = c
                break
    return tuple(pos)


def is_prefix(p, q) -> bool:
    return len(p) <= len(q) and tuple(q[:len(p)]) == tuple(p)


# ---------------------------------------------------------- metric and order

def truncate(t: Term, d, filler: str = BOT) -> Term:
    if d is None or d == INF:
        return t
    d = int(d)
    if d <= 0:
        return Term((filler,), ((),))
    # one copy of node n per remaining depth k, built bottom-up
    order = [(0, d)]
    seen = {(0, d)}
    i = 0
    while i < len(order):
        n, k = order[i]
        if k > 1:
            for c in t.kids[n]:
                if (c, k - 1) not in seen:
                    seen.add((c, k - 1))
                    order.append((c, k - 1))
        i += 1
    g = GraphBuilder()
    bot = g.node(filler)
    memo = {}
    for n, k in reversed(order):
        ks = [memo[(c, k - 1)] if k > 1 else bot for c in t.kids[n]]
        memo[(n, k)] = g.node(t.labels[n], ks)
    return g.term(memo[(0, d)])


def similarity(s: Term, t: Term):
    seen = {(0, 0)}
    frontier = [(0, 0)]
    depth = 0
    while frontier:
        nxt = []
        for a, b in frontier:
            if s.labels[a] != t.labels[b] or len(s.kids[a]) != len(t.kids[b]):
                return depth
            for ca, cb in zip(s.kids[a], t.kids[b]):
                if (ca, cb) not in seen:
                    seen.add((ca, cb))
                    nxt.append((ca, cb))
        frontier = nxt
        depth += 1
    return INF


def distance(s: Term, t: Term) -> Fraction:
    k = similarity(s, t)
    return Fraction(0) if k == INF else Fraction(1, 2 ** k)


def bot_depth(t: Term):
    ds = min_depths(t)
    found = [ds[n] for n, l in enumerate(t.labels) if l == BOT]
    return min(found) if found else INF


def leq_bot(s: Term, t: Term) -> bool:
    seen = {(0, 0)}
    stack = [(0, 0)]
    while stack:
        a, b = stack.pop()
        if s.labels[a] == BOT:
            continue
        if s.labels[a] != t.labels[b] or len(s.kids[a]) != len(t.kids[b]):
            return False
        for ca, cb in zip(s.kids[a], t.kids[b]):
            if (ca, cb) not in seen:
                seen.add((ca, cb))
                stack.append((ca, cb))
    return True


def glb(terms: Iterable[Term]) -> Term:
    ts = list(terms)
    if not ts:
        raise IrwError("invalid-argument", "glb of an empty set")
    if len(ts) == 1:
        return ts[0]
    g = GraphBuilder()
    ids = {}
    start = tuple(0 for _ in ts)
    ids[start] = g.node(None)
    work = [start]
    while work:
        st = work.pop()
        me = ids[st]
        labs = {t.labels[n] for t, n in zip(ts, st)}
        arities = {len(t.kids[n]) for t, n in zip(ts, st)}
        if len(labs) == 1 and len(arities) == 1:
            g.labels[me] = labs.pop()
            ks = []
            for i in range(arities.pop()):
                c = tuple(t.kids[n][i] for t, n in zip(ts, st))
                if c not in ids:
                    ids[c] = g.node(None)
                    work.append(c)
                ks.append(ids[c])
            g.kids[me] = ks
        else:
            g.labels[me] = BOT
            g.kids[me] = []
    return g.term(ids[start])


def lub(terms: Iterable[Term]) -> Term:
    ts = list(terms)
    if not ts:
        raise IrwError("invalid-argument", "lub of an empty set")
    g = GraphBuilder()
    ids = {}

    def key(pairs):
        return tuple(sorted(p for p in pairs if ts[p[0]].labels[p[1]] != BOT))

    start = key((i, 0) for i in range(len(ts)))
    ids[start] = g.node(None)
    work = [start]
    while work:
        st = work.pop()
        me = ids[st]
        if not st:
            g.labels[me] = BOT
            g.kids[me] = []
            continue
        labs = {ts[i].labels[n] for i, n in st}
        arities = {len(ts[i].kids[n]) for i, n in st}
        if len(labs) > 1 or len(arities) > 1:
            raise NoUpperBound("clash between " + " and ".join(sorted(labs)))
        g.labels[me] = labs.pop()
        ks = []
        for j in range(arities.pop()):
            c = key((i, ts[i].kids[n][j]) for i, n in st)
            if c not in ids:
                ids[c] = g.node(None)
                work.append(c)
            ks.append(ids[c])
        g.kids[me] = ks
    return g.term(ids[start])


@dataclass(frozen=True)
class TermSequence:
    """A finite sequence, or an omega-sequence ``prefix + tail + tail + ...``."""

    prefix: tuple = ()
    tail: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        if self.tail is not None:
            object.__setattr__(self, "tail", tuple(self.tail))
            if not self.tail:
                raise IrwError("invalid-argument", "periodic tail must be non-empty")
        if not self.prefix and not self.tail:
            raise IrwError("invalid-argument", "empty sequence")

    @property
    def is_open(self) -> bool:
        return self.tail is not None

    def drop(self, n: int) -> "TermSequence":
        """Suffix starting at index ``n`` (omega-sequences only shift)."""
        if self.tail is None:
            return TermSequence(self.prefix[n:], None)
        if n <= len(self.prefix):
            return TermSequence(self.prefix[n:], self.tail)
        k = (n - len(self.prefix)) % len(self.tail)
        return TermSequence((), self.tail[k:] + self.tail[:k])

    def item(self, i: int) -> Term:
        if i < len(self.prefix):
            return self.prefix[i]
        if self.tail is None:
            raise IndexError(i)
        return self.tail[(i - len(self.prefix)) % len(self.tail)]


def liminf(seq: TermSequence) -> Term:
    if seq.tail is None:
        return seq.prefix[-1]
    tail = list(seq.tail)
    chain = [glb(list(seq.prefix[n:]) + tail) for n in range(len(seq.prefix) + 1)]
    return lub(chain)


def metric_limit(seq: TermSequence) -> Term | None:
    """Metric limit, or None when the sequence diverges."""
    if seq.tail is None:
        return seq.prefix[-1]
    first = seq.tail[0]
    if any(t != first for t in seq.tail):
        return None
    assert liminf(seq) == first
    return first


# ------------------------------------------------------------------- syntax

_TOKEN = re.compile(r"\s*(?:(_\|_|⊥)|(mu\b|μ)|(let\b)|(in\b)|(and\b)|([A-Za-z0-9_]+)|(->|[(),.=:/{}@]))")

_DEFAULT_VAR = re.compile(r"[u-z][0-9]*$")


class Tokens:
    def __init__(self, text: str, line: int = 1, col0: int = 1):
        self.items = []
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(text, i)
            if not m or m.end() == i:
                raise ParseError(f"unexpected character {text[i]!r}", line, col0 + i)
            start = m.start(m.lastindex)
            kind = ("bot", "mu", "let", "in", "and", "ident", "punct")[m.lastindex - 1]
            self.items.append((kind, m.group(m.lastindex), line, col0 + start))
            i = m.end()
        self.i = 0
        self.line = line
        self.end_col = col0 + len(text)

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else ("eof", "", self.line, self.end_col)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.next()
        if tok[1] != value or tok[0] == "eof":
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2], tok[3])
        return tok

    def at_end(self):
        return self.i >= len(self.items)


def _parse_ast(tk: Tokens):
    kind, val, line, col = tk.next()
    if kind == "bot":
        return ("bot", line, col)
    if kind == "mu":
        name = tk.next()
        if name[0] != "ident":
            raise ParseError("expected a variable after mu", name[2], name[3])
        tk.expect(".")
        return ("mu", name[1], _parse_ast(tk), line, col)
    if kind == "let":
        binds = []
        while True:
            name = tk.next()
            if name[0] != "ident":
                raise ParseError("expected a name in let", name[2], name[3])
            tk.expect("=")
            binds.append((name[1], _parse_ast(tk)))
            if tk.peek()[0] == "and":
                tk.next()
                continue
            break
        nxt = tk.next()
        if nxt[0] != "in":
            raise ParseError("expected 'in'", nxt[2], nxt[3])
        return ("let", binds, _parse_ast(tk), line, col)
    if kind == "ident":
        args = []
        if tk.peek()[1] == "(":
            tk.next()
            args.append(_parse_ast(tk))
            while tk.peek()[1] == ",":
                tk.next()
                args.append(_parse_ast(tk))
            tk.expect(")")
        return ("app", val, args, line, col)
    raise ParseError(f"unexpected {val or 'end of input'!r}", line, col)


def _ast_to_graph(ast, signature: Signature | None, variables, g: GraphBuilder) -> int:
    def go(a, env):
        tag = a[0]
        if tag == "bot":
            return g.node(BOT)
        if tag == "mu":
            ph = g.alias(None)
            body = go(a[2], {**env, a[1]: ph})
            g.kids[ph][0] = body
            return ph
        if tag == "let":
            env2 = dict(env)
            phs = []
            for name, _ in a[1]:
                ph = g.alias(None)
                env2[name] = ph
                phs.append(ph)
            for ph, (_, body) in zip(phs, a[1]):
                g.kids[ph][0] = go(body, env2)
            return go(a[2], env2)
        _, name, args, line, col = a
        if not args and name in env:
            return env[name]
        if signature is not None:
            if name in signature:
                if signature.arity(name) != len(args):
                    raise ParseError(f"{name} expects {signature.arity(name)} arguments, got {len(args)}", line, col)
                return g.node(name, [go(x, env) for x in args])
            if args:
                raise ParseError(f"undeclared symbol {name}", line, col)
            if variables is not None and name not in variables:
                raise ParseError(f"unknown name {name}", line, col)
            return g.node(var(name))
        if args:
            return g.node(name, [go(x, env) for x in args])
        is_v = name in variables if variables is not None else bool(_DEFAULT_VAR.match(name))
        return g.node(var(name) if is_v else name)

    return go(ast, {})


def parse_term(text: str, signature: Signature | None = None, variables=None,
               line: int = 1, col: int = 1) -> Term:
    """Parse ``f(x, g(a))``, ``mu x. f(x)`` or ``let t = g(f(t)) in t``.

    With a signature, undeclared nullary names are variables.  Without one,
    names in ``variables`` (default: single letters u..z with optional digits)
    are variables and every other name is a function symbol.
    """
    tk = Tokens(text, line, col)
    ast = _parse_ast(tk)
    if not tk.at_end():
        kind, val, ln, cl = tk.peek()
        raise ParseError(f"trailing input {val!r}", ln, cl)
    g = GraphBuilder()
    root = _ast_to_graph(ast, signature, variables, g)
    return g.term(root)


def _label_text(label: str) -> str:
    return label[1:] if label[0] == "?" else label


_BINDER_NAMES = ("x", "y", "z", "w", "v", "u")


def render(t: Term) -> str:
    """Mu-notation; cycles fold at their first (lowest) back-edge."""
    # pass 1: unfold along paths, recording back-references
    occ_node = []
    occ_kids = []
    occ_ref = []
    bound = set()

    def new(n, ref=None):
        occ_node.append(n)
        occ_kids.append(None)
        occ_ref.append(ref)
        return len(occ_node) - 1

    root = new(0)
    on_path: dict[int, int] = {}
    work = [(True, 0, root)]
    while work:
        enter, n, o = work.pop()
        if not enter:
            del on_path[n]
            continue
        on_path[n] = o
        work.append((False, n, o))
        ks = []
        for c in t.kids[n]:
            if c in on_path:
                bound.add(on_path[c])
                ks.append(new(c, on_path[c]))
            else:
                ks.append(new(c))
        occ_kids[o] = ks
        for c, k in reversed(list(zip(t.kids[n], ks))):
            if occ_ref[k] is None:
                work.append((True, c, k))
    # pass 2: print, naming binders in preorder
    reserved = {_label_text(l) for l in t.labels}
    names: dict[int, str] = {}
    scope: list[str] = []
    out: list[str] = []

    def fresh():
        k = 0
        while True:
            for b in _BINDER_NAMES:
                name = b if k == 0 else f"{b}{k}"
                if name not in scope and name not in reserved:
                    return name
            k += 1

    tasks = [("occ", root)]
    while tasks:
        kind, x = tasks.pop()
        if kind == "str":
            out.append(x)
        elif kind == "pop":
            scope.pop()
        elif occ_ref[x] is not None:
            out.append(names[occ_ref[x]])
        else:
            if x in bound:
                name = fresh()
                names[x] = name
                scope.append(name)
                out.append(f"mu {name}. ")
                tasks.append(("pop", None))
            n = occ_node[x]
            out.append(_label_text(t.labels[n]))
            ks = occ_kids[x]
            if ks:
                out.append("(")
                tasks.append(("str", ")"))
                for j in range(len(ks) - 1, -1, -1):
                    tasks.append(("occ", ks[j]))
                    if j:
                        tasks.append(("str", ", "))
    return "".join(out)


def parse_position(text: str) -> tuple:
    text = text.strip().strip("<>")
    if text in ("", "e", "root"):
        return ()
    parts = text.replace(",", ".").split(".")
    try:
        return tuple(int(p) for p in parts if p != "")
    except ValueError:
        raise IrwError("parse-error", f"bad position {text!r}") from None
