"""Descendants, labelled runs, paths and complete developments.

Occurrence sets are tracked as marks on node labels: a marked symbol is the
plain symbol followed by ``'`` and mark letters.  Letters in use:

``u``  redexes still to be developed,
``r``  redexes of the current development round,
``v``  a second set carried along (diamond and strip constructions),
``t``  the set whose descendants are being traced.
"""
from __future__ import annotations

from dataclasses import dataclass

from .reduction import (Closed, Period, Reduction, Shift, Slots, Strategy, certify,
                        run_certified, strong_p_limit, _run_from, DEFAULT_BUDGET, DEFAULT_DEPTH)
from .term_core import (BOT, GraphBuilder, IrwError, Term, base, build, format_position,
                        is_prefix, marks, node_positions, parse_position, render,
                        shortest_position, with_marks)
from .trs import MATCH, NOMATCH, Trs, match_nodes, node_status, rewrite_step


class OccurrenceSet:
    """Explicit positions plus node-closed designators.

    ``symbols`` selects every node carrying one of the given symbols;
    ``regular`` is a pair ``(term, letter)`` selecting the positions where
    ``term`` carries the mark ``letter`` (a possibly infinite regular set).
    """

    def __init__(self, explicit=(), symbols=(), regular=None, window=None):
        self.explicit = frozenset(tuple(p) for p in explicit)
        self.symbols = frozenset(symbols)
        self.regular = regular
        self.window = window

    @classmethod
    def parse(cls, text: str) -> "OccurrenceSet":
        text = text.strip()
        explicit, symbols = [], []
        for part in _split_top(text):
            part = part.strip()
            if not part:
                continue
            if part.startswith("@node:"):
                symbols.append(part[6:])
            elif part.startswith("{"):
                inner = part.strip("{}").strip()
                if inner:
                    explicit.extend(parse_position(x) for x in inner.split(","))
            else:
                explicit.append(parse_position(part))
        return cls(explicit, symbols)

    def is_empty(self) -> bool:
        if self.explicit or self.symbols:
            return False
        if self.regular is None:
            return True
        t, letter = self.regular
        return not any(letter in marks(l) for l in t.labels)

    def is_finite(self) -> bool:
        return not self.symbols and (self.regular is None or self.regular[0].is_finite())

    def contains(self, pos, host: Term | None = None) -> bool:
        pos = tuple(pos)
        if pos in self.explicit:
            return True
        if self.symbols and host is not None and host.has_position(pos):
            if base(host.labels[host.node_at(pos)]) in self.symbols:
                return True
        if self.regular is not None:
            t, letter = self.regular
            if t.has_position(pos) and letter in marks(t.labels[t.node_at(pos)]):
                return True
        return False

    def positions(self, host: Term | None, depth: int) -> frozenset:
        out = {p for p in self.explicit if len(p) <= depth}
        if self.symbols and host is not None:
            for n, ps in node_positions(host, depth).items():
                if base(host.labels[n]) in self.symbols:
                    out.update(ps)
        if self.regular is not None:
            t, letter = self.regular
            for n, ps in node_positions(t, depth).items():
                if letter in marks(t.labels[n]):
                    out.update(ps)
        return frozenset(out)

    def __repr__(self):
        bits = sorted(format_position(p) for p in self.explicit)
        bits += [f"@node:{s}" for s in sorted(self.symbols)]
        if self.regular is not None:
            bits.append(f"regular({render(self.regular[0])})")
        return "{" + ", ".join(bits) + "}"


def _split_top(text):
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


# ------------------------------------------------------------------- marking

def mark(t: Term, U: OccurrenceSet, letter: str, trs: Trs | None = None,
         redexes_only: bool = False) -> Term:
    """``t`` with ``letter`` added at every occurrence in ``U``."""
    for p in U.explicit:
        if not t.has_position(p):
            raise IrwError("occurrence-not-in-term", format_position(p))
        lab = t.labels[t.node_at(p)]
        if lab == BOT:
            raise IrwError("occurrence-at-bot", format_position(p))
        if lab[0] == "?":
            raise IrwError("occurrence-at-variable", format_position(p))
    trie = {}
    for p in U.explicit:
        node = trie
        for i in p:
            node = node.setdefault(i, {})
        node[None] = True
    reg_t, reg_l = U.regular if U.regular is not None else (None, None)
    g = GraphBuilder()
    ids = {}

    def key_of(n, tr, rn):
        return (n, id(tr) if tr is not None else None, rn)

    tries = {}
    start = (0, trie if U.explicit else None, 0 if reg_t is not None else None)
    work = [start]
    ids[key_of(*start)] = g.node(None)
    tries[key_of(*start)] = start
    while work:
        n, tr, rn = work.pop()
        me = ids[key_of(n, tr, rn)]
        lab = t.labels[n]
        hit = (tr is not None and None in tr)
        if not hit and U.symbols and lab != BOT and lab[0] != "?" and base(lab) in U.symbols:
            hit = not redexes_only or node_status(trs, t, n)[0] == MATCH
        if not hit and rn is not None and reg_l in marks(reg_t.labels[rn]) and lab != BOT and lab[0] != "?":
            hit = True
        g.labels[me] = with_marks(lab, marks(lab) + letter) if hit else lab
        kids = []
        for i, c in enumerate(t.kids[n]):
            ctr = tr.get(i) if tr is not None else None
            crn = None
            if rn is not None and i < len(reg_t.kids[rn]):
                crn = reg_t.kids[rn][i]
            k = key_of(c, ctr, crn)
            if k not in ids:
                ids[k] = g.node(None)
                work.append((c, ctr, crn))
            kids.append(ids[k])
        g.kids[me] = kids
    m = g.term(ids[key_of(*start)])
    if redexes_only:
        for n, lab in enumerate(m.labels):
            if letter in marks(lab) and node_status(trs, m, n)[0] != MATCH:
                raise IrwError("occurrence-not-a-redex", render(m.sub(n)))
    return m


def unmark(t: Term, letters: str | None = None) -> Term:
    if letters is None:
        labels = [base(l) for l in t.labels]
    else:
        labels = [with_marks(l, "".join(c for c in marks(l) if c not in letters)) for l in t.labels]
    return build(labels, t.kids, 0)


def relabel(t: Term, src: str, dst: str, drop: str = "") -> Term:
    """Rename mark ``src`` to ``dst`` and remove the letters in ``drop``."""
    out = []
    for l in t.labels:
        ms = [c for c in marks(l) if c not in drop]
        if src in ms:
            ms = [c for c in ms if c != src] + [dst]
        out.append(with_marks(l, "".join(ms)))
    return build(out, t.kids, 0)


def read_marks(t: Term, letter: str, depth: int | None = None) -> OccurrenceSet:
    """The occurrences of ``letter`` in ``t`` (explicit when finite)."""
    if t.is_finite() and depth is None:
        depth = len(t)
    if depth is not None and t.is_finite():
        ps = set()
        for n, poss in node_positions(t, depth).items():
            if letter in marks(t.labels[n]):
                ps.update(poss)
        return OccurrenceSet(ps)
    return OccurrenceSet(regular=(t, letter))


def has_mark(t: Term, letter: str) -> bool:
    return any(letter in marks(l) for l in t.labels)


# --------------------------------------------------------------- descendants

def _step_descendants(positions, pos, rule, window):
    out = set()
    rhs_vars = _rhs_var_positions(rule, window)
    for u in positions:
        if not is_prefix(pos, u):
            out.add(u)
            continue
        w = u[len(pos):]
        var = None
        for x, ps in rule.var_positions.items():
            for vp in ps:
                if is_prefix(vp, w):
                    var, rest = x, w[len(vp):]
        if var is None:
            continue  # inside the redex pattern
        for rp in rhs_vars.get(var, ()):
            q = pos + rp + rest
            if len(q) <= window:
                out.add(q)
    return out


_rhs_cache = {}


def _rhs_var_positions(rule, window):
    key = (rule, window)
    r = _rhs_cache.get(key)
    if r is None:
        r = {}
        for n, ps in node_positions(rule.rhs, window).items():
            lab = rule.rhs.labels[n]
            if lab[0] == "?":
                r.setdefault(lab[1:], []).extend(ps)
        _rhs_cache[key] = r
    return r


def _check_occurrences(t, U):
    for p in U.explicit:
        if not t.has_position(p):
            raise IrwError("occurrence-not-in-term", format_position(p))
        lab = t.labels[t.node_at(p)]
        if lab == BOT:
            raise IrwError("occurrence-at-bot", format_position(p))
        if lab[0] == "?":
            raise IrwError("occurrence-at-variable", format_position(p))


def _positional(U, red, upto, D):
    origin = red.origin
    _check_occurrences(origin, U)
    heights = sum(red.steps[i].rule.height for i in range(upto)) if upto else 0
    window = D + heights
    cur = set(p for p in U.positions(origin, window)
              if base(origin.labels[origin.node_at(p)]) != BOT)
    for i in range(upto):
        st = red.steps[i]
        cur = _step_descendants(cur, st.position, st.rule, window)
    return cur


def descendants(U: OccurrenceSet, red: Reduction, depth: int = DEFAULT_DEPTH) -> OccurrenceSet:
    """U\\S, position by position.  For omega-runs and infinite ``U`` the
    result is exact up to ``depth`` and carries that window."""
    exact = U.is_finite()
    cert = certify(red)
    if cert is None:
        raise IrwError("uncertified-run", "descendants need a certified limit")
    if isinstance(cert, Closed):
        grow = [_growth(s.rule) for s in red.steps]
        exact = exact and None not in grow
        D = depth if not exact else max(depth, _max_len(U) + sum(grow))
        res = _positional(U, red, len(red.steps), D)
        return OccurrenceSet({p for p in res if len(p) <= D}, window=None if exact else depth)
    if isinstance(cert, Period):
        res = _positional(U, red, cert.k, depth)
        vol = cert.positions
        return OccurrenceSet({p for p in res if len(p) <= depth and not any(is_prefix(v, p) for v in vol)},
                             window=depth)
    if isinstance(cert, Shift):
        n = 0
        qmin = min(len(q) for q, _, _, _ in cert.sites)
        vmin = min(len(v) for _, v, _, _ in cert.sites)
        while qmin + n * vmin <= depth:
            n += 1
        e = cert.k + n * cert.p
        while len(red.steps) < e:
            red = red.extend(e - len(red.steps))
        res = _positional(U, red, e, depth)
        return OccurrenceSet({p for p in res if len(p) <= depth}, window=depth)
    if isinstance(cert, Slots):
        out = set()
        origin = red.origin
        _check_occurrences(origin, U)
        allp = U.positions(origin, depth)
        for p in allp:
            if not any(is_prefix(s, p) for s, _ in cert.parts) and not any(is_prefix(p, s) for s, _ in cert.parts):
                out.add(p)
        for s, sub in cert.parts:
            inner = OccurrenceSet({p[len(s):] for p in allp if is_prefix(s, p)})
            for p in descendants(inner, sub, depth - len(s)).positions(None, depth):
                out.add(s + p)
        # occurrences strictly above a slot are never stepped at
        for p in allp:
            if any(is_prefix(p, s) and p != s for s, _ in cert.parts):
                out.add(p)
        return OccurrenceSet(out, window=depth)
    raise IrwError("uncertified-run")


def _growth(rule):
    """Deepest variable of a finite rhs: how far a descendant can sink per step."""
    if not rule.rhs.is_finite():
        return None
    return max((len(p) for n, ps in node_positions(rule.rhs, len(rule.rhs)).items()
                if rule.rhs.labels[n][0] == "?" for p in ps), default=0)


def _max_len(U):
    return max((len(p) for p in U.explicit), default=0)


def lift(red: Reduction, marked_origin: Term) -> Reduction:
    """Replay ``red`` on a marked copy of its origin (same positions and rules)."""
    t = marked_origin
    steps = []
    from .reduction import Step
    for st in red.steps:
        after = rewrite_step(red.trs, t, st.position, st.rule)
        if red.strategy is not None:
            after, _ = red.strategy.post_step(red.trs, after, st.cursor)
        steps.append(Step(t, st.position, st.rule, after, st.cursor))
        t = after
    return Reduction(red.trs, marked_origin, red.strategy, steps, red.cursor, None,
                     red.stop_reason if red.closed else "budget", red.strategy_start)


def descendants_via_labels(U: OccurrenceSet, red: Reduction, depth: int = DEFAULT_DEPTH) -> OccurrenceSet:
    """U\\S read off the labels of the lifted run's (limit) term."""
    if not red.trs.left_linear:
        raise IrwError("not-left-linear")
    _check_occurrences(red.origin, U)
    lifted = lift(red, mark(red.origin, U, "t"))
    if lifted.closed:
        final = lifted.final
        res = read_marks(final, "t", None if final.is_finite() else depth)
        return res if U.is_finite() else OccurrenceSet(res.positions(None, depth), window=depth)
    budget = max(4 * len(lifted), 64)
    while certify(lifted) is None and len(lifted) < budget:
        lifted = lifted.extend(len(lifted) + 8)
    out = strong_p_limit(lifted, depth)
    if out.certificate != "exact-rational":
        raise IrwError("uncertified-run", "labelled run could not be certified")
    return OccurrenceSet(read_marks(out.limit, "t", depth).positions(None, depth), window=depth)


def same_occurrences(A: OccurrenceSet, B: OccurrenceSet, depth: int, host=None) -> bool:
    return A.positions(host, depth) == B.positions(host, depth)


# ------------------------------------------------------------- developments

def non_conflicting(trs: Trs, t: Term, U: OccurrenceSet) -> bool:
    m = mark(t, U, "u", trs, redexes_only=True)
    for n, lab in enumerate(m.labels):
        if "u" not in marks(lab):
            continue
        _, rule = node_status(trs, m, n)
        for w in rule.pattern_positions:
            if not w:
                continue
            k = n
            for i in w:
                k = m.kids[k][i]
            if "u" in marks(m.labels[k]):
                return False
    return True


def start_round(t: Term) -> Term:
    """Mark the outermost ``u`` occurrences with ``r``."""
    g = GraphBuilder()
    ids = {(0, False): g.node(None)}
    work = [(0, False)]
    while work:
        n, below = work.pop()
        me = ids[(n, below)]
        lab = t.labels[n]
        ms = marks(lab).replace("r", "")
        hot = "u" in ms
        g.labels[me] = with_marks(lab, ms + ("r" if hot and not below else ""))
        kids = []
        for c in t.kids[n]:
            k = (c, below or hot)
            if k not in ids:
                ids[k] = g.node(None)
                work.append(k)
            kids.append(ids[k])
        g.kids[me] = kids
    return g.term(ids[(0, False)])


class DevStrategy(Strategy):
    """Develop the ``u``-marked redexes in rounds of outermost occurrences.

    Within a round the leftmost among the shallowest ``r`` occurrences goes
    first.  ``order="innermost"`` instead always picks a ``u`` occurrence with
    no ``u`` occurrence below it (finite terms only); it exists to compare
    two different developments.
    """

    kind = "development"
    shift_invariant = True

    def __init__(self, order: str = "outermost"):
        self.order = order

    def node_status(self, trs, t, n, three=False):
        if "u" not in marks(t.labels[n]):
            return NOMATCH, None
        return node_status(trs, t, n, three)

    def prepare(self, trs, t, cursor):
        return self.post_step(trs, t, cursor)

    def post_step(self, trs, t, cursor):
        if self.order == "outermost" and not has_mark(t, "r") and has_mark(t, "u"):
            t = start_round(t)
        return t, cursor

    def choose(self, trs, t, cursor, status):
        if self.order == "innermost":
            us = [n for n, l in enumerate(t.labels) if "u" in marks(l)]
            inner = [n for n in us if not _reaches_mark(t, n, "u")]
            pos = shortest_position(t, inner or us)
        else:
            pos = shortest_position(t, [n for n, l in enumerate(t.labels) if "r" in marks(l)])
        if pos is None:
            return None
        st, rule = status(t.node_at(pos))
        if st != MATCH:
            raise IrwError("occurrence-not-a-redex", format_position(pos))
        return pos, rule, cursor


def _reaches_mark(t, n, letter):
    seen = set()
    stack = list(t.kids[n])
    while stack:
        m = stack.pop()
        if m in seen:
            continue
        seen.add(m)
        if letter in marks(t.labels[m]):
            return True
        stack.extend(t.kids[m])
    return False


def _require_develop(trs, t, U):
    if not trs.left_linear:
        raise IrwError("not-left-linear")
    if not trs.orthogonal and not non_conflicting(trs, t, U):
        raise IrwError("not-orthogonal-and-conflicting")


def develop_marked(trs: Trs, m: Term, D: int = DEFAULT_DEPTH, budget: int = DEFAULT_BUDGET,
                   order: str = "outermost"):
    """Develop the ``u`` marks of ``m``: (reduction, marked limit, outcome)."""
    red = run_certified(trs, m, DevStrategy(order), budget)
    out = strong_p_limit(red, D)
    return red, out.limit, out


@dataclass
class Development:
    reduction: Reduction
    limit: Term | None
    outcome: object
    marked_limit: Term | None = None


def complete_development(trs: Trs, t: Term, U: OccurrenceSet, D: int = DEFAULT_DEPTH,
                         budget: int = DEFAULT_BUDGET, order: str = "outermost") -> Development:
    _require_develop(trs, t, U)
    m = mark(t, U, "u", trs, redexes_only=True)
    red, lim, out = develop_marked(trs, m, D, budget, order)
    plain = None if lim is None else unmark(lim)
    out.limit = plain
    return Development(red, plain, out, lim)


# --------------------------------------------------------------------- paths

class PathAutomaton:
    """Finite presentation of the paths of ``t`` w.r.t. a redex set.

    States are ``("top", node)`` for nodes of the marked host and
    ``("rhs", rule, rhs_node, host_node)`` inside a right-hand side instance.
    ``label[s]`` is None for unlabelled states; ``edges[s]`` lists
    ``(edge_label_or_None, target)``.
    """

    def __init__(self, trs: Trs, m: Term):
        self.trs = trs
        self.host = m
        self.initial = ("top", 0)
        self.label = {}
        self.edges = {}
        work = [self.initial]
        seen = {self.initial}
        while work:
            s = work.pop()
            lab, es = self._expand(s)
            self.label[s] = lab
            self.edges[s] = es
            for _, tgt in es:
                if tgt not in seen:
                    seen.add(tgt)
                    work.append(tgt)

    def _expand(self, s):
        m = self.host
        if s[0] == "top":
            n = s[1]
            lab = m.labels[n]
            if "u" in marks(lab):
                _, rule = node_status(self.trs, m, n)
                return None, [(None, ("rhs", rule.name, 0, n))]
            name = base(lab)
            return (name[1:] if name[0] == "?" else name), [(i, ("top", c)) for i, c in enumerate(m.kids[n])]
        _, rname, r, hn = s
        rule = self.trs.rule(rname)
        lab = rule.rhs.labels[r]
        if lab[0] == "?":
            _, binding = match_nodes(rule.lhs, m, hn)
            return None, [(None, ("top", binding[lab[1:]]))]
        return lab, [(i, ("rhs", rname, c, hn)) for i, c in enumerate(rule.rhs.kids[r])]

    @property
    def states(self):
        return list(self.label)

    def traces(self, max_len: int = 32) -> set:
        """Maximal traces with at most ``max_len`` entries (longer ones are cut)."""
        out = set()
        stack = [(self.initial, (), frozenset())]
        while stack:
            s, tr, silent = stack.pop()
            lab = self.label[s]
            if lab is not None and lab != BOT:
                tr = tr + (lab,)
                silent = frozenset()
            elif lab is None:
                if s in silent:
                    out.add(tr)
                    continue
                silent = silent | {s}
            es = self.edges[s]
            if not es or len(tr) >= max_len:
                out.add(tr)
                continue
            for el, tgt in es:
                stack.append((tgt, tr if el is None else tr + (el,), silent))
        return out

    def resolve(self, s):
        """Follow unlabelled states to a labelled one; None on a silent cycle."""
        seen = set()
        while self.label[s] is None:
            if s in seen:
                return None
            seen.add(s)
            s = self.edges[s][0][1]
        return s

    def to_dot(self) -> str:
        ids = {s: i for i, s in enumerate(sorted(self.label, key=repr))}
        lines = ["digraph paths {"]
        for s, i in ids.items():
            lab = self.label[s]
            shape = "doublecircle" if s == self.initial else "circle"
            lines.append(f'  n{i} [label="{lab if lab is not None else ""}", shape={shape}];')
        for s, es in self.edges.items():
            for el, tgt in es:
                lines.append(f'  n{ids[s]} -> n{ids[tgt]} [label="{"" if el is None else el}"];')
        lines.append("}")
        return "\n".join(lines)


def build_paths(trs: Trs, t: Term, U: OccurrenceSet) -> PathAutomaton:
    if not trs.left_linear:
        raise IrwError("not-left-linear")
    m = mark(t, U, "u", trs, redexes_only=True)
    if not trs.orthogonal and not non_conflicting(trs, t, U):
        raise IrwError("not-orthogonal-and-conflicting")
    return PathAutomaton(trs, m)


def automaton_term(A: PathAutomaton) -> Term:
    g = GraphBuilder()
    ids = {}
    bot = [None]

    def node_for(s):
        r = A.resolve(s)
        if r is None:
            if bot[0] is None:
                bot[0] = g.node(BOT)
            return bot[0]
        if r not in ids:
            ids[r] = g.node(None)
            work.append(r)
        return ids[r]

    work = []
    root = node_for(A.initial)
    while work:
        s = work.pop()
        lab = A.label[s]
        if s[0] == "top" and len(lab) and A.host.labels[s[1]][0] == "?":
            lab = "?" + lab
        g.labels[ids[s]] = lab
        g.kids[ids[s]] = [node_for(tgt) for _, tgt in A.edges[s]]
    return g.term(root)


def matching_term(trs: Trs, t: Term, U: OccurrenceSet) -> Term:
    return automaton_term(build_paths(trs, t, U))


# --------------------------------------------------------------- joins

def diamond_join(trs: Trs, t: Term, U: OccurrenceSet, V: OccurrenceSet,
                 D: int = DEFAULT_DEPTH, budget: int = DEFAULT_BUDGET):
    if not trs.orthogonal:
        raise IrwError("not-orthogonal")
    mu = mark(t, U, "u", trs, redexes_only=True)
    muv = mark(mu, V, "v", trs, redexes_only=False)
    mv = mark(t, V, "u", trs, redexes_only=True)
    mvu = mark(mv, U, "v", trs, redexes_only=False)
    corners = []
    for m in (muv, mvu):
        _, lim1, out1 = develop_marked(trs, m, D, budget)
        _check_exact(out1)
        t1 = unmark(lim1)
        rest = relabel(lim1, "v", "u", drop="ur")
        _, lim2, out2 = develop_marked(trs, rest, D, budget)
        _check_exact(out2)
        corners.append((t1, unmark(lim2)))
    (t1, a), (t2, b) = corners
    if a != b:
        raise IrwError("diamond-failed", f"{render(a)} != {render(b)}")
    return t1, t2, a


def _check_exact(out):
    if out.certificate != "exact-rational":
        raise IrwError("uncertified-run", "development not certified within budget")


def strip_project(trs: Trs, S: Reduction, U: OccurrenceSet, D: int = DEFAULT_DEPTH,
                  budget: int = DEFAULT_BUDGET):
    """Project ``S`` over the complete development of ``U``: (S/U, U\\S)."""
    if not trs.orthogonal:
        raise IrwError("not-orthogonal")
    t0 = S.origin
    m = mark(t0, U, "u", trs, redexes_only=True)
    _check_disjoint(m)
    red0, lim0, out0 = develop_marked(trs, m, D, budget)
    _check_exact(out0)
    s0 = unmark(lim0)
    from .reduction import Step
    steps = []
    cur_s = s0
    seen = {}
    n = len(S.steps)
    horizon = n if S.cycle is None else n + 4 * (S.cycle[0] + S.cycle[1]) + 8
    i = 0
    while i < horizon:
        state = (m, S.cursor_at(_idx(S, i)))
        if not has_mark(m, "u"):
            t_i = unmark(m)
            if S.strategy is None:
                tail = [(st.position, st.rule) for st in S.steps[i:]]
                for pos, rule in tail:
                    after = rewrite_step(trs, cur_s, pos, rule)
                    steps.append(Step(cur_s, pos, rule, after))
                    cur_s = after
                proj = Reduction(trs, s0, None, steps, None, None, "finite", len(steps))
                return proj, OccurrenceSet()
            rest = _run_from(trs, t_i, S.strategy, state[1], budget)
            proj = Reduction(trs, s0, S.strategy, steps + rest.steps, rest.cursor,
                             None if rest.cycle is None else (rest.cycle[0] + len(steps), rest.cycle[1]),
                             rest.stop_reason, len(steps))
            return proj, OccurrenceSet()
        if state in seen:
            k_i, k_steps = seen[state]
            block = [(st.position, st.rule.name) for st in steps[k_steps:]]
            from .reduction import Script
            if not block:
                proj = Reduction(trs, s0, None, steps, None, None, "finite", len(steps))
            else:
                prefix = steps[:k_steps]
                start = prefix[-1].after if prefix else s0
                tail = _run_from(trs, start, Script(block), 0, len(block) * 2)
                proj = Reduction(trs, s0, Script(block), prefix + tail.steps, tail.cursor,
                                 None if tail.cycle is None else (tail.cycle[0] + len(prefix), tail.cycle[1]),
                                 tail.stop_reason, len(prefix))
            return proj, descendants(U, S, D)
        seen[state] = (i, len(steps))
        st = S.steps[_idx(S, i)]
        mv = mark(m, OccurrenceSet([st.position]), "v")
        _, lim, out = develop_marked(trs, mv, D, budget)
        _check_exact(out)
        residual = relabel(lim, "v", "u", drop="ur")
        if has_mark(residual, "u"):
            dred, lim2, out2 = develop_marked(trs, residual, D, budget)
            _check_exact(out2)
            if not dred.closed:
                raise IrwError("uncertified-run", "infinite projection step")
            for ds in dred.steps:
                after = unmark(ds.after)
                steps.append(Step(unmark(ds.before), ds.position, ds.rule, after))
            cur_s = unmark(lim2)
        m = rewrite_step(trs, m, st.position, st.rule)
        i += 1
    closed = S.closed or S.strategy is None
    proj = Reduction(trs, s0, None, steps, None, None, "finite" if closed else "budget", len(steps))
    return proj, read_marks(m, "u")


def _idx(S, i):
    if S.cycle is None or i < len(S.steps):
        return i
    k, p = S.cycle
    return k + (i - k) % p


def _check_disjoint(m: Term):
    for n, lab in enumerate(m.labels):
        if "u" in marks(lab) and _reaches_mark(m, n, "u"):
            raise IrwError("occurrences-not-disjoint")
