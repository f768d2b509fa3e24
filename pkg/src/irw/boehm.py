"""Root-activeness, fragility and Böhm trees w.r.t. root-active terms."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .reduction import (DEFAULT_DEPTH, Innermost, Outermost, ParallelOutermost, Script,
                        certify, is_destructive, run, run_certified, strong_p_limit)
from .term_core import (BOT, GraphBuilder, IrwError, Term, base, bottom, build, format_position,
                        node_positions, render, replace_at, shortest_position, truncate)
from .trs import MATCH, NotARedex, Trs, match_nodes, node_status, redexes, rewrite_step

DEFAULT_FUEL = 2000
EXPLORE_DEPTH = 6
MAX_STAGES = 3


@dataclass
class RaVerdict:
    verdict: str                     # yes | no | unknown
    certificate: str                 # finite-state-graph | root-loop | destructive-run | root-stable | fuel-exhausted
    detail: dict = field(default_factory=dict)
    fuel_used: int = 0

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "certificate": self.certificate,
                "detail": self.detail, "fuel_used": self.fuel_used}


@dataclass
class BoehmResult:
    tree: Term
    depth: int
    positions_unknown: set = field(default_factory=set)
    fuel_used: int = 0
    certified: bool = True
    certificates: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"tree": render(self.tree), "depth": self.depth,
                "unknown_positions": [format_position(p) for p in sorted(self.positions_unknown)],
                "certified": self.certified, "certificates": self.certificates,
                "fuel_used": self.fuel_used}


def _require(trs: Trs):
    if not trs.orthogonal:
        raise IrwError("not-orthogonal", str(trs.orthogonality_witness))


def _root_stable(trs: Trs, t: Term) -> bool:
    lab = t.labels[0]
    return lab == BOT or lab[0] == "?" or base(lab) not in trs.heads


def _is_root_redex(trs, t):
    return node_status(trs, t, 0)[0] == MATCH


def _deep_redex(trs, t, depth):
    """Is there a redex strictly below ``depth``?"""
    at = {n for n, ps in node_positions(t, depth).items() if any(len(p) == depth for p in ps)}
    seen = set()
    stack = [c for n in at for c in t.kids[n]]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if node_status(trs, t, n)[0] == MATCH:
            return True
        stack.extend(t.kids[n])
    return False


class StateGraph:
    """Reducts of a term, each expanded at every redex up to a fixed depth."""

    def __init__(self, trs: Trs, t: Term, fuel: int, depth: int = EXPLORE_DEPTH):
        self.trs = trs
        self.index = {t: 0}
        self.states = [t]
        self.edges = []          # per state: list of (target, root_step)
        self.complete = []       # all successors enumerated
        self.stable = None       # first reachable root-stable state
        i = 0
        while i < len(self.states):
            s = self.states[i]
            i += 1
            if self.stable is None and _root_stable(trs, s):
                self.stable = s
            out = []
            comp = not _deep_redex(trs, s, depth)
            for pos, rule in redexes(trs, s, depth):
                s2 = rewrite_step(trs, s, pos, rule)
                j = self.index.get(s2)
                if j is None:
                    if len(self.states) >= fuel:
                        comp = False
                        continue
                    j = self.index[s2] = len(self.states)
                    self.states.append(s2)
                out.append((j, pos == ()))
            self.edges.append(out)
            self.complete.append(comp)

    def _backward(self, seeds):
        rev = [[] for _ in self.states]
        for a, es in enumerate(self.edges):
            for b, _ in es:
                rev[b].append(a)
        hit = set(seeds)
        q = deque(hit)
        while q:
            b = q.popleft()
            for a in rev[b]:
                if a not in hit:
                    hit.add(a)
                    q.append(a)
        return hit

    def reaches_root(self):
        return self._backward(i for i, s in enumerate(self.states) if _is_root_redex(self.trs, s))

    def closed(self):
        bad = self._backward(i for i, c in enumerate(self.complete) if not c)
        return set(range(len(self.states))) - bad

    def root_cycle(self):
        """A root step a -> b with b reaching a, or None."""
        for a, es in enumerate(self.edges):
            for b, root in es:
                if root and self._reaches(b, a):
                    return a, b
        return None

    def _reaches(self, a, b):
        seen = {a}
        q = deque([a])
        while q:
            n = q.popleft()
            if n == b:
                return True
            for m, _ in self.edges[n]:
                if m not in seen:
                    seen.add(m)
                    q.append(m)
        return False


def _root_loop(trs: Trs, t: Term):
    """Rule chain rho0, rho1, ... with t a rho0-redex and each rhs an instance
    of the next lhs; returns the chain when it closes up."""
    st, rule = node_status(trs, t, 0)
    if st != MATCH:
        return None
    chain = [rule.name]
    cur = rule
    while True:
        nxt = None
        if not cur.collapsing:
            for r in trs.rules:
                if match_nodes(r.lhs, cur.rhs, 0)[0] == MATCH:
                    nxt = r
                    break
        if nxt is None:
            return None
        if nxt.name in chain:
            return chain + [nxt.name]
        chain.append(nxt.name)
        cur = nxt


def root_active(trs: Trs, t: Term, fuel: int = DEFAULT_FUEL) -> RaVerdict:
    _require(trs)
    if _root_stable(trs, t):
        return RaVerdict("no", "root-stable", {"symbol": base(t.labels[0])}, 1)
    loop = _root_loop(trs, t)
    if loop is not None:
        return RaVerdict("yes", "root-loop", {"rules": loop}, 1)
    G = StateGraph(trs, t, fuel)
    used = len(G.states)
    if G.stable is not None:
        return RaVerdict("no", "root-stable", {"symbol": base(G.stable.labels[0]),
                                               "state": render(G.stable)}, used)
    reach = G.reaches_root()
    closed = G.closed()
    for s in sorted(closed - reach):
        return RaVerdict("no", "finite-state-graph", {"states": used, "stuck": render(G.states[s])}, used)
    if 0 in closed:
        return RaVerdict("yes", "finite-state-graph", {"states": used}, used)
    cyc = G.root_cycle()
    if cyc is not None:
        return RaVerdict("yes", "finite-state-graph",
                         {"states": used, "root-cycle": [render(G.states[cyc[0]]), render(G.states[cyc[1]])]},
                         used)
    v = _pump(trs, t, max(1, fuel - used))
    v.fuel_used += used
    return v if v.verdict == "yes" else RaVerdict("unknown", "fuel-exhausted", {"states": used}, v.fuel_used)


def _to_root_redex(trs, t, fuel):
    """Shortest reduction from ``t`` to a root redex: (steps, exhaustive)."""
    if _is_root_redex(trs, t):
        return [], True
    prev = {t: None}
    q = deque([t])
    exhaustive = True
    while q:
        s = q.popleft()
        if _deep_redex(trs, s, EXPLORE_DEPTH):
            exhaustive = False
        for pos, rule in redexes(trs, s, EXPLORE_DEPTH):
            s2 = rewrite_step(trs, s, pos, rule)
            if s2 in prev:
                continue
            if len(prev) >= fuel:
                exhaustive = False
                continue
            prev[s2] = (s, pos, rule)
            if _is_root_redex(trs, s2):
                path = []
                while prev[s2] is not None:
                    s0, p, r = prev[s2]
                    path.append((p, r))
                    s2 = s0
                return path[::-1], True
            q.append(s2)
    return None, exhaustive


def _pump(trs, t, fuel, rounds: int = 16) -> RaVerdict:
    """Repeatedly reduce to a root redex and contract it."""
    cur = t
    seen = {t: 0}
    steps = []
    starts = [0]
    used = 0
    for _ in range(rounds):
        path, exhaustive = _to_root_redex(trs, cur, fuel)
        used += 1 + len(path or ())
        if path is None:
            if exhaustive:
                return RaVerdict("no", "finite-state-graph", {"stuck": render(cur)}, used)
            return RaVerdict("unknown", "fuel-exhausted", {}, used)
        for pos, rule in path:
            cur = rewrite_step(trs, cur, pos, rule)
            steps.append((pos, rule))
        st, rule = node_status(trs, cur, 0)
        cur = rewrite_step(trs, cur, (), rule)
        steps.append(((), rule))
        if _root_stable(trs, cur):
            return RaVerdict("no", "root-stable", {"symbol": base(cur.labels[0]), "state": render(cur)}, used)
        if cur in seen:
            return RaVerdict("yes", "destructive-run", {"lasso": len(steps) - seen[cur]}, used)
        seen[cur] = len(steps)
        starts.append(len(steps))
        # try the last few pumping blocks as a repeating script
        for a in starts[-4:-1]:
            if _script_destructive(trs, t, steps, a):
                return RaVerdict("yes", "destructive-run", {"period": len(steps) - a}, used)
    return RaVerdict("unknown", "fuel-exhausted", {}, used)


def _script_destructive(trs, t, steps, a):
    s = t
    for pos, rule in steps[:a]:
        s = rewrite_step(trs, s, pos, rule)
    block = [(p, r.name) for p, r in steps[a:]]
    try:
        red = run(trs, s, Script(block), 6 * len(block) + 8)
    except (NotARedex, IrwError):
        return False
    if red.stop_reason not in ("budget", "cycle"):
        return False
    return certify(red) is not None and is_destructive(red)[0]


def _symbol_graph_acyclic(trs: Trs, sym: str):
    """No reachable cycle of root symbols (None when undecidable this way)."""
    if any(r.collapsing for r in trs.rules):
        return None
    succ = {}
    for r in trs.rules:
        succ.setdefault(r.head, set()).add(base(r.rhs.labels[0]))
    state = {}

    def dfs(s):
        state[s] = 1
        for n in succ.get(s, ()):
            if state.get(n) == 1 or (n not in state and dfs(n)):
                return True
        state[s] = 2
        return False

    return not dfs(sym)


def fragile(trs: Trs, t: Term, fuel: int = DEFAULT_FUEL) -> RaVerdict:
    _require(trs)
    if _root_stable(trs, t):
        return RaVerdict("no", "root-stable", {"symbol": base(t.labels[0])}, 1)
    if _symbol_graph_acyclic(trs, base(t.labels[0])):
        return RaVerdict("no", "root-stable", {"symbol-graph": "acyclic"}, 1)
    return _pump(trs, t, fuel)


# --------------------------------------------------------------------- RA⊥

def _substitute_bot(t: Term, w: Term) -> Term:
    g = GraphBuilder()
    off = g.embed(t)
    wr = g.embed(w)
    for n in range(len(t)):
        if t.labels[n] == BOT:
            g.labels[off + n] = None
            g.kids[off + n] = [wr]
    return g.term(off)


def _lhs_knot(rule) -> Term:
    """The lhs with every variable tied back to its root."""
    lhs = rule.lhs
    labels = list(lhs.labels)
    kids = [list(k) for k in lhs.kids]
    for n, lab in enumerate(labels):
        if lab[0] == "?":
            labels[n] = None
            kids[n] = [0]
    return build(labels, kids, 0)


def find_witness(trs: Trs, t: Term | None = None, fuel: int = DEFAULT_FUEL):
    """A certified root-active total term, or None."""
    cands = []
    if t is not None:
        cands += [t.sub(n) for n in range(len(t))]
    cands += [_lhs_knot(r) for r in trs.rules]
    for c in cands:
        if not c.is_total():
            continue
        if root_active(trs, c, fuel).verdict == "yes":
            return c
    return None


def in_ra_bot(trs: Trs, t: Term, fuel: int = DEFAULT_FUEL, witness: Term | None = None) -> RaVerdict:
    _require(trs)
    if t.labels[0] == BOT:
        return RaVerdict("no", "root-stable", {"symbol": BOT}, 0)
    if BOT not in t.labels or _root_stable(trs, t):
        return root_active(trs, t, fuel)
    w = witness if witness is not None else find_witness(trs, t, fuel)
    if w is None:
        return RaVerdict("unknown", "fuel-exhausted", {"witness": None}, 0)
    v = root_active(trs, _substitute_bot(t, w), fuel)
    v.detail = dict(v.detail, witness=render(w))
    return v


def boehm_step(trs: Trs, t: Term, fuel: int = DEFAULT_FUEL, witness: Term | None = None):
    _require(trs)
    order = sorted(range(len(t)), key=lambda n: _key(shortest_position(t, [n])))
    for n in order:
        if t.labels[n] == BOT:
            continue
        if in_ra_bot(trs, t.sub(n), fuel, witness).verdict == "yes":
            return replace_at(t, shortest_position(t, [n]), bottom())
    return None


def _key(p):
    return (len(p), p)


def _collapse(trs, t, fuel, witness, depth):
    """Collapse every certified node; returns (term, unknown positions, fuel, certs)."""
    labels = list(t.labels)
    kids = [list(k) for k in t.kids]
    unknown = []
    used = 0
    certs = []
    for n in range(len(t)):
        if t.labels[n] == BOT:
            continue
        v = in_ra_bot(trs, t.sub(n), fuel, witness)
        used += v.fuel_used
        if v.verdict == "yes":
            labels[n], kids[n] = BOT, []
            certs.append({"subterm": render(t.sub(n)), "certificate": v.certificate})
        elif v.verdict == "unknown":
            unknown.append(n)
    out, m = build(labels, kids, 0, with_map=True)
    poss = set()
    for n in unknown:
        if m.get(n) is not None:
            for ps in node_positions(out, depth).get(m[n], ()):
                poss.add(ps)
    return out, poss, used, certs


def _has_redex(trs, t):
    return any(node_status(trs, t, n)[0] == MATCH for n in range(len(t)))


def boehm_tree(trs: Trs, t: Term, depth: int = DEFAULT_DEPTH, fuel: int = DEFAULT_FUEL,
               witness: Term | None = None, rounds: int = 6) -> BoehmResult:
    _require(trs)
    used = 0
    certified = True
    certs = []
    unknown = set()
    for _ in range(rounds):
        t, unknown, u, cs = _collapse(trs, t, fuel, witness, depth)
        used += u
        certs += cs
        if not _has_redex(trs, t):
            break
        red = run_certified(trs, t, ParallelOutermost(), fuel)
        used += len(red)
        out = strong_p_limit(red, depth)
        if out.certificate != "exact-rational":
            certified = False
        if out.limit is None:
            certified = False
            break
        if out.limit == t:
            break
        t = out.limit
    else:
        certified = certified and not _has_redex(trs, t)
    return BoehmResult(t, depth, unknown, used, certified and not unknown, certs)


# ------------------------------------------------------------ cross-checks

def staged_limit(trs: Trs, t: Term, strat, budget: int, depth: int, stages: int = MAX_STAGES):
    """Strong p-limit under ``strat``, continued by parallel-outermost runs
    while the limit still has redexes.  Returns (limit, certified, stage terms)."""
    from .develop import unmark
    red = run_certified(trs, t, strat, budget)
    out = strong_p_limit(red, depth)
    ok = out.certificate == "exact-rational"
    lim = None if out.limit is None else unmark(out.limit)
    seen = [lim]
    while lim is not None and _has_redex(trs, lim) and len(seen) <= stages:
        red = run_certified(trs, lim, ParallelOutermost(), budget)
        out = strong_p_limit(red, depth)
        ok = ok and out.certificate == "exact-rational"
        if out.limit is None or out.limit == lim:
            break
        lim = out.limit
        seen.append(lim)
    if lim is not None and _has_redex(trs, lim):
        ok = False
    return lim, ok, seen


def check_prs_eq_bohm(trs: Trs, t: Term, strat, budget: int = 1000, depth: int = DEFAULT_DEPTH,
                      fuel: int = DEFAULT_FUEL) -> dict:
    report = {"status": "inconclusive", "depth": depth}
    try:
        lim, ok, stages = staged_limit(trs, t, strat, budget, depth)
        bt = boehm_tree(trs, t if strat is None else _plain(t), depth, fuel)
    except IrwError as e:
        report.update(status="fail", error=e.code)
        return report
    report["p_limit"] = None if lim is None else render(lim)
    report["stages"] = [render(s) for s in stages if s is not None]
    report["boehm_tree"] = render(bt.tree)
    if not ok or not bt.certified or lim is None:
        return report
    same = truncate(lim, depth) == truncate(bt.tree, depth)
    report["status"] = "pass" if same else "fail"
    return report


def _plain(t):
    from .develop import unmark
    return unmark(t)


def compress(trs: Trs, t: Term, depth: int = DEFAULT_DEPTH, budget: int = 1000,
             fuel: int = DEFAULT_FUEL) -> dict:
    """Look for a single run of length at most omega reaching the staged limit."""
    target, ok, stages = staged_limit(trs, t, ParallelOutermost(), budget, depth)
    report = {"stages": [render(s) for s in stages if s is not None],
              "target": None if target is None else render(target)}
    if not trs.left_linear:
        # only a root step can produce the target root symbol; look for a
        # finite reduct that is already a root redex
        reach, exhaustive = _finite_reducts(trs, t, fuel)
        hits = [s for s in reach if target is not None and _root_could_yield(trs, s, target)]
        report["explored"] = len(reach)
        report["status"] = "inconclusive" if hits else "absent"
        report["exhaustive"] = exhaustive
        return report
    for strat in (Outermost(), ParallelOutermost(), Innermost()):
        red = run_certified(trs, t, strat, budget)
        out = strong_p_limit(red, depth)
        if out.limit is not None and target is not None and \
                truncate(out.limit, depth) == truncate(target, depth):
            report.update(status="found", strategy=strat.kind, certificate=out.certificate)
            return report
    report["status"] = "inconclusive"
    return report


def _finite_reducts(trs, t, fuel):
    seen = {t}
    q = deque([t])
    exhaustive = True
    while q:
        s = q.popleft()
        rs = redexes(trs, s, EXPLORE_DEPTH)
        if not s.is_finite() or len(redexes(trs, s, len(s))) > len(rs):
            exhaustive = False
        for pos, rule in rs:
            s2 = rewrite_step(trs, s, pos, rule)
            if s2 not in seen:
                if len(seen) >= fuel:
                    exhaustive = False
                    continue
                seen.add(s2)
                q.append(s2)
    return seen, exhaustive


def _root_could_yield(trs, s, target):
    """Is ``s`` a root redex, or does its root already carry the target symbol?"""
    if base(s.labels[0]) == base(target.labels[0]):
        return True
    return _is_root_redex(trs, s)
