"""Rules, matching, single steps and syntactic checks."""
from __future__ import annotations

from dataclasses import dataclass, field

from .term_core import (BOT, GraphBuilder, IrwError, ParseError, Signature, Symbol, Term,
                        base, node_positions, parse_term)

MATCH, NOMATCH, DEPENDS = "match", "nomatch", "depends"


class NotARedex(IrwError):
    def __init__(self, message=""):
        super().__init__("not-a-redex", message)


def is_pattern_var(label: str) -> bool:
    """Placeholders used by symbolic runs; they stand for unknown content."""
    return label.startswith("?#")


class Rule:
    def __init__(self, name: str, lhs: Term, rhs: Term):
        if lhs.labels[0][0] == "?" or lhs.labels[0] == BOT:
            raise IrwError("invalid-rule", f"{name}: left-hand side must start with a function symbol")
        if not lhs.is_finite():
            raise IrwError("invalid-rule", f"{name}: left-hand side must be finite")
        if not lhs.is_total() or not rhs.is_total():
            raise IrwError("invalid-rule", f"{name}: rules may not mention bottom")
        extra = rhs.variables() - lhs.variables()
        if extra:
            raise IrwError("invalid-rule", f"{name}: unbound variable {sorted(extra)[0]}")
        self.name = name
        self.lhs = lhs
        self.rhs = rhs
        self.collapsing = rhs.labels[0][0] == "?"
        self.vars = lhs.variables()
        # posF(lhs) and variable positions, by walking the (finite) tree
        pf, vp = [], {}
        stack = [((), 0)]
        while stack:
            pos, n = stack.pop()
            lab = lhs.labels[n]
            if lab[0] == "?":
                vp.setdefault(lab[1:], []).append(pos)
            else:
                pf.append(pos)
                for i, c in enumerate(lhs.kids[n]):
                    stack.append((pos + (i,), c))
        self.pattern_positions = frozenset(pf)
        self.var_positions = {v: sorted(ps) for v, ps in vp.items()}
        self.height = 1 + max(len(p) for p in pf)
        self.head = lhs.labels[0]

    @property
    def linear(self) -> bool:
        return all(len(ps) == 1 for ps in self.var_positions.values())

    def __repr__(self):
        return f"Rule({self.name}: {self.lhs} -> {self.rhs})"

    def __eq__(self, other):
        return isinstance(other, Rule) and (self.name, self.lhs, self.rhs) == (other.name, other.lhs, other.rhs)

    def __hash__(self):
        return hash((self.name, self.lhs, self.rhs))


class Trs:
    def __init__(self, signature: Signature, rules, terms=None):
        self.signature = signature
        self.rules = tuple(rules)
        names = [r.name for r in self.rules]
        if len(set(names)) != len(names):
            raise IrwError("invalid-rule", "duplicate rule name")
        self.terms = dict(terms or {})
        self.left_linear, self.linearity_witness = check_left_linear(self)
        self.orthogonal, self.orthogonality_witness = check_orthogonal(self)
        self.heads = {r.head for r in self.rules}
        self.max_height = max((r.height for r in self.rules), default=1)

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise IrwError("unknown-rule", name)

    def __hash__(self):
        return hash(self.rules)

    def __eq__(self, other):
        return isinstance(other, Trs) and self.rules == other.rules and self.signature == other.signature


# ------------------------------------------------------------------ matching

def match_nodes(lhs: Term, t: Term, n: int, three: bool = False):
    """Match ``lhs`` against node ``n`` of ``t``.

    Returns ``(status, binding)`` with binding variable -> node of ``t``.
    Symbols are compared on their base label so marked terms match too.
    """
    binding: dict[str, int] = {}
    depends = False
    stack = [(0, n)]
    while stack:
        a, b = stack.pop()
        la = lhs.labels[a]
        lb = t.labels[b]
        if la[0] == "?":
            v = la[1:]
            prev = binding.get(v)
            if prev is None:
                binding[v] = b
            elif prev != b:
                if three and (_has_pattern_var(t, prev) or _has_pattern_var(t, b)):
                    depends = True
                else:
                    return NOMATCH, None
            continue
        if three and is_pattern_var(lb):
            depends = True
            continue
        if base(lb) != la or len(t.kids[b]) != len(lhs.kids[a]):
            return NOMATCH, None
        stack.extend(zip(lhs.kids[a], t.kids[b]))
    if depends:
        return DEPENDS, None
    return MATCH, binding


def _has_pattern_var(t: Term, n: int) -> bool:
    seen = {n}
    stack = [n]
    while stack:
        m = stack.pop()
        if is_pattern_var(t.labels[m]):
            return True
        for c in t.kids[m]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def match(lhs: Term, t: Term):
    """Substitution (variable -> Term) with lhs·σ = t, or None."""
    status, b = match_nodes(lhs, t, 0)
    if status != MATCH:
        return None
    return {v: t.sub(n) for v, n in b.items()}


def node_status(trs: Trs, t: Term, n: int, three: bool = False):
    """First rule matching at node ``n``: (status, rule)."""
    dep = False
    for r in trs.rules:
        st, _ = match_nodes(r.lhs, t, n, three)
        if st == MATCH:
            return MATCH, r
        if st == DEPENDS:
            dep = True
    return (DEPENDS if dep else NOMATCH), None


def redex_nodes(trs: Trs, t: Term) -> dict:
    """node -> first matching rule, for every redex node of ``t``."""
    out = {}
    for n in range(len(t)):
        st, r = node_status(trs, t, n)
        if st == MATCH:
            out[n] = r
    return out


def is_normal_form(trs: Trs, t: Term) -> bool:
    return not redex_nodes(trs, t)


def apply_subst(sigma: dict, t: Term) -> Term:
    g = GraphBuilder()
    g.embed(t)
    roots = {v: g.embed(s) for v, s in sigma.items()}
    for n, lab in enumerate(t.labels):
        if lab[0] == "?" and lab[1:] in roots:
            g.labels[n] = None
            g.kids[n] = [roots[lab[1:]]]
    return g.term(0)


def instantiate_rhs(g: GraphBuilder, rhs: Term, binding: dict) -> int:
    """Embed ``rhs`` into ``g`` with variables aliased to bound nodes of ``g``."""
    off = g.embed(rhs)
    for i, lab in enumerate(rhs.labels):
        if lab[0] == "?":
            g.labels[off + i] = None
            g.kids[off + i] = [binding[lab[1:]]]
    return off


def graft(g: GraphBuilder, t: Term, pos, new_root: int) -> int:
    """Copy the spine of ``t`` (embedded at offset 0 of ``g``) down to ``pos``,
    hanging ``new_root`` there.  Returns the root of the result."""
    if not pos:
        return new_root
    n = 0
    prev = root = None
    for depth, i in enumerate(pos):
        copy = g.node(t.labels[n], t.kids[n])
        if prev is None:
            root = copy
        else:
            g.kids[prev][pos[depth - 1]] = copy
        prev = copy
        n = t.kids[n][i]
    g.kids[prev][pos[-1]] = new_root
    return root


def rewrite_step(trs, t: Term, pos, rule: Rule) -> Term:
    pos = tuple(pos)
    n = t.node_at(pos)
    st, binding = match_nodes(rule.lhs, t, n)
    if st != MATCH:
        raise NotARedex(f"rule {rule.name} does not match at {'.'.join(map(str, pos)) or 'root'}")
    g = GraphBuilder()
    g.embed(t)
    r = instantiate_rhs(g, rule.rhs, binding)
    return g.term(graft(g, t, pos, r))


def redexes(trs: Trs, t: Term, depth: int) -> list:
    """All (position, rule) with |position| <= depth, in position order."""
    by_node = {}
    for n in range(len(t)):
        rs = [r for r in trs.rules if match_nodes(r.lhs, t, n)[0] == MATCH]
        if rs:
            by_node[n] = rs
    out = []
    for n, ps in node_positions(t, depth).items():
        for r in by_node.get(n, ()):
            out.extend((p, r) for p in ps)
    return sorted(out, key=lambda pr: (pr[0], pr[1].name))


# ------------------------------------------------------------------- checks

def check_left_linear(trs):
    for r in trs.rules:
        for v, ps in sorted(r.var_positions.items()):
            if len(ps) > 1:
                return False, (r, v)
    return True, None


def _tree(t: Term, n: int = 0, suffix: str = ""):
    lab = t.labels[n]
    if lab[0] == "?":
        return ("?", lab[1:] + suffix)
    return (lab, tuple(_tree(t, c, suffix) for c in t.kids[n]))


def _walk(s, subst):
    while s[0] == "?" and s[1] in subst:
        s = subst[s[1]]
    return s


def _occurs(v, s, subst):
    s = _walk(s, subst)
    if s[0] == "?":
        return s[1] == v
    return any(_occurs(v, c, subst) for c in s[1])


def unify(a, b) -> bool:
    subst = {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = _walk(x, subst), _walk(y, subst)
        if x == y:
            continue
        if x[0] == "?":
            if _occurs(x[1], y, subst):
                return False
            subst[x[1]] = y
        elif y[0] == "?":
            if _occurs(y[1], x, subst):
                return False
            subst[y[1]] = x
        elif x[0] != y[0] or len(x[1]) != len(y[1]):
            return False
        else:
            stack.extend(zip(x[1], y[1]))
    return True


def _subtree(tree, pos):
    for i in pos:
        tree = tree[1][i]
    return tree


def find_overlap(trs):
    for r1 in trs.rules:
        t1 = _tree(r1.lhs)
        for r2 in trs.rules:
            t2 = _tree(r2.lhs, suffix="'")
            for w in sorted(r1.pattern_positions):
                if r1 is r2 and not w:
                    continue
                if unify(_subtree(t1, w), t2):
                    return r1, r2, w
    return None


def check_orthogonal(trs):
    ok, wit = check_left_linear(trs)
    if not ok:
        return False, ("not-left-linear",) + wit
    ov = find_overlap(trs)
    if ov:
        return False, ("overlap",) + ov
    return True, None


# -------------------------------------------------------------- file format

@dataclass
class TrsFile:
    trs: Trs
    terms: dict = field(default_factory=dict)


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_trs(text: str) -> Trs:
    symbols: list[Symbol] = []
    raw_rules = []
    raw_terms = []
    for ln, line in enumerate(text.splitlines(), 1):
        body = _strip_comment(line)
        stripped = body.strip()
        if not stripped:
            continue
        col0 = len(body) - len(body.lstrip()) + 1
        if stripped.startswith("sig ") or stripped == "sig":
            col = col0 + 3
            for tok in stripped[3:].split():
                col = line.index(tok, col - 1) + 1
                name, sep, ar = tok.partition("/")
                if not sep or not ar.isdigit() or not name.replace("_", "").isalnum():
                    raise ParseError(f"bad symbol declaration {tok!r}", ln, col)
                symbols.append(Symbol(name, int(ar)))
                col += len(tok)
        elif stripped.startswith("rule "):
            rest = body[body.index("rule ") + 5:]
            head, sep, eq = rest.partition(":")
            if not sep:
                raise ParseError("expected ':' after rule name", ln, col0 + 5)
            name = head.strip()
            lhs_s, arrow, rhs_s = eq.partition("->")
            if not arrow:
                raise ParseError("expected '->'", ln, col0 + 5 + len(head) + 1)
            start = len(line) - len(rest) + len(head) + 1
            raw_rules.append((name, lhs_s, rhs_s, ln, start + 1, start + len(lhs_s) + 3))
        elif stripped.startswith("term "):
            rest = body[body.index("term ") + 5:]
            head, sep, expr = rest.partition("=")
            if not sep:
                raise ParseError("expected '=' after term name", ln, col0 + 5)
            start = len(line) - len(rest) + len(head) + 1
            raw_terms.append((head.strip(), expr, ln, start + 1))
        else:
            raise ParseError(f"unknown directive {stripped.split()[0]!r}", ln, col0)
    try:
        sig = Signature(symbols)
    except IrwError as e:
        raise ParseError(e.message, 1, 1) from None
    rules = []
    for name, lhs_s, rhs_s, ln, c1, c2 in raw_rules:
        lhs = parse_term(lhs_s, sig, line=ln, col=c1)
        rhs = parse_term(rhs_s, sig, line=ln, col=c2)
        try:
            rules.append(Rule(name, lhs, rhs))
        except IrwError as e:
            raise ParseError(e.message, ln, c1) from None
    terms = {}
    for name, expr, ln, c in raw_terms:
        terms[name] = parse_term(expr, sig, line=ln, col=c)
    return Trs(sig, rules, terms)


def load_trs(path) -> Trs:
    with open(path, encoding="utf-8") as fh:
        return parse_trs(fh.read())


def make_trs(sig: str, rules: dict, terms: dict | None = None) -> Trs:
    """Convenience constructor: ``make_trs("f/1 a/0", {"r1": "f(x) -> x"})``."""
    lines = ["sig " + sig]
    lines += [f"rule {n}: {r}" for n, r in rules.items()]
    lines += [f"term {n} = {e}" for n, e in (terms or {}).items()]
    return parse_trs("\n".join(lines))
