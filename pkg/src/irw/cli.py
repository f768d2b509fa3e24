"""Command line front end: ``irw <command> FILE [options]``."""
from __future__ import annotations

import argparse
import contextlib
import io
import json
import shlex
import sys
from pathlib import Path

from . import boehm, develop, reduction
from .term_core import IrwError, format_position, parse_term, render, truncate
from .trs import load_trs

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2
CORPUS_DIR = Path(__file__).with_name("corpus")


class Inconclusive(Exception):
    pass


def _term(trs, text):
    if text is None:
        if len(trs.terms) == 1:
            return next(iter(trs.terms.values()))
        raise IrwError("invalid-argument", "--term is required")
    if text in trs.terms:
        return trs.terms[text]
    return parse_term(text, trs.signature)


def _emit(args, data: dict, text: str):
    if args.json:
        print(json.dumps({"schema": 1, **data}, sort_keys=True))
    else:
        print(text)


def cmd_check(args, trs):
    ll_wit = None
    if not trs.left_linear:
        r, v = trs.linearity_witness
        ll_wit = [r.name, v]
    ll = "yes" if trs.left_linear else "no (rule {}, {})".format(*ll_wit)
    orth_wit = None
    if trs.orthogonal:
        orth = "yes"
    elif trs.orthogonality_witness[0] == "not-left-linear":
        orth = "no (not left-linear)"
        orth_wit = ["not-left-linear"] + ll_wit
    else:
        _, r1, r2, pos = trs.orthogonality_witness
        orth_wit = ["overlap", _name(r1), _name(r2), format_position(pos)]
        orth = "no (overlap {} {} at {})".format(*orth_wit[1:])
    _emit(args, {"left_linear": trs.left_linear, "orthogonal": trs.orthogonal,
                 "left_linear_witness": ll_wit, "orthogonality_witness": orth_wit},
          f"left-linear: {ll}\northogonal: {orth}")


def _name(r):
    return getattr(r, "name", r)


def cmd_reduce(args, trs):
    t = _term(trs, args.term)
    red = reduction.run(trs, t, reduction.strategy_from_spec(args.strategy), args.steps)
    if args.json:
        _emit(args, {"origin": render(red.origin), "steps": red.trace(), "final": render(red.final),
                     "stop_reason": red.stop_reason,
                     "cycle": None if red.cycle is None else list(red.cycle)}, "")
        return
    for st in red.steps:
        print(f"{format_position(st.position)} {st.rule.name} -> {render(st.after)}")
    print(f"stop: {red.stop_reason}")


def cmd_limit(args, trs):
    t = _term(trs, args.term)
    red = reduction.run_certified(trs, t, reduction.strategy_from_spec(args.strategy), args.steps)
    modes = ["strong-p", "weak-p", "strong-m", "weak-m"] if args.mode == "all" else [args.mode]
    outs = [reduction.limit(red, m, args.depth) for m in modes]
    if args.json:
        if len(outs) == 1:
            _emit(args, outs[0].to_json(), "")
        else:
            _emit(args, {"limits": [o.to_json() for o in outs]}, "")
    else:
        for o in outs:
            lim = "diverges" if o.limit is None else render(o.limit)
            print(f"{o.mode}: {lim} [{o.certificate}]")
            for p, v, outer in o.volatile:
                print(f"  volatile {format_position(p)} {v}{' outermost' if outer else ''}")
    if any(o.certificate != "exact-rational" for o in outs):
        raise Inconclusive()


def _redexes(args):
    if args.redexes is None:
        raise IrwError("invalid-argument", "--redexes is required")
    return develop.OccurrenceSet.parse(args.redexes)


def cmd_develop(args, trs):
    t = _term(trs, args.term)
    U = _redexes(args)
    dev = develop.complete_development(trs, t, U, args.depth, args.steps)
    A = develop.build_paths(trs, t, U)
    mt = develop.automaton_term(A)
    lim = None if dev.limit is None else render(dev.limit)
    _emit(args, {"limit": lim, "certificate": dev.outcome.certificate, "matching_term": render(mt),
                 "steps": len(dev.reduction), "automaton_states": len(A.states)},
          lim if lim is not None else "diverges")
    if dev.outcome.certificate != "exact-rational":
        raise Inconclusive()


def cmd_residuals(args, trs):
    t = _term(trs, args.term)
    U = _redexes(args)
    red = reduction.run_certified(trs, t, reduction.strategy_from_spec(args.strategy), args.steps)
    a = sorted(develop.descendants(U, red, args.depth).positions(None, args.depth))
    b = sorted(develop.descendants_via_labels(U, red, args.depth).positions(None, args.depth))
    fmt = [format_position(p) for p in a]
    _emit(args, {"descendants": fmt, "agree": a == b, "depth": args.depth},
          "{" + ", ".join(fmt) + "}" + ("" if a == b else "  (label route disagrees)"))
    if a != b:
        raise IrwError("route-mismatch", "positional and labelled descendants differ")


def cmd_boehm(args, trs):
    t = _term(trs, args.term)
    w = None if args.witness is None else parse_term(args.witness, trs.signature)
    res = boehm.boehm_tree(trs, t, args.depth, args.fuel, w)
    text = render(res.tree)
    if res.positions_unknown:
        text += "\nunknown: " + " ".join(format_position(p) for p in sorted(res.positions_unknown))
    _emit(args, res.to_json(), text)
    if not res.certified:
        raise Inconclusive()


def cmd_join(args, trs):
    t = _term(trs, args.term)
    specs = args.strategy.split("+") if "+" in args.strategy else [args.strategy, "parallel-outermost"]
    results = []
    for spec in specs[:2]:
        lim, ok, _ = boehm.staged_limit(trs, t, reduction.strategy_from_spec(spec), args.steps, args.depth)
        bt = boehm.boehm_tree(trs, lim, args.depth, args.fuel) if lim is not None else None
        results.append((spec, lim, ok and bt is not None and bt.certified, bt))
    (s1, l1, ok1, b1), (s2, l2, ok2, b2) = results
    joinable = b1 is not None and b2 is not None and \
        truncate(b1.tree, args.depth) == truncate(b2.tree, args.depth)
    status = "joinable" if joinable and ok1 and ok2 else ("inconclusive" if not (ok1 and ok2) else "not-joinable")
    _emit(args, {"status": status, "strategies": [s1, s2],
                 "limits": [None if l is None else render(l) for l in (l1, l2)],
                 "common": render(b1.tree) if joinable else None},
          f"{status}" + (f": {render(b1.tree)}" if joinable else ""))
    if status == "inconclusive":
        raise Inconclusive()
    if status == "not-joinable":
        raise IrwError("not-joinable", "the two limits have different Böhm trees")


def cmd_corpus(args):
    root = Path(args.file) if args.file else CORPUS_DIR
    cases_file = root / "cases"
    cases = []
    if cases_file.exists():
        for line in cases_file.read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                name, _, cmd = line.partition(":")
                cases.append((name.strip(), cmd.strip()))
    failed = 0
    for name, cmd in cases:
        argv = shlex.split(cmd)
        argv[1] = str(root / argv[1])
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(io.StringIO()):
            code = main(argv)
        got = buf.getvalue().rstrip("\n")
        exp_path = root / f"{name}.expected"
        want = exp_path.read_text(encoding="utf-8").rstrip("\n") if exp_path.exists() else None
        ok = want is not None and got == want and code != EXIT_ERROR
        failed += not ok
        print(f"{'pass' if ok else 'FAIL'} {name}")
    print(f"{len(cases)} cases, {failed} failed")
    return EXIT_ERROR if failed else EXIT_OK


COMMANDS = {"check": cmd_check, "reduce": cmd_reduce, "limit": cmd_limit, "develop": cmd_develop,
            "residuals": cmd_residuals, "boehm": cmd_boehm, "join": cmd_join}


def _nat(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irw", description="Partial-order infinitary term rewriting.")
    p.add_argument("command", choices=list(COMMANDS) + ["corpus"])
    p.add_argument("file", nargs="?", help="TRS file (corpus: case directory)")
    p.add_argument("--term", help="term name from the file, or a term literal")
    p.add_argument("--strategy", default="outermost",
                   help="outermost | innermost | parallel-outermost | alternating[:s1;s2] | script:pos@rule,...")
    p.add_argument("--steps", type=_nat, default=reduction.DEFAULT_BUDGET, help="step budget")
    p.add_argument("--depth", type=_nat, default=reduction.DEFAULT_DEPTH)
    p.add_argument("--fuel", type=_nat, default=boehm.DEFAULT_FUEL)
    p.add_argument("--mode", default="strong-p", choices=["strong-p", "weak-p", "strong-m", "weak-m", "all"])
    p.add_argument("--redexes", help="occurrence set, e.g. '{0, 1.0}' or '@node:f'")
    p.add_argument("--witness", help="root-active term standing in for bottom")
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=_nat, default=0)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    if args.command == "corpus":
        return cmd_corpus(args)
    try:
        if args.file is None:
            raise IrwError("invalid-argument", "missing TRS file")
        trs = load_trs(args.file)
        COMMANDS[args.command](args, trs)
    except Inconclusive:
        return EXIT_INCONCLUSIVE
    except IrwError as e:
        if args.json:
            print(json.dumps({"schema": 1, "error": {"code": e.code, "message": e.message}}, sort_keys=True))
        else:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        if args.json:
            print(json.dumps({"schema": 1, "error": {"code": "io-error", "message": str(e)}}, sort_keys=True))
        else:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
