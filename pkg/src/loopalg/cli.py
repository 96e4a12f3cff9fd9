"""Command line front end.

Exit codes: 0 success, 1 mathematical failure, 2 input or schema error.
"""
from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path

from .equiv import MiuraTransform, pushforward
from .multivec import EpsSeries, check_pencil, schouten_bb
from .serialize import (
    SchemaError, expr_to_doc, parse_infix_list, structure_from_doc, structure_to_doc,
)
from .structures import (
    EXAMPLES, Degenerate, NotSemisimple, RepresentativeMismatch, canonical_coordinates_nls,
    deformation_rep, example, extract_central, make_pair,
)

OK, MATH_FAIL, INPUT_ERROR = 0, 1, 2


class InputError(Exception):
    """Bad command line input; reported with exit code 2."""


def _default_seed() -> int:
    raw = os.environ.get("LOOPALG_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"LOOPALG_SEED must be an integer, got {raw!r}") from None


def _read_json(path: str):
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None


def _emit(doc, out: str | None):
    if out:
        Path(out).write_text(json.dumps(doc, indent=1, ensure_ascii=False, sort_keys=True) + "\n", "utf-8")
    else:
        print(json.dumps(doc, ensure_ascii=False, sort_keys=True))


# --------------------------------------------------------------------------
# check


def _load_pencil(target: str):
    """(ω1 series, ω2 series, available order, label)."""
    if target in EXAMPLES:
        ex = example(target)
        return ex.omega1, ex.omega2, ex.order, target
    doc = _read_json(target)
    parsed = structure_from_doc(doc)
    if parsed[0] == "f":
        _, n, f = parsed
        pair = make_pair(f, labels=doc.get("labels"))
        return EpsSeries({0: pair.omega1}, 0), EpsSeries({0: pair.omega2}, 0), 0, target
    _, n, order, o1, o2 = parsed
    return o1, o2, order, target


def _trivector_doc(T) -> list:
    return [{"i": i, "j": j, "p": p, "k": k, "q": q, "coeff": expr_to_doc(c), "text": str(c)}
            for (i, j, p, k, q), c in T.nonzero_coeffs().items()]


def cmd_check(args) -> int:
    o1, o2, avail, label = _load_pencil(args.target)
    order = avail if args.order is None else args.order
    if order > avail:
        raise InputError(f"{label} is only given through ε^{avail}, cannot check order {order}")
    rep = check_pencil(o1, o2, order)
    if args.format == "json":
        doc = {"target": label, "order": order, "ok": rep.ok,
               "brackets": [{"bracket": name, "eps": m, "zero": T.is_zero(), "coefficients": _trivector_doc(T)}
                            for (name, m), T in sorted(rep.brackets.items(), key=lambda t: (t[0][1], t[0][0]))],
               "not_antisymmetric": [{"kernel": name, "eps": m} for (name, m) in sorted(rep.asymmetry)]}
        _emit(doc, None)
    else:
        print(f"{label}: pencil check through ε^{order} (P = ω1, Q = ω2)")
        for line in rep.lines():
            print("  " + line)
        print("compatible" if rep.ok else "NOT compatible")
    return OK if rep.ok else MATH_FAIL


# --------------------------------------------------------------------------
# deform


def _load_pair(target: str):
    """(hydrodynamic pair, transport transform or None, output labels)."""
    if target == "kdv0":
        return make_pair([1], labels=("u",)), None, ("u",)
    if target == "nls0":
        nc = canonical_coordinates_nls()
        T = MiuraTransform.point_transform(nc.w_of_u, nc.u_of_w)
        return make_pair(nc.f), T, ("w1", "w2")
    doc = _read_json(target)
    parsed = structure_from_doc(doc)
    if parsed[0] != "f":
        raise InputError("deform needs a pair given by f-data, not kernels")
    _, n, f = parsed
    labels = tuple(doc.get("labels") or (f"u{i}" for i in range(1, n + 1)))
    return make_pair(f, labels=labels), None, labels


def cmd_deform(args) -> int:
    pair, T, labels = _load_pair(args.target)
    c = parse_infix_list(args.c, pair.n)
    if len(c) != pair.n:
        raise InputError(f"--c needs {pair.n} comma-separated expressions, got {len(c)}")
    try:
        rep = deformation_rep(pair, c)
    except RepresentativeMismatch as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return MATH_FAIL
    except ValueError as exc:
        raise InputError(str(exc)) from None
    dd = schouten_bb(pair.omega2, rep.Q[2])
    back = extract_central(pair, rep.X)
    round_trip = all((a - b).is_zero() for a, b in zip(back, rep.c))
    checks = [("X has differential-polynomial components", rep.polynomial),
              ("d₂d₁X = 0", dd.is_zero()),
              ("extract_central(X) = c", round_trip)]
    report = [f"{'ok  ' if ok else 'FAIL'} {name}" for name, ok in checks]
    report.append("extracted c: " + ", ".join(str(x) for x in back))
    if args.emit == "rep":
        doc = {"n": pair.n, "labels": list(pair.labels),
               "c": [expr_to_doc(x) for x in rep.c],
               "X": [expr_to_doc(x) for x in rep.X.xi],
               "I": expr_to_doc(rep.I.density), "J": expr_to_doc(rep.J.density),
               "text": {"X": [str(x) for x in rep.X.xi]}}
    else:
        o1 = EpsSeries({0: pair.omega1}, 2)
        o2 = EpsSeries({0: pair.omega2, 2: rep.Q[2]}, 2)
        if T is not None:
            o1, o2 = pushforward(o1, T, 2), pushforward(o2, T, 2)
        doc = structure_to_doc(o1, o2, pair.n, 2, labels)
    _emit(doc, args.out)
    for line in report:
        print(line, file=sys.stderr)
    return OK if all(ok for _, ok in checks) else MATH_FAIL


# --------------------------------------------------------------------------
# verify-paper


def cmd_verify(args) -> int:
    from .cases import run_case
    seed = _default_seed() if args.seed is None else args.seed
    report = run_case(args.case, seed)
    if args.format == "json":
        _emit(dict(report.to_json(), seed=seed), None)
    else:
        print(f"case {args.case} (seed {seed})")
        for chk in report.checks:
            print(f"  {'ok  ' if chk.ok else 'FAIL'} {chk.name}  [{chk.seconds:.2f}s]")
    bad = report.first_failure()
    if bad is not None:
        print(f"first failing identity: {bad.name}", file=sys.stderr)
        for line in (bad.detail or "(no detail)").splitlines():
            print("    " + line, file=sys.stderr)
        return MATH_FAIL
    return OK


# --------------------------------------------------------------------------
# proptest


def cmd_proptest(args) -> int:
    from .properties import SUITES, run_suite
    seed = _default_seed() if args.seed is None else args.seed
    if args.cases < 1:
        raise InputError("--cases must be positive")
    if args.property is not None:
        known = {p for name, s in SUITES.items() if args.suite in ("all", name) for p in s}
        if args.property not in known:
            raise InputError(f"unknown property {args.property!r}")

    def progress(suite, pname, idx, ok):
        if args.verbose:
            print(f"  {suite}/{pname} #{idx}: {'ok' if ok else 'FAIL'}", file=sys.stderr)

    results = run_suite(args.suite, seed, args.cases, progress, args.property, args.index)
    failed = False
    for res in results:
        print(f"suite {res.suite} (seed {seed}, {args.cases} cases per property)")
        for pname, passed in res.counts.items():
            total = 1 if args.index is not None else args.cases
            print(f"  {'ok  ' if passed == total else 'FAIL'} {pname}: {passed}/{total}")
        for pname, idx, detail in res.failures:
            failed = True
            cmd = ["loopalg", "proptest", "--suite", res.suite, "--seed", str(seed),
                   "--cases", str(args.cases), "--property", pname, "--index", str(idx)]
            print(f"  counterexample: {pname} case {idx}" + (f": {detail}" if detail else ""))
            print("  reproduce with: " + " ".join(shlex.quote(x) for x in cmd))
    return MATH_FAIL if failed else OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loopalg", description="Exact bihamiltonian calculus on formal loop spaces.")
    p.add_argument("--regen-golden", action="store_true",
                   help="recompute the golden records (recursion Hamiltonians, solver transforms) and exit")
    p.add_argument("--golden-dir", help="write golden records here instead of the package directory")
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("check", help="check compatibility of a pencil through a given ε-order")
    c.add_argument("target", help=f"built-in name ({', '.join(EXAMPLES)}) or StructureDoc JSON file")
    c.add_argument("--order", type=int, help="ε-order to check (default: as given)")
    c.add_argument("--format", choices=("text", "json"), default="text")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("deform", help="build the deformation representative for central functions c")
    d.add_argument("target", help="kdv0, nls0 or a StructureDoc JSON file with f-data")
    d.add_argument("--c", required=True, help='comma-separated central functions, e.g. "-(u1)^2/24, -(u2)^2/24"')
    d.add_argument("--emit", choices=("rep", "bivector"), default="rep")
    d.add_argument("--out", help="write the document here instead of stdout")
    d.set_defaults(func=cmd_deform)

    v = sub.add_parser("verify-paper", help="run one of the built-in end-to-end verification cases")
    v.add_argument("--case", required=True,
                   choices=("kdv", "ch", "nls-case1", "nls-case2", "ch-recursion", "2ch-recursion"))
    v.add_argument("--seed", type=int, help="seed for randomized sub-checks (default: $LOOPALG_SEED or 0)")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("proptest", help="randomized property suites")
    t.add_argument("--suite", required=True, choices=("brackets", "varcalc", "pushforward", "all"))
    t.add_argument("--seed", type=int, help="base seed (default: $LOOPALG_SEED or 0)")
    t.add_argument("--cases", type=int, default=50)
    t.add_argument("--property", help="run only this property (used by reproduction commands)")
    t.add_argument("--index", type=int, help="run only this case index")
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_proptest)
    return p


def _glue_c(argv: list) -> list:
    # argparse would read a leading minus in "--c -1/24" as another option
    out = []
    it = iter(argv)
    for a in it:
        if a == "--c":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--c={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_c(list(sys.argv[1:] if argv is None else argv)))
    try:
        if args.regen_golden:
            from .golden import write_all
            write_all(args.golden_dir)
            return OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return INPUT_ERROR
        return args.func(args)
    except (InputError, SchemaError, Degenerate, NotSemisimple) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
