"""JSON documents for expressions and structures, plus the ``--c`` parser."""
from __future__ import annotations

import ast
import json
import re
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import jsonschema
from referencing import Registry, Resource

from .multivec import EpsSeries, LocalBivector
from .symexpr import (
    Func, Inv, Jet, JetExpr, Param, Root, const, func, jet, log, param, sqrt,
)

__all__ = [
    "SchemaError", "expr_to_doc", "expr_from_doc", "series_to_doc",
    "structure_to_doc", "structure_from_doc", "parse_infix", "parse_infix_list",
    "validate", "load_schema",
]


class SchemaError(ValueError):
    """Input document does not match the shipped schema or is inconsistent."""


# --------------------------------------------------------------------------
# schemas


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("loopalg").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=None)
def _registry() -> Registry:
    res = []
    for name in ("expr", "structure"):
        s = load_schema(name)
        res.append((s["$id"], Resource.from_contents(s)))
    return Registry().with_resources(res)


def validate(doc, name: str):
    schema = load_schema(name)
    try:
        jsonschema.Draft202012Validator(schema, registry=_registry()).validate(doc)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaError(f"{name} document invalid at '{path}': {exc.message}") from None


# --------------------------------------------------------------------------
# expressions


def _q(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _atom_doc(a):
    if isinstance(a, Jet):
        return {"jet": [a.i, a.s]}
    if isinstance(a, Param):
        return {"param": a.name}
    if isinstance(a, Root):
        return {"root": {"name": a.name, "minpoly": [_q(c) for c in a.minpoly]}}
    if isinstance(a, Func):
        d = {"fn": a.name, "args": [expr_to_doc(x) for x in a.args]}
        if a.derivs and any(a.derivs):
            d["derivs"] = list(a.derivs)
        return d
    if isinstance(a, Inv):
        return {"op": "pow", "args": [expr_to_doc(a.p), -1]}
    raise TypeError(a)


def expr_to_doc(e: JetExpr):
    terms = []
    for m, c in sorted(e.terms.items(), key=lambda t: repr(t[0])):
        factors = []
        for a, k in m:
            d = _atom_doc(a)
            if isinstance(a, Inv):
                d = {"op": "pow", "args": [d["args"][0], -k]}
            elif k != 1:
                d = {"op": "pow", "args": [d, k]}
            factors.append(d)
        if not factors:
            terms.append(_q(c))
        elif c == 1 and len(factors) == 1:
            terms.append(factors[0])
        else:
            terms.append({"op": "mul", "args": ([_q(c)] if c != 1 else []) + factors})
    if not terms:
        return "0"
    if len(terms) == 1:
        return terms[0]
    return {"op": "add", "args": terms}


def _rational(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise SchemaError(f"bad rational '{s}'") from None


def expr_from_doc(d) -> JetExpr:
    if isinstance(d, str):
        return const(_rational(d))
    if isinstance(d, bool) or not isinstance(d, (dict, int)):
        raise SchemaError(f"cannot read expression {d!r}")
    if isinstance(d, int):
        return const(d)
    if "jet" in d:
        i, s = d["jet"]
        return jet(i, s)
    if "param" in d:
        return param(d["param"])
    if "root" in d:
        from .symexpr import root
        r = d["root"]
        return root(r["name"], [_rational(c) for c in r["minpoly"]])
    if "fn" in d:
        args = [expr_from_doc(x) for x in d.get("args", [])]
        name = d["fn"]
        if name == "log":
            return log(args[0])
        if name == "sqrt":
            return sqrt(args[0])
        derivs = tuple(d["derivs"]) if d.get("derivs") else None
        return func(name, *args, derivs=derivs)
    op, args = d.get("op"), d.get("args", [])
    if op == "add":
        out = JetExpr()
        for a in args:
            out = out + expr_from_doc(a)
        return out
    if op == "mul":
        out = const(1)
        for a in args:
            out = out * expr_from_doc(a)
        return out
    if op == "pow":
        base, k = args
        if not isinstance(k, int):
            raise SchemaError("exponents must be integers")
        b = expr_from_doc(base)
        if k < 0 and b.is_zero():
            raise SchemaError("negative power of zero")
        return b ** k
    raise SchemaError(f"unknown expression node {d!r}")


# --------------------------------------------------------------------------
# infix parser for --c strings

_ALLOWED_BIN = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.Pow: "^"}
_VAR = re.compile(r"^u([1-9][0-9]*)$")


def _eval_node(node, n: int | None):
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return const(node.value)
    if isinstance(node, ast.Name):
        m = _VAR.match(node.id)
        if not m:
            raise SchemaError(f"unknown variable '{node.id}' (use u1..un)")
        i = int(m.group(1))
        if n is not None and i > n:
            raise SchemaError(f"variable u{i} exceeds dimension {n}")
        return jet(i)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, n)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BIN:
        a, b = _eval_node(node.left, n), _eval_node(node.right, n)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            if b.is_zero():
                raise SchemaError("division by zero")
            return a / b
        if not b.is_constant() or b.constant_value().denominator != 1:
            raise SchemaError("exponent must be an integer constant")
        return a ** int(b.constant_value())
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        args = [_eval_node(x, n) for x in node.args]
        name = node.func.id
        if name == "log" and len(args) == 1:
            return log(args[0])
        if name == "sqrt" and len(args) == 1:
            return sqrt(args[0])
        if _VAR.match(name):
            raise SchemaError(f"'{name}' is a variable, not a function")
        return func(name, *args)
    raise SchemaError(f"unsupported syntax: {ast.dump(node)[:60]}")


def _parse_tree(text: str):
    src = text.replace("−", "-").replace("^", "**").strip()
    if "**" in text:
        raise SchemaError("use ^ for powers")
    if not src:
        raise SchemaError("empty expression")
    try:
        return ast.parse(src, mode="eval").body
    except SyntaxError as exc:
        raise SchemaError(f"cannot parse '{text}': {exc.msg}") from None


def parse_infix(text: str, n: int | None = None) -> JetExpr:
    tree = _parse_tree(text)
    if isinstance(tree, ast.Tuple):
        raise SchemaError("expected a single expression")
    return _eval_node(tree, n)


def parse_infix_list(text: str, n: int | None = None) -> list:
    tree = _parse_tree(text)
    nodes = tree.elts if isinstance(tree, ast.Tuple) else [tree]
    return [_eval_node(x, n) for x in nodes]


# --------------------------------------------------------------------------
# structures


def series_to_doc(series: EpsSeries, a: int) -> dict:
    comps: dict = {}
    for m, P in series.items():
        for i, j, k, c in P.items():
            if c.is_zero():
                continue
            comps.setdefault(f"{i},{j}", []).append({"k": k, "eps": m, "coeff": expr_to_doc(c)})
    return {"a": a, "components": comps}


def structure_to_doc(omega1: EpsSeries, omega2: EpsSeries, n: int, order: int,
                     labels=None) -> dict:
    doc = {"n": n, "order": order,
           "kernels": [series_to_doc(omega1, 1), series_to_doc(omega2, 2)]}
    if labels:
        doc["labels"] = list(labels)
    return doc


def structure_from_doc(doc: dict):
    """Returns ("f", n, [f^i]) or ("kernels", n, order, ω1 series, ω2 series)."""
    validate(doc, "structure")
    n = doc["n"]
    if "f" in doc:
        f = [expr_from_doc(x) for x in doc["f"]]
        if len(f) != n:
            raise SchemaError("f must have n entries")
        return ("f", n, f)
    order = doc.get("order", 0)
    out = {}
    for kern in doc["kernels"]:
        a = kern["a"]
        if a in out:
            raise SchemaError(f"kernel {a} given twice")
        parts: dict = {}
        for key, entries in kern["components"].items():
            i, j = (int(x) for x in key.split(","))
            if not (1 <= i <= n and 1 <= j <= n):
                raise SchemaError(f"component {key} outside dimension {n}")
            for ent in entries:
                m, k = ent["eps"], ent["k"]
                if m > order:
                    raise SchemaError(f"ε^{m} entry above declared order {order}")
                slot = parts.setdefault(m, {}).setdefault((i, j), {})
                c = expr_from_doc(ent["coeff"])
                slot[k] = slot[k] + c if k in slot else c
        series = EpsSeries({m: LocalBivector(n, e) for m, e in parts.items()}, order)
        if kern.get("skew_complete"):
            series = series.map(lambda P: _complete(P))
        for m, P in series.items():
            if not P.is_antisymmetric():
                raise SchemaError(f"kernel {a} at ε^{m} is not antisymmetric")
        out[a] = series
    if set(out) != {1, 2}:
        raise SchemaError("need kernels a=1 and a=2")
    return ("kernels", n, order, out[1], out[2])


def _complete(P: LocalBivector) -> LocalBivector:
    # upper triangle given; diagonal entries are replaced by their skew part
    if any(i > j for (i, j) in P.entries):
        raise SchemaError("skew_complete kernels list only components i,j with i <= j")
    diag = LocalBivector(P.n, {k: v for k, v in P.entries.items() if k[0] == k[1]})
    off = LocalBivector(P.n, {k: v for k, v in P.entries.items() if k[0] < k[1]})
    return diag.antisymmetrize() + off - off.flip()
