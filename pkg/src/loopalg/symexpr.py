"""Exact expressions in jet variables.

A :class:`JetExpr` is a sparse sum of monomials with rational coefficients.
A monomial is a sorted tuple of ``(atom, exponent)`` pairs; exponents may be
negative.  Atoms are jet variables ``u^{i,s}``, solver parameters, named
algebraic roots, opaque function applications (including ``log`` and
``sqrt``) and reciprocals of non-monomial expressions.

Equality is decided exactly: denominators coming from reciprocal atoms are
cleared and the resulting polynomial is compared term by term.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb, isqrt
from typing import Iterable, Mapping

__all__ = [
    "Atom", "Jet", "Param", "Root", "Func", "Inv", "JetExpr",
    "jet", "const", "param", "func", "log", "sqrt", "root",
    "partial", "total_derivative", "total_derivative_n", "degree_decompose",
    "is_differential_polynomial", "max_jet_order", "substitute", "jet_vars",
    "evaluate", "from_sympy",
]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# --------------------------------------------------------------------------
# atoms


class Atom:
    __slots__ = ("key", "_hash")
    special = False

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other or (isinstance(other, Atom) and self.key == other.key)

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return self.to_str()


class Jet(Atom):
    """The jet variable u^{i,s} (coordinate ``i`` is 1-based)."""

    __slots__ = ("i", "s")

    def __init__(self, i: int, s: int = 0):
        if i < 1 or s < 0:
            raise ValueError(f"bad jet index ({i}, {s})")
        self.i, self.s = i, s
        self.key = (0, i, s)
        self._hash = hash(self.key)

    def to_str(self):
        return f"u{self.i}" if self.s == 0 else f"u{self.i}_{self.s}"


class Param(Atom):
    """A constant unknown; used by the linear solvers."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.key = (1, name)
        self._hash = hash(self.key)

    def to_str(self):
        return self.name


class Root(Atom):
    """Named algebraic constant with a monic defining polynomial.

    ``minpoly`` lists the coefficients low to high, e.g. ``(-3, 0, 1)`` for
    r**2 - 3.
    """

    __slots__ = ("name", "minpoly")
    special = True

    def __init__(self, name: str, minpoly: Iterable):
        mp = tuple(_frac(c) for c in minpoly)
        if len(mp) < 2 or mp[-1] != 1:
            raise ValueError("defining polynomial must be monic of degree >= 1")
        if mp[0] == 0:
            raise ValueError("defining polynomial must have nonzero constant term")
        self.name, self.minpoly = name, mp
        self.key = (2, name, tuple((c.numerator, c.denominator) for c in mp))
        self._hash = hash(self.key)

    @property
    def degree(self):
        return len(self.minpoly) - 1

    def to_str(self):
        return self.name


class Func(Atom):
    """Opaque smooth function applied to expressions.

    ``derivs[k]`` counts partial derivatives taken in argument ``k``.  The
    names ``log`` and ``sqrt`` carry closed-form derivative rules.
    """

    __slots__ = ("name", "args", "derivs")

    def __init__(self, name: str, args: tuple, derivs: tuple | None = None):
        self.name = name
        self.args = tuple(args)
        self.derivs = tuple(derivs) if derivs is not None else (0,) * len(self.args)
        if len(self.derivs) != len(self.args):
            raise ValueError("derivs/args length mismatch")
        self.key = (3, name, self.derivs, tuple(a.key for a in self.args))
        self._hash = hash(self.key)

    @property
    def special(self):
        return self.name == "sqrt"

    def to_str(self):
        if self.name in ("log", "sqrt"):
            return f"{self.name}({self.args[0]})"
        d = "".join(str(k + 1) * n for k, n in enumerate(self.derivs))
        name = f"{self.name}_{d}" if d else self.name
        return f"{name}({', '.join(str(a) for a in self.args)})"


class Inv(Atom):
    """Reciprocal of a non-monomial expression (kept with positive exponent)."""

    __slots__ = ("p",)
    special = True

    def __init__(self, p: "JetExpr"):
        self.p = p
        self.key = (4, p.key)
        self._hash = hash(self.key)

    def to_str(self):
        return f"1/({self.p})"


# --------------------------------------------------------------------------
# expressions

Mono = tuple  # tuple[tuple[Atom, int], ...]


def _mono_key(m: Mono):
    return tuple((a.key, e) for a, e in m)


class JetExpr:
    __slots__ = ("terms", "_key", "_hash")

    def __init__(self, terms: Mapping | None = None):
        # terms must already be normalized; use the module helpers to build
        self.terms = dict(terms) if terms else {}
        self._key = None
        self._hash = None

    # -- construction helpers
    @staticmethod
    def _from_raw(acc: dict) -> "JetExpr":
        out = JetExpr()
        out.terms = {m: c for m, c in acc.items() if c != 0}
        return out

    @property
    def key(self):
        if self._key is None:
            self._key = tuple(sorted(
                (_mono_key(m), (c.numerator, c.denominator)) for m, c in self.terms.items()))
        return self._key

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.canonical().key)
        return self._hash

    # -- predicates
    def is_syntactic_zero(self):
        return not self.terms

    def is_zero(self) -> bool:
        if not self.terms:
            return True
        return not _clear_denominators(self).terms

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if not isinstance(other, JetExpr):
            try:
                other = _coerce(other)
            except TypeError:
                return NotImplemented
        if self.key == other.key:
            return True
        return (self - other).is_zero()

    def is_constant(self):
        return all(not m for m in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def is_monomial(self):
        return len(self.terms) == 1

    def atoms(self) -> set:
        out = set()
        for m in self.terms:
            for a, _ in m:
                out.add(a)
        return out

    # -- arithmetic
    def __add__(self, other):
        other = _coerce(other)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, 0) + c
        return JetExpr._from_raw(acc)

    __radd__ = __add__

    def __neg__(self):
        return JetExpr._from_raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return JetExpr()
            return JetExpr._from_raw({m: c * other for m, c in self.terms.items()})
        other = _coerce(other)
        if len(other.terms) == 1 and () in other.terms:
            return self * other.terms[()]
        if len(self.terms) == 1 and () in self.terms:
            return other * self.terms[()]
        acc: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                _mul_mono_into(acc, m1, m2, c1 * c2)
        return JetExpr._from_raw(acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / _frac(other))
        return self * _coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return _coerce(other) * self.reciprocal()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("only integer powers")
        if k == 0:
            return const(1)
        if k < 0:
            return self.reciprocal() ** (-k)
        if len(self.terms) == 1:
            (m, c), = self.terms.items()
            acc: dict = {}
            _add_mono(acc, {a: e * k for a, e in m}, c ** k)
            return JetExpr._from_raw(acc)
        out, base = const(1), self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def reciprocal(self) -> "JetExpr":
        if not self.terms:
            raise ZeroDivisionError("reciprocal of zero expression")
        if len(self.terms) == 1:
            (m, c), = self.terms.items()
            acc: dict = {}
            _add_mono(acc, {a: -e for a, e in m}, 1 / c)
            return JetExpr._from_raw(acc)
        lead, content, prim = _content_split(self)
        inv = JetExpr({((Inv(prim), 1),): Fraction(1)})
        acc = {}
        _add_mono(acc, {a: -e for a, e in content}, 1 / lead)
        return inv * JetExpr._from_raw(acc)

    # -- canonical form
    def canonical(self) -> "JetExpr":
        """Single-fraction form with common polynomial factors cancelled."""
        return _canonical(self)

    # -- printing
    def __repr__(self):
        return f"JetExpr({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for mk, m, c in sorted(((_mono_key(m), m, c) for m, c in self.terms.items()),
                               key=lambda t: t[0]):
            fac = []
            for a, e in m:
                s = a.to_str()
                if isinstance(a, (Func, Inv)) or e < 0 or e > 1:
                    if e != 1:
                        s = f"{s}^{e}" if not isinstance(a, Inv) else f"({s})^{e}"
                fac.append(s)
            if not fac:
                parts.append(str(c))
            elif c == 1:
                parts.append("*".join(fac))
            elif c == -1:
                parts.append("-" + "*".join(fac))
            else:
                parts.append(f"{c}*" + "*".join(fac))
        return " + ".join(parts).replace("+ -", "- ")

    def coefficient(self, m: Mono) -> Fraction:
        return self.terms.get(m, Fraction(0))


def _coerce(x) -> JetExpr:
    if isinstance(x, JetExpr):
        return x
    if isinstance(x, (int, Fraction)):
        return const(x)
    if isinstance(x, Atom):
        return JetExpr({((x, 1),): Fraction(1)})
    raise TypeError(f"cannot coerce {type(x).__name__} to JetExpr")


def _mul_mono_into(acc: dict, m1: Mono, m2: Mono, c: Fraction):
    if not m1:
        acc[m2] = acc.get(m2, 0) + c
        return
    if not m2:
        acc[m1] = acc.get(m1, 0) + c
        return
    d = dict(m1)
    special = False
    for a, e in m2:
        d[a] = d.get(a, 0) + e
        if a.special:
            special = True
    if not special:
        items = tuple(sorted(((a, e) for a, e in d.items() if e), key=lambda t: t[0].key))
        acc[items] = acc.get(items, 0) + c
        return
    _add_mono(acc, d, c)


def _add_mono(acc: dict, d: dict, c: Fraction):
    """Add c * prod(a**e) to acc, applying the rewrite rules."""
    plain = []
    extra = None  # JetExpr factor from rewrites
    for a, e in d.items():
        if e == 0:
            continue
        if isinstance(a, Func) and a.name == "sqrt":
            q, r = divmod(e, 2)
            if r:
                plain.append((a, 1))
            if q:
                f = a.args[0] ** q
                extra = f if extra is None else extra * f
        elif isinstance(a, Root) and not 0 < e < a.degree:
            f = _root_power(a, e)
            extra = f if extra is None else extra * f
        elif isinstance(a, Inv) and e < 0:
            f = a.p ** (-e)
            extra = f if extra is None else extra * f
        else:
            plain.append((a, e))
    mono = tuple(sorted(plain, key=lambda t: t[0].key))
    if extra is None:
        acc[mono] = acc.get(mono, 0) + c
        return
    for m2, c2 in extra.terms.items():
        _mul_mono_into(acc, mono, m2, c * c2)


@lru_cache(maxsize=None)
def _root_power_coeffs(r: Root, e: int) -> tuple:
    """Coefficients (low to high, length deg) of r**e reduced mod minpoly."""
    d = r.degree
    mp = r.minpoly
    if e >= 0:
        poly = [Fraction(0)] * d
        if e < d:
            poly[e] = Fraction(1)
            return tuple(poly)
        prev = _root_power_coeffs(r, e - 1)
        # multiply by r and reduce r**d = -sum(mp[k] r**k)
        top = prev[-1]
        shifted = [Fraction(0)] + list(prev[:-1])
        return tuple(shifted[k] - top * mp[k] for k in range(d))
    # r**-1 = -(r**(d-1) + mp[d-1] r**(d-2) + ... + mp[1]) / mp[0]
    inv = [-(mp[k + 1]) / mp[0] for k in range(d)]
    inv[d - 1] = -Fraction(1) / mp[0]
    inv = tuple(inv)
    if e == -1:
        return inv
    prev = _root_power_coeffs(r, e + 1)
    out = [Fraction(0)] * d
    for i, ci in enumerate(prev):
        if not ci:
            continue
        for j, cj in enumerate(inv):
            if not cj:
                continue
            for k, ck in enumerate(_root_power_coeffs(r, i + j)):
                out[k] += ci * cj * ck
    return tuple(out)


def _root_power(r: Root, e: int) -> JetExpr:
    acc = {}
    for k, c in enumerate(_root_power_coeffs(r, e)):
        if c:
            acc[((r, k),) if k else ()] = c
    return JetExpr._from_raw(acc)


def _content_split(e: JetExpr):
    """Write e = lead * content_monomial * prim with prim primitive."""
    monos = list(e.terms)
    mins: dict = {}
    first = True
    for m in monos:
        md = dict(m)
        if first:
            mins = dict(md)
            first = False
            continue
        for a in list(mins):
            v = md.get(a, 0)
            if v < mins[a]:
                mins[a] = v
        for a, v in md.items():
            if a not in mins and v < 0:
                mins[a] = v
    for m in monos:  # atoms missing in some monomial have exponent 0 there
        md = dict(m)
        for a in list(mins):
            if a not in md and mins[a] > 0:
                mins[a] = 0
    content = tuple(sorted(((a, v) for a, v in mins.items() if v), key=lambda t: t[0].key))
    cd = dict(content)
    lead_m = min(monos, key=_mono_key)
    lead = e.terms[lead_m]
    acc = {}
    for m, c in e.terms.items():
        md = dict(m)
        for a, v in cd.items():
            md[a] = md.get(a, 0) - v
        mono = tuple(sorted(((a, v) for a, v in md.items() if v), key=lambda t: t[0].key))
        acc[mono] = acc.get(mono, 0) + c / lead
    return lead, content, JetExpr._from_raw(acc)


def _clear_denominators(e: JetExpr) -> JetExpr:
    """Multiply e by a nonzero product of Inv polynomials so no Inv remains."""
    for _ in range(64):
        maxe: dict = {}
        for m in e.terms:
            for a, k in m:
                if isinstance(a, Inv) and k > maxe.get(a, 0):
                    maxe[a] = k
        if not maxe:
            return e
        # clear the largest-key Inv first; nested Inv inside p is handled next round
        a = max(maxe, key=lambda t: t.key)
        K = maxe[a]
        powers = {}
        acc: dict = {}
        for m, c in e.terms.items():
            d = dict(m)
            k = d.pop(a, 0)
            if K - k not in powers:
                powers[K - k] = a.p ** (K - k)
            base: dict = {}
            _add_mono(base, d, c)
            for m1, c1 in base.items():
                for m2, c2 in powers[K - k].terms.items():
                    _mul_mono_into(acc, m1, m2, c1 * c2)
        e = JetExpr._from_raw(acc)
    raise RuntimeError("denominator clearing did not terminate")


# --------------------------------------------------------------------------
# canonical form: common denominator with exact cancellation


def _canonical(e: JetExpr) -> JetExpr:
    if not any(isinstance(a, Inv) for m in e.terms for a, _ in m):
        return e
    invs: dict = {}
    for m in e.terms:
        for a, k in m:
            if isinstance(a, Inv) and k > invs.get(a, 0):
                invs[a] = k
    if any(isinstance(b, Inv) for a in invs for b in a.p.atoms()):
        return e
    num = _clear_denominators(e)
    for a in sorted(invs, key=lambda t: t.key):
        if any(isinstance(b, (Root,)) or (isinstance(b, Func) and b.name == "sqrt")
               for b in a.p.atoms()):
            continue
        while invs[a] > 0:
            q = _exact_div(num, a.p)
            if q is None:
                break
            num = q
            invs[a] -= 1
    out = num
    for a, k in invs.items():
        if k:
            out = out * JetExpr({((a, k),): Fraction(1)})
    return out


def _exact_div(n: JetExpr, p: JetExpr):
    """Exact quotient n / p treating p's atoms as polynomial variables."""
    if not n.terms:
        return JetExpr()
    pvars = sorted(p.atoms(), key=lambda a: a.key)
    pset = set(pvars)
    # shift so every exponent of p's atoms in n is nonnegative
    shift = {a: 0 for a in pvars}
    for m in n.terms:
        for a, k in m:
            if a in pset and k < shift[a]:
                shift[a] = k
    for m in p.terms:
        if any(k < 0 for _, k in m):
            return None

    num = {}
    for m, c in n.terms.items():
        md = dict(m)
        vexp = tuple(md.get(a, 0) - shift[a] for a in pvars)
        rest = tuple((a, k) for a, k in m if a not in pset)
        num[(vexp, rest)] = num.get((vexp, rest), 0) + c
    den = {}
    for m, c in p.terms.items():
        md = dict(m)
        den[(tuple(md.get(a, 0) for a in pvars), ())] = c
    dl = max(den, key=lambda t: t[0])
    dlv, dlc = dl[0], den[dl]
    quot = {}
    for _ in range(100000):
        num = {k: c for k, c in num.items() if c}
        if not num:
            break
        # leading term in the p-variables, ties broken by rest key
        top = max(num, key=lambda t: (t[0], _mono_key(t[1])))
        tv, trest = top
        qv = tuple(a - b for a, b in zip(tv, dlv))
        if any(x < 0 for x in qv):
            return None
        qc = num[top] / dlc
        quot[(qv, trest)] = quot.get((qv, trest), 0) + qc
        for (dv, _), dc in den.items():
            k = (tuple(a + b for a, b in zip(qv, dv)), trest)
            num[k] = num.get(k, 0) - qc * dc
    else:
        return None
    acc = {}
    for (qv, rest), c in quot.items():
        d = dict(rest)
        for a, v, s in zip(pvars, qv, (shift[a] for a in pvars)):
            if v + s:
                d[a] = d.get(a, 0) + v + s
        _add_mono(acc, d, c)
    return JetExpr._from_raw(acc)


# --------------------------------------------------------------------------
# constructors


def const(c) -> JetExpr:
    c = _frac(c)
    return JetExpr({(): c}) if c else JetExpr()


def jet(i: int, s: int = 0) -> JetExpr:
    return JetExpr({((Jet(i, s), 1),): Fraction(1)})


def param(name: str) -> JetExpr:
    return JetExpr({((Param(name), 1),): Fraction(1)})


def root(name: str, minpoly: Iterable) -> JetExpr:
    r = Root(name, minpoly)
    return _root_power(r, 1)


def func(name: str, *args, derivs: tuple | None = None) -> JetExpr:
    if name in ("log", "sqrt"):
        raise ValueError(f"use {name}() for the built-in {name}")
    args = tuple(_coerce(a).canonical() for a in args)
    return _coerce(Func(name, args, derivs))


def log(a) -> JetExpr:
    a = _coerce(a).canonical()
    if a.is_constant() and a.constant_value() == 1:
        return JetExpr()
    if a.is_syntactic_zero():
        raise ValueError("log(0)")
    return _coerce(Func("log", (a,)))


def sqrt(a) -> JetExpr:
    a = _coerce(a).canonical()
    if a.is_constant():
        v = a.constant_value()
        if v >= 0:
            n, d = isqrt(v.numerator), isqrt(v.denominator)
            if n * n == v.numerator and d * d == v.denominator:
                return const(Fraction(n, d))
    elif len(a.terms) > 1:
        r = _polynomial_sqrt(a)
        if r is not None:
            return r
    return _coerce(Func("sqrt", (a,)))


def _rational_sqrt(v: Fraction):
    if v < 0:
        return None
    n, d = isqrt(v.numerator), isqrt(v.denominator)
    if n * n == v.numerator and d * d == v.denominator:
        return Fraction(n, d)
    return None


def _polynomial_sqrt(a: "JetExpr"):
    """Principal square root of a perfect-square jet polynomial, else None.

    The branch is the one whose factors sympy normalizes to a positive
    leading coefficient (so sqrt((u1-u2)^2) = u1 - u2).
    """
    if any(not isinstance(x, Jet) for x in a.atoms()):
        return None
    if any(k < 0 for m in a.terms for _, k in m):
        return None
    import sympy

    syms = {v: sympy.Symbol(f"j_{v.i}_{v.s}") for v in a.atoms()}
    back = {s: jet(v.i, v.s) for v, s in syms.items()}
    expr = sum(sympy.Rational(c.numerator, c.denominator)
               * sympy.Mul(*[syms[x] ** k for x, k in m]) for m, c in a.terms.items())
    c, factors = sympy.factor_list(expr)
    rc = _rational_sqrt(Fraction(int(sympy.numer(c)), int(sympy.denom(c))))
    if rc is None or any(k % 2 for _, k in factors):
        return None
    out = const(rc)
    for fac, k in factors:
        out = out * from_sympy(fac, back) ** (k // 2)
    return out


def from_sympy(expr, back: Mapping) -> "JetExpr":
    """Convert a sympy polynomial expression back using a symbol map."""
    import sympy

    expr = sympy.expand(expr)
    out = JetExpr()
    for term in sympy.Add.make_args(expr):
        coeff, rest = term.as_coeff_Mul()
        t = const(Fraction(int(sympy.numer(coeff)), int(sympy.denom(coeff))))
        for f in sympy.Mul.make_args(rest):
            if f == 1:
                continue
            base, e = f.as_base_exp()
            t = t * back[base] ** int(e)
        out = out + t
    return out


# --------------------------------------------------------------------------
# differentiation


def _atom_jets(a: Atom) -> frozenset:
    return _atom_jets_cached(a)


@lru_cache(maxsize=None)
def _atom_jets_cached(a: Atom) -> frozenset:
    if isinstance(a, Jet):
        return frozenset([a])
    if isinstance(a, Func):
        out = set()
        for arg in a.args:
            for b in arg.atoms():
                out |= _atom_jets_cached(b)
        return frozenset(out)
    if isinstance(a, Inv):
        out = set()
        for b in a.p.atoms():
            out |= _atom_jets_cached(b)
        return frozenset(out)
    return frozenset()


def _atom_partial(a: Atom, v: Jet) -> JetExpr:
    return _atom_partial_cached(a, v)


@lru_cache(maxsize=None)
def _atom_partial_cached(a: Atom, v: Jet) -> JetExpr:
    if isinstance(a, Jet):
        return const(1) if a == v else JetExpr()
    if v not in _atom_jets(a):
        return JetExpr()
    if isinstance(a, Func):
        if a.name == "log":
            return partial(a.args[0], v) * a.args[0].reciprocal()
        if a.name == "sqrt":
            return partial(a.args[0], v) * _coerce(a).reciprocal() * Fraction(1, 2)
        out = JetExpr()
        for k, arg in enumerate(a.args):
            da = partial(arg, v)
            if da.terms:
                dv = list(a.derivs)
                dv[k] += 1
                out = out + _coerce(Func(a.name, a.args, tuple(dv))) * da
        return out
    if isinstance(a, Inv):
        return -(_coerce(a) ** 2) * partial(a.p, v)
    return JetExpr()


def partial(e: JetExpr, v) -> JetExpr:
    """Partial derivative with respect to the jet variable ``v``."""
    if isinstance(v, JetExpr):
        (m, _), = v.terms.items()
        v = m[0][0]
    acc: dict = {}
    for m, c in e.terms.items():
        for idx, (a, k) in enumerate(m):
            if isinstance(a, Jet):
                if a != v:
                    continue
                da = None
            elif v not in _atom_jets(a):
                continue
            else:
                da = _atom_partial(a, v)
                if not da.terms:
                    continue
            d = dict(m)
            d[a] = k - 1
            if da is None:
                _add_mono(acc, d, c * k)
            else:
                base: dict = {}
                _add_mono(base, d, c * k)
                for m1, c1 in base.items():
                    for m2, c2 in da.terms.items():
                        _mul_mono_into(acc, m1, m2, c1 * c2)
    return JetExpr._from_raw(acc)


@lru_cache(maxsize=None)
def _atom_total_derivative(a: Atom) -> JetExpr:
    if isinstance(a, Jet):
        return jet(a.i, a.s + 1)
    if isinstance(a, (Param, Root)):
        return JetExpr()
    if isinstance(a, Func):
        if a.name == "log":
            return total_derivative(a.args[0]) * a.args[0].reciprocal()
        if a.name == "sqrt":
            return total_derivative(a.args[0]) * _coerce(a).reciprocal() * Fraction(1, 2)
        out = JetExpr()
        for k, arg in enumerate(a.args):
            da = total_derivative(arg)
            if da.terms:
                dv = list(a.derivs)
                dv[k] += 1
                out = out + _coerce(Func(a.name, a.args, tuple(dv))) * da
        return out
    if isinstance(a, Inv):
        return -(_coerce(a) ** 2) * total_derivative(a.p)
    raise TypeError(a)


def total_derivative(e: JetExpr) -> JetExpr:
    """The total x-derivative sum_{i,s} (de/du^{i,s}) u^{i,s+1}."""
    acc: dict = {}
    for m, c in e.terms.items():
        for a, k in m:
            if isinstance(a, Jet):
                d = dict(m)
                d[a] = k - 1
                nxt = Jet(a.i, a.s + 1)
                d[nxt] = d.get(nxt, 0) + 1
                _add_mono(acc, d, c * k)
                continue
            da = _atom_total_derivative(a)
            if not da.terms:
                continue
            d = dict(m)
            d[a] = k - 1
            base: dict = {}
            _add_mono(base, d, c * k)
            for m1, c1 in base.items():
                for m2, c2 in da.terms.items():
                    _mul_mono_into(acc, m1, m2, c1 * c2)
    return JetExpr._from_raw(acc)


def total_derivative_n(e: JetExpr, n: int) -> JetExpr:
    for _ in range(n):
        e = total_derivative(e)
    return e


# --------------------------------------------------------------------------
# structure queries


def jet_vars(e: JetExpr) -> set:
    out = set()
    for a in e.atoms():
        out |= _atom_jets(a)
    return out


def max_jet_order(e: JetExpr, i: int | None = None) -> int:
    """Highest jet order present (-1 if no jets), optionally for coordinate i."""
    orders = [v.s for v in jet_vars(e) if i is None or v.i == i]
    return max(orders, default=-1)


def _atom_degree(a: Atom):
    if isinstance(a, Jet):
        return Fraction(a.s)
    if isinstance(a, (Param, Root)):
        return Fraction(0)
    if isinstance(a, Func):
        if a.name == "log":
            return Fraction(0)
        if a.name == "sqrt":
            d = _homogeneous_degree(a.args[0])
            return None if d is None else d / 2
        if all(v.s == 0 for v in _atom_jets(a)):
            return Fraction(0)
        return None
    if isinstance(a, Inv):
        d = _homogeneous_degree(a.p)
        return None if d is None else -d
    return None


def _mono_degree(m: Mono):
    total = Fraction(0)
    for a, k in m:
        d = _atom_degree(a)
        if d is None:
            return None
        total += d * k
    return total


def _homogeneous_degree(e: JetExpr):
    degs = {_mono_degree(m) for m in e.terms}
    if len(degs) == 1:
        return degs.pop()
    return None if e.terms else Fraction(0)


def degree_decompose(e: JetExpr) -> dict:
    """Split into homogeneous parts, deg u^{i,s} = s and deg log = 0."""
    parts: dict = {}
    for m, c in e.terms.items():
        d = _mono_degree(m)
        if d is None:
            raise ValueError(f"monomial without a well-defined degree in {e}")
        d = int(d) if d.denominator == 1 else d
        parts.setdefault(d, {})[m] = c
    return {d: JetExpr._from_raw(t) for d, t in sorted(parts.items())}


def is_differential_polynomial(e: JetExpr) -> bool:
    for m in e.canonical().terms:
        for a, k in m:
            if isinstance(a, Jet):
                if a.s >= 1 and k < 0:
                    return False
            elif isinstance(a, (Func, Inv)):
                if any(v.s >= 1 for v in _atom_jets(a)):
                    return False
    return True


# --------------------------------------------------------------------------
# substitution


def substitute(e: JetExpr, images: Mapping[int, JetExpr], params: Mapping[str, JetExpr] | None = None) -> JetExpr:
    """Replace u^i by images[i] (jets by the corresponding total derivatives)."""
    images = {i: _coerce(v) for i, v in images.items()}
    params = {k: _coerce(v) for k, v in (params or {}).items()}
    jet_cache: dict = {}
    atom_cache: dict = {}

    def jet_image(a: Jet):
        if a not in jet_cache:
            if a.i not in images:
                jet_cache[a] = _coerce(a)
            elif a.s == 0:
                jet_cache[a] = images[a.i]
            else:
                jet_cache[a] = total_derivative(jet_image(Jet(a.i, a.s - 1)))
        return jet_cache[a]

    def atom_image(a: Atom) -> JetExpr:
        if a in atom_cache:
            return atom_cache[a]
        if isinstance(a, Jet):
            r = jet_image(a)
        elif isinstance(a, Param):
            r = params.get(a.name, _coerce(a))
        elif isinstance(a, Root):
            r = _coerce(a)
        elif isinstance(a, Func):
            args = tuple(substitute(x, images, params) for x in a.args)
            if a.name == "log":
                r = log(args[0])
            elif a.name == "sqrt":
                r = sqrt(args[0])
            else:
                r = func(a.name, *args, derivs=a.derivs)
        elif isinstance(a, Inv):
            r = substitute(a.p, images, params).reciprocal()
        else:
            raise TypeError(a)
        atom_cache[a] = r
        return r

    out = JetExpr()
    for m, c in e.terms.items():
        t = const(c)
        for a, k in m:
            t = t * (atom_image(a) ** k)
        out = out + t
    return out


# --------------------------------------------------------------------------
# numerical evaluation


def evaluate(e: JetExpr, jets: Mapping, params: Mapping | None = None):
    """Evaluate numerically; ``jets`` maps (i, s) to numbers or numpy arrays.

    Opaque functions and roots without a value in ``params`` are rejected.
    """
    import numpy as np

    params = params or {}
    cache: dict = {}

    def atom_value(a: Atom):
        if a in cache:
            return cache[a]
        if isinstance(a, Jet):
            v = jets[(a.i, a.s)]
        elif isinstance(a, (Param, Root)):
            if a.name in params:
                v = params[a.name]
            elif isinstance(a, Root) and a.degree == 2 and a.minpoly[1] == 0 and -a.minpoly[0] > 0:
                v = float(np.sqrt(float(-a.minpoly[0])))
            else:
                raise ValueError(f"no value for {a.name}")
        elif isinstance(a, Func) and a.name in ("log", "sqrt"):
            arg = evaluate(a.args[0], jets, params)
            v = np.log(arg) if a.name == "log" else np.sqrt(arg)
        elif isinstance(a, Inv):
            v = 1.0 / evaluate(a.p, jets, params)
        else:
            raise ValueError(f"cannot evaluate opaque atom {a}")
        cache[a] = v
        return v

    total = 0.0
    for m, c in e.terms.items():
        t = float(c)
        for a, k in m:
            t = t * atom_value(a) ** k
        total = total + t
    return total
