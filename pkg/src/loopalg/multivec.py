"""Local multivectors and the Schouten-Nijenhuis bracket.

A local bivector with components sum_k A^{ij}_k(x) δ^(k)(x-y) is stored as
the matrix differential operator (A f)^i = sum_{j,k} A^{ij}_k ∂^k f_j.  Its
transpose P^{ji}(y, x), re-expressed with coefficients at x, is the formal
adjoint, so antisymmetry reads P* = -P.

A local trivector is stored through its trilinear form on test covectors

    T(a, b, c) = ∫ sum B^{ijk}_{pq} a_i ∂^p b_j ∂^q c_k dx,

which is the pairing with δ^(p)(x-y) δ^(q)(x-z).  Derivatives are always
moved off the first slot, which makes the representation unique.

Bracket normalization (frozen): for a skew operator P and local functionals
F, G, H,

    pairing(schouten_bb(P, P), F, G, H) = 2 * ({{F,G},H} + {{G,H},F} + {{H,F},G})

with {F, G} = ∫ δF/δu^i (P δG/δu)^i dx.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from math import comb, factorial
from typing import Callable, Iterable

from .symexpr import (
    Func, Jet, JetExpr, const, degree_decompose, jet_vars, partial,
    total_derivative, total_derivative_n,
)
from .varcalc import LocalFunctional, euler, gradient

__all__ = [
    "DiffOp", "LocalBivector", "EvoField", "LocalTrivector", "EpsSeries",
    "Pencil", "PencilReport", "frechet", "commutator", "ham_vf", "lie_bivector",
    "schouten_bb", "pairing", "poisson_bracket", "jacobiator", "check_pencil",
    "bivector_from_upper",
]


def _dn(e: JetExpr, n: int, cache: dict | None = None) -> JetExpr:
    if cache is None:
        return total_derivative_n(e, n)
    key = (id(e), n)
    if key not in cache:
        cache[key] = (e, e if n == 0 else total_derivative(_dn(e, n - 1, cache)))
    return cache[key][1]


# --------------------------------------------------------------------------
# matrix differential operators


class DiffOp:
    """n x n matrix of scalar differential operators sum_k a_k ∂^k."""

    __slots__ = ("n", "entries")

    def __init__(self, n: int, entries: dict | None = None):
        self.n = n
        clean = {}
        for (i, j), ops in (entries or {}).items():
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValueError(f"index ({i},{j}) outside dimension {n}")
            ops = {k: c for k, c in ops.items() if not c.is_syntactic_zero()}
            if ops:
                clean[(i, j)] = ops
        self.entries = clean

    # -- basic access
    def coeff(self, i: int, j: int, k: int) -> JetExpr:
        return self.entries.get((i, j), {}).get(k, JetExpr())

    def order(self) -> int:
        return max((k for ops in self.entries.values() for k in ops), default=-1)

    def items(self):
        for (i, j), ops in sorted(self.entries.items()):
            for k, c in sorted(ops.items()):
                yield i, j, k, c

    def _combine(self, other, sign):
        acc = {key: dict(ops) for key, ops in self.entries.items()}
        for key, ops in other.entries.items():
            slot = acc.setdefault(key, {})
            for k, c in ops.items():
                slot[k] = slot[k] + c * sign if k in slot else c * sign
        return type(self)(max(self.n, other.n), acc)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c) -> "DiffOp":
        return type(self)(self.n, {key: {k: v * c for k, v in ops.items()}
                                   for key, ops in self.entries.items()})

    __mul__ = scale
    __rmul__ = scale

    def map_coeffs(self, fn: Callable) -> "DiffOp":
        return type(self)(self.n, {key: {k: fn(v) for k, v in ops.items()}
                                   for key, ops in self.entries.items()})

    def is_zero(self) -> bool:
        return all(c.is_zero() for _, _, _, c in self.items())

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    # -- operator algebra
    def compose(self, other: "DiffOp") -> "DiffOp":
        n = max(self.n, other.n)
        acc: dict = {}
        cache: dict = {}
        for (i, l), a_ops in self.entries.items():
            for (l2, j), b_ops in other.entries.items():
                if l != l2:
                    continue
                slot = acc.setdefault((i, j), {})
                for m, a in a_ops.items():
                    for p, b in b_ops.items():
                        for r in range(m + 1):
                            t = a * _dn(b, r, cache) * comb(m, r)
                            k = m - r + p
                            slot[k] = slot[k] + t if k in slot else t
        return DiffOp(n, acc)

    def adjoint(self) -> "DiffOp":
        """Formal adjoint: (A*)^{ij} = sum_k (-∂)^k ∘ A^{ji}_k."""
        acc: dict = {}
        for (j, i), ops in self.entries.items():
            slot = acc.setdefault((i, j), {})
            for k, a in ops.items():
                sign = -1 if k % 2 else 1
                da = a
                for l in range(k, -1, -1):
                    # term binom(k,l) D^{k-l}(a) ∂^l
                    dd = total_derivative_n(a, k - l) if k - l else a
                    t = dd * (sign * comb(k, l))
                    slot[l] = slot[l] + t if l in slot else t
        return type(self)(self.n, acc)

    def apply(self, v: Iterable[JetExpr]) -> list:
        v = list(v)
        out = [JetExpr() for _ in range(self.n)]
        cache: dict = {}
        for (i, j), ops in self.entries.items():
            for k, a in ops.items():
                out[i - 1] = out[i - 1] + a * _dn(v[j - 1], k, cache)
        return out

    def frechet_along(self, w: Iterable[JetExpr]) -> "DiffOp":
        """Directional derivative of the coefficients along the field w."""
        w = list(w)
        cache: dict = {}
        acc: dict = {}
        for (i, j), ops in self.entries.items():
            slot = {}
            for k, a in ops.items():
                t = JetExpr()
                for v in jet_vars(a):
                    t = t + partial(a, v) * _dn(w[v.i - 1], v.s, cache)
                slot[k] = t
            acc[(i, j)] = slot
        return type(self)(self.n, acc)

    def __str__(self):
        lines = []
        for (i, j), ops in sorted(self.entries.items()):
            terms = [f"({c})δ^({k})" for k, c in sorted(ops.items()) if not c.is_syntactic_zero()]
            if terms:
                lines.append(f"[{i},{j}]: " + " + ".join(terms))
        return "\n".join(lines) if lines else "0"

    __repr__ = __str__


class LocalBivector(DiffOp):
    """Bivector kernel in normal form (all coefficients at x)."""

    __slots__ = ()

    def flip(self) -> "LocalBivector":
        return self.adjoint()

    def is_antisymmetric(self) -> bool:
        return (self + self.flip()).is_zero()

    def antisymmetrize(self) -> "LocalBivector":
        return (self - self.flip()).scale(Fraction(1, 2))


def bivector_from_upper(n: int, entries: dict) -> LocalBivector:
    """Complete a bivector from its (i <= j) components by antisymmetry."""
    upper = {k: v for k, v in entries.items() if k[0] <= k[1]}
    diag = LocalBivector(n, {k: v for k, v in upper.items() if k[0] == k[1]})
    off = LocalBivector(n, {k: v for k, v in upper.items() if k[0] < k[1]})
    return diag + off - off.flip()


def frechet(xi: Iterable[JetExpr], n: int | None = None) -> DiffOp:
    """Fréchet derivative operator (ξ')^i_k = sum_t ∂ξ^i/∂u^{k,t} ∂^t."""
    xi = list(xi)
    n = len(xi) if n is None else n
    acc: dict = {}
    for i, x in enumerate(xi, start=1):
        for v in jet_vars(x):
            slot = acc.setdefault((i, v.i), {})
            d = partial(x, v)
            slot[v.s] = slot[v.s] + d if v.s in slot else d
    return DiffOp(n, acc)


# --------------------------------------------------------------------------
# vector fields


@dataclass(frozen=True)
class EvoField:
    """Evolutionary vector field given by its characteristics."""

    xi: tuple

    def __init__(self, xi: Iterable):
        object.__setattr__(self, "xi", tuple(xi))

    @property
    def n(self):
        return len(self.xi)

    def __add__(self, other):
        return EvoField(a + b for a, b in zip(self.xi, other.xi))

    def __sub__(self, other):
        return EvoField(a - b for a, b in zip(self.xi, other.xi))

    def __neg__(self):
        return EvoField(-a for a in self.xi)

    def scale(self, c):
        return EvoField(a * c for a in self.xi)

    def is_zero(self):
        return all(a.is_zero() for a in self.xi)

    def __eq__(self, other):
        if not isinstance(other, EvoField):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def __str__(self):
        return "(" + ", ".join(str(a) for a in self.xi) + ")"


def _as_components(x) -> list:
    return list(x.xi) if isinstance(x, EvoField) else list(x)


def commutator(xi, eta) -> EvoField:
    """[ξ, η]^i = ξ(η^i) - η(ξ^i) with ξ acting by its prolongation."""
    a, b = _as_components(xi), _as_components(eta)
    fa, fb = frechet(a, len(a)), frechet(b, len(b))
    return EvoField(x - y for x, y in zip(fb.apply(a), fa.apply(b)))


def ham_vf(P: DiffOp, F: LocalFunctional) -> EvoField:
    return EvoField(P.apply(gradient(F, P.n)))


def lie_bivector(P: DiffOp, xi) -> LocalBivector:
    """[P, ξ] = P'[ξ] - ξ'∘P - P∘(ξ')*."""
    x = _as_components(xi)
    J = frechet(x, P.n)
    out = P.frechet_along(x) - J.compose(P) - P.compose(J.adjoint())
    return LocalBivector(out.n, out.entries)


def poisson_bracket(P: DiffOp, F: LocalFunctional, G: LocalFunctional) -> LocalFunctional:
    gF = gradient(F, P.n)
    PG = P.apply(gradient(G, P.n))
    return LocalFunctional(sum((a * b for a, b in zip(gF, PG)), JetExpr()), P.n)


def jacobiator(P: DiffOp, F, G, H) -> LocalFunctional:
    def br(a, b):
        return poisson_bracket(P, a, b)
    return br(br(F, G), H) + br(br(G, H), F) + br(br(H, F), G)


# --------------------------------------------------------------------------
# trivectors


class LocalTrivector:
    """Normal-form trivector: (i, j, p, k, q) -> coefficient B^{ijk}_{pq}."""

    __slots__ = ("n", "coeffs")

    def __init__(self, n: int, coeffs: dict | None = None):
        self.n = n
        self.coeffs = {key: c for key, c in (coeffs or {}).items() if not c.is_syntactic_zero()}

    @classmethod
    def from_terms(cls, n: int, terms: dict) -> "LocalTrivector":
        """Normalize general terms ((i,r),(j,p),(k,q)) -> coeff."""
        acc: dict = {}
        for ((i, r), (j, p), (k, q)), c in terms.items():
            if r == 0:
                key = (i, j, p, k, q)
                acc[key] = acc[key] + c if key in acc else c
                continue
            sign = -1 if r % 2 else 1
            dc = [c]
            for _ in range(r):
                dc.append(total_derivative(dc[-1]))
            for l1 in range(r + 1):
                for l2 in range(r - l1 + 1):
                    l3 = r - l1 - l2
                    mult = factorial(r) // (factorial(l1) * factorial(l2) * factorial(l3))
                    key = (i, j, p + l2, k, q + l3)
                    t = dc[l1] * (sign * mult)
                    acc[key] = acc[key] + t if key in acc else t
        return cls(n, acc)

    def general_terms(self) -> dict:
        return {((i, 0), (j, p), (k, q)): c for (i, j, p, k, q), c in self.coeffs.items()}

    def permuted(self, sigma: tuple) -> "LocalTrivector":
        """T'(x0, x1, x2) = T(x_{σ0}, x_{σ1}, x_{σ2})."""
        inv = [0, 0, 0]
        for slot, arg in enumerate(sigma):
            inv[arg] = slot
        terms: dict = {}
        for factors, c in self.general_terms().items():
            key = tuple(factors[inv[m]] for m in range(3))
            terms[key] = terms[key] + c if key in terms else c
        return LocalTrivector.from_terms(self.n, terms)

    def alternate(self) -> "LocalTrivector":
        out = LocalTrivector(self.n)
        for sigma in permutations(range(3)):
            t = self.permuted(sigma)
            out = out + t if _perm_sign(sigma) > 0 else out - t
        return out

    def __add__(self, other):
        acc = dict(self.coeffs)
        for k, c in other.coeffs.items():
            acc[k] = acc[k] + c if k in acc else c
        return LocalTrivector(max(self.n, other.n), acc)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return LocalTrivector(self.n, {k: v * c for k, v in self.coeffs.items()})

    __mul__ = scale
    __rmul__ = scale

    def map_coeffs(self, fn):
        return LocalTrivector(self.n, {k: fn(v) for k, v in self.coeffs.items()})

    def nonzero_coeffs(self) -> dict:
        return {k: c for k, c in sorted(self.coeffs.items()) if not c.is_zero()}

    def is_zero(self) -> bool:
        return not self.nonzero_coeffs()

    def __eq__(self, other):
        if not isinstance(other, LocalTrivector):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def evaluate(self, a, b, c) -> JetExpr:
        """Density of T(a, b, c) for covector fields a, b, c."""
        a, b, c = list(a), list(b), list(c)
        cache: dict = {}
        out = JetExpr()
        for (i, j, p, k, q), coef in self.coeffs.items():
            out = out + coef * a[i - 1] * _dn(b[j - 1], p, cache) * _dn(c[k - 1], q, cache)
        return out

    def __str__(self):
        nz = self.nonzero_coeffs()
        if not nz:
            return "0"
        return "\n".join(f"B[{i}{j}{k}]_({p},{q}) = {c}" for (i, j, p, k, q), c in nz.items())

    __repr__ = __str__


def _perm_sign(sigma) -> int:
    s = 1
    sigma = list(sigma)
    for i in range(len(sigma)):
        for j in range(i + 1, len(sigma)):
            if sigma[i] > sigma[j]:
                s = -s
    return s


def _k_form(P: DiffOp, Q: DiffOp) -> dict:
    """General terms of ∫ a · P'[Q b](c) dx."""
    n = max(P.n, Q.n)
    terms: dict = {}
    cache: dict = {}
    for (i, j), ops in P.entries.items():
        for k, A in ops.items():
            for v in jet_vars(A):
                dA = partial(A, v)
                m, s = v.i, v.s
                for (m2, l), qops in Q.entries.items():
                    if m2 != m:
                        continue
                    for t, B in qops.items():
                        for r in range(s + 1):
                            coef = dA * _dn(B, s - r, cache) * comb(s, r)
                            key = ((i, 0), (l, t + r), (j, k))
                            terms[key] = terms[key] + coef if key in terms else coef
    return terms


def schouten_bb(P: DiffOp, Q: DiffOp) -> LocalTrivector:
    """Schouten-Nijenhuis bracket of two bivectors (symmetric in P, Q)."""
    n = max(P.n, Q.n)
    terms = _k_form(P, Q)
    for key, c in _k_form(Q, P).items():
        terms[key] = terms[key] + c if key in terms else c
    return LocalTrivector.from_terms(n, terms).alternate().scale(_SCHOUTEN_FACTOR)


# fixed by the Jacobiator normalization in the module docstring
_SCHOUTEN_FACTOR = Fraction(-1, 2)


def pairing(T: LocalTrivector, F: LocalFunctional, G: LocalFunctional, H: LocalFunctional) -> LocalFunctional:
    n = T.n
    return LocalFunctional(T.evaluate(gradient(F, n), gradient(G, n), gradient(H, n)), n)


# --------------------------------------------------------------------------
# epsilon series


class EpsSeries:
    """Truncated series sum_{m<=order} ε^m parts[m]."""

    __slots__ = ("order", "parts")

    def __init__(self, parts: dict, order: int):
        self.order = order
        self.parts = {m: p for m, p in parts.items() if m <= order and p is not None}

    def __getitem__(self, m):
        return self.parts.get(m)

    def get(self, m, default=None):
        return self.parts.get(m, default)

    def items(self):
        return sorted(self.parts.items())

    def truncated(self, order: int) -> "EpsSeries":
        return EpsSeries(self.parts, min(order, self.order))

    def map(self, fn) -> "EpsSeries":
        return EpsSeries({m: fn(p) for m, p in self.parts.items()}, self.order)

    def __add__(self, other):
        order = min(self.order, other.order)
        acc = dict(self.parts)
        for m, p in other.parts.items():
            acc[m] = acc[m] + p if m in acc else p
        return EpsSeries(acc, order)

    def __sub__(self, other):
        return self + other.map(lambda p: -p)

    def convolve(self, other: "EpsSeries", fn: Callable, order: int | None = None) -> "EpsSeries":
        order = min(self.order, other.order) if order is None else order
        acc: dict = {}
        for a, pa in self.parts.items():
            for b, pb in other.parts.items():
                if a + b > order:
                    continue
                r = fn(pa, pb)
                acc[a + b] = acc[a + b] + r if a + b in acc else r
        return EpsSeries(acc, order)

    def validate_bivector_grades(self) -> list:
        """Check deg A_k = m + 1 - k for each ε^m part; returns offenders."""
        bad = []
        for m, P in self.parts.items():
            for i, j, k, c in P.items():
                if c.is_zero():
                    continue
                try:
                    degs = set(degree_decompose(c))
                except ValueError:
                    degs = {None}
                if degs != {m + 1 - k}:
                    bad.append((m, i, j, k))
                    has_log = any(isinstance(a, Func) and a.name == "log" for a in c.atoms())
                    msg = f"ε^{m} component [{i},{j}] δ^({k}) has degree {degs}, expected {m + 1 - k}"
                    warnings.warn(msg + (" (log atoms present)" if has_log else ""), stacklevel=2)
        return bad

    def __str__(self):
        return "\n".join(f"ε^{m}: {p}" for m, p in self.items()) or "0"


# --------------------------------------------------------------------------
# pencil context and differentials


@dataclass(frozen=True)
class Pencil:
    """A pair of bivectors defining the differentials d_1, d_2."""

    omega1: DiffOp
    omega2: DiffOp

    def omega(self, a: int) -> DiffOp:
        if a not in (1, 2):
            raise ValueError("pencil index must be 1 or 2")
        return self.omega1 if a == 1 else self.omega2

    def d(self, a: int, target):
        w = self.omega(a)
        if isinstance(target, LocalFunctional):
            return ham_vf(w, target)
        if isinstance(target, EvoField):
            return lie_bivector(w, target)
        if isinstance(target, DiffOp):
            return schouten_bb(w, target)
        raise TypeError(f"d_{a} undefined on {type(target).__name__}")


@dataclass
class PencilReport:
    order: int
    brackets: dict = field(default_factory=dict)  # (name, m) -> LocalTrivector
    asymmetry: dict = field(default_factory=dict)  # (name, m) -> P + flip(P), nonzero only

    @property
    def ok(self) -> bool:
        return not self.asymmetry and all(T.is_zero() for T in self.brackets.values())

    def failures(self) -> dict:
        out = {key: T for key, T in self.brackets.items() if not T.is_zero()}
        out.update({(f"skew {name}", m): A for (name, m), A in self.asymmetry.items()})
        return out

    def lines(self) -> list:
        out = []
        for (name, m), A in sorted(self.asymmetry.items()):
            out.append(f"ε^{m} {name}: NOT ANTISYMMETRIC")
            out.extend("    " + line for line in str(A).splitlines())
        for (name, m), T in sorted(self.brackets.items(), key=lambda t: (t[0][1], t[0][0])):
            status = "zero" if T.is_zero() else "NONZERO"
            out.append(f"ε^{m} {name}: {status}")
            if status != "zero":
                out.extend("    " + line for line in str(T).splitlines())
        return out


def _as_series(P) -> EpsSeries:
    if isinstance(P, EpsSeries):
        return P
    return EpsSeries({0: P}, 10 ** 6)


def check_pencil(P, Q, order: int) -> PencilReport:
    """Brackets [P,P], [P,Q], [Q,Q] through ε^order."""
    P, Q = _as_series(P), _as_series(Q)
    if min(P.order, Q.order) < order:
        raise ValueError("series truncated below the requested order")
    report = PencilReport(order)
    for name, S in (("P", P), ("Q", Q)):
        for m, part in S.items():
            if m <= order:
                sym = part + part.adjoint()
                if not sym.is_zero():
                    report.asymmetry[(name, m)] = sym
    for name, A, B in (("[P,P]", P, P), ("[P,Q]", P, Q), ("[Q,Q]", Q, Q)):
        S = A.convolve(B, schouten_bb, order)
        n = max(p.n for _, p in A.items())
        for m in range(order + 1):
            report.brackets[(name, m)] = S.get(m, LocalTrivector(n))
    return report
