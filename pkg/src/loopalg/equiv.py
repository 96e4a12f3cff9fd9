"""Miura-type transformations, pushforward of bivectors, the ansatz
equivalence solver, extension of deformations and bihamiltonian recursion.

Internally an ε-series is carried as a single expression in which ε is the
parameter atom ``EPS``; every product is truncated at the working order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import sympy

from .multivec import (
    DiffOp, EpsSeries, EvoField, LocalBivector, check_pencil, frechet,
    ham_vf, lie_bivector, schouten_bb,
)
from .symexpr import (
    Jet, JetExpr, Param, _clear_denominators, const, jet, jet_vars, param,
    partial, substitute, total_derivative,
)
from .varcalc import LocalFunctional, NotExact, euler, homotopy_density, integrate_dx

__all__ = [
    "EPS", "NotInvertible", "AnsatzExhausted", "InvalidDeformation",
    "MiuraTransform", "AnsatzSpec", "EquivalenceResult", "RecursionStep",
    "eps_truncate", "eps_split", "eps_join", "series_substitute",
    "pushforward", "pushforward_exp", "solve_equivalence",
    "extend_deformation", "recursion", "jet_monomials",
]

EPS_NAME = "ε"
EPS_ATOM = Param(EPS_NAME)
EPS = param(EPS_NAME)


class NotInvertible(ValueError):
    pass


class AnsatzExhausted(RuntimeError):
    """No solution inside the supplied ansatz (not a proof of inequivalence)."""

    def __init__(self, msg: str, order: int | None = None, residual=None):
        super().__init__(msg)
        self.order = order
        self.residual = residual


class InvalidDeformation(ValueError):
    pass


# --------------------------------------------------------------------------
# ε bookkeeping


def _eps_exp(m) -> int:
    for a, k in m:
        if a is EPS_ATOM or a == EPS_ATOM:
            return k
    return 0


def eps_truncate(e: JetExpr, order: int) -> JetExpr:
    if all(_eps_exp(m) <= order for m in e.terms):
        return e
    return JetExpr({m: c for m, c in e.terms.items() if _eps_exp(m) <= order})


def eps_split(e: JetExpr) -> dict:
    parts: dict = {}
    for m, c in e.terms.items():
        k = _eps_exp(m)
        rest = tuple((a, x) for a, x in m if a != EPS_ATOM)
        parts.setdefault(k, {})[rest] = c
    return {k: JetExpr(t) for k, t in sorted(parts.items())}


def eps_join(parts) -> JetExpr:
    items = parts.items() if isinstance(parts, dict) else parts
    out = JetExpr()
    for m, p in items:
        out = out + p * EPS ** m if m else out + p
    return out


def _op_join(series: EpsSeries) -> DiffOp:
    n = max((p.n for _, p in series.items()), default=1)
    out = LocalBivector(n)
    for m, p in series.items():
        out = out + (p.scale(EPS ** m) if m else p)
    return out


def _op_split(op: DiffOp, order: int, cls=LocalBivector) -> EpsSeries:
    acc: dict = {}
    for i, j, k, c in op.items():
        for m, part in eps_split(c).items():
            if m > order:
                continue
            acc.setdefault(m, {}).setdefault((i, j), {})[k] = part.canonical()
    return EpsSeries({m: cls(op.n, e) for m, e in acc.items()}, order)


def _trunc_op(op: DiffOp, order: int) -> DiffOp:
    return op.map_coeffs(lambda c: eps_truncate(c, order))


# --------------------------------------------------------------------------
# series substitution


def _taylor_params(n: int, top: int) -> dict:
    return {(i, s): param(f"δ{i}_{s}") for i in range(1, n + 1) for s in range(top + 1)}


def series_substitute(e: JetExpr, base: Sequence[JetExpr], delta: Sequence[JetExpr],
                      order: int) -> JetExpr:
    """e(u) at u^i = base^i + delta^i, Taylor expanded; delta must be O(ε)."""
    n = len(base)
    images = {i: base[i - 1] for i in range(1, n + 1)}
    out = eps_truncate(substitute(e, images), order)
    if all(d.is_syntactic_zero() for d in delta) or order <= 0:
        return out
    cache: dict = {}

    def ddelta(i, s):
        if (i, s) not in cache:
            cache[(i, s)] = delta[i - 1] if s == 0 else eps_truncate(
                total_derivative(ddelta(i, s - 1)), order)
        return cache[(i, s)]

    term = e
    for r in range(1, order + 1):
        nxt = JetExpr()
        for v in jet_vars(term):
            if v.i > n:
                continue
            d = ddelta(v.i, v.s)
            if d.is_syntactic_zero():
                continue
            nxt = nxt + partial(term, v) * _dvar(v)
        term = nxt * Fraction(1, r)
        if term.is_syntactic_zero():
            break
        pars = {}
        for m in term.terms:
            for a, _ in m:
                if isinstance(a, Param) and a.name.startswith("δ") and a.name not in pars:
                    i, s = (int(x) for x in a.name[1:].split("_"))
                    pars[a.name] = ddelta(i, s)
        piece = _subst_truncated(term, images, pars, order)
        out = out + piece
    return out


def _dvar(v: Jet) -> JetExpr:
    return param(f"δ{v.i}_{v.s}")


def _subst_truncated(term: JetExpr, images, pars, order) -> JetExpr:
    # substitute monomial by monomial, truncating the ε-heavy products early
    out = JetExpr()
    split: dict = {}
    for m, c in term.terms.items():
        dpart = tuple((a, k) for a, k in m if isinstance(a, Param) and a.name in pars)
        rest = tuple((a, k) for a, k in m if not (isinstance(a, Param) and a.name in pars))
        split.setdefault(dpart, {})[rest] = c
    for dpart, rest in split.items():
        prod = const(1)
        for a, k in dpart:
            for _ in range(k):
                prod = eps_truncate(prod * pars[a.name], order)
        if prod.is_syntactic_zero():
            continue
        out = out + eps_truncate(substitute(JetExpr(rest), images) * prod, order)
    return out


# --------------------------------------------------------------------------
# transformations


def _identity(n: int) -> tuple:
    return tuple(jet(i) for i in range(1, n + 1))


@dataclass(frozen=True)
class MiuraTransform:
    """New coordinates ũ^i = P^i(u) + Σ_k ε^k F^i_k(u).

    ``point``/``point_inverse`` give the ε-free part and its inverse
    (identity when omitted).  When ``substitution`` is true the data describe
    the inverse map instead: old u^i = P^{-1}(ũ)^i + Σ_k ε^k F^i_k(ũ), which
    is how a rule written "u ↦ u + ε²G(u)" is read.
    """

    n: int
    corrections: dict = field(default_factory=dict)  # k >= 1 -> tuple
    point: tuple | None = None
    point_inverse: tuple | None = None
    substitution: bool = False
    quasi: bool = False

    # -- constructors
    @classmethod
    def identity(cls, n: int) -> "MiuraTransform":
        return cls(n)

    @classmethod
    def near_identity(cls, corrections: dict, n: int | None = None, quasi=False) -> "MiuraTransform":
        n = n or len(next(iter(corrections.values())))
        return cls(n, {k: tuple(v) for k, v in corrections.items()}, quasi=quasi)

    @classmethod
    def from_substitution(cls, corrections: dict, n: int | None = None, quasi=False) -> "MiuraTransform":
        n = n or len(next(iter(corrections.values())))
        return cls(n, {k: tuple(v) for k, v in corrections.items()}, substitution=True, quasi=quasi)

    @classmethod
    def point_transform(cls, forward: Sequence, inverse: Sequence) -> "MiuraTransform":
        forward, inverse = tuple(forward), tuple(inverse)
        T = cls(len(forward), {}, forward, inverse)
        # the composition inverse∘forward must be the identity
        back = [substitute(e, {i: forward[i - 1] for i in range(1, T.n + 1)}) for e in inverse]
        if any(not (b - jet(i)).is_zero() for i, b in enumerate(back, start=1)):
            raise NotInvertible("supplied inverse does not invert the point transform")
        return T

    # -- series data
    def _direct(self, order: int) -> tuple:
        """(point, point_inverse, ε-part) of the stored direction."""
        P = self.point or _identity(self.n)
        Pi = self.point_inverse or _identity(self.n)
        if self.point is not None and self.point_inverse is None:
            raise NotInvertible("point part given without an inverse")
        corr = [JetExpr() for _ in range(self.n)]
        for k, F in self.corrections.items():
            if 1 <= k <= order:
                corr = [c + f * EPS ** k for c, f in zip(corr, F)]
        if self.substitution:
            return Pi, P, corr
        return P, Pi, corr

    def forward(self, order: int) -> tuple:
        """ũ as ε-series expressions in u."""
        P, Pi, corr = self._direct(order)
        if not self.substitution:
            return tuple(p + c for p, c in zip(P, corr))
        return _invert(P, Pi, corr, order)

    def inverse(self, order: int) -> tuple:
        """u as ε-series expressions in ũ."""
        P, Pi, corr = self._direct(order)
        if self.substitution:
            return tuple(p + c for p, c in zip(P, corr))
        return _invert(P, Pi, corr, order)

    def forward_parts(self, order: int) -> dict:
        out: dict = {}
        for i, e in enumerate(self.forward(order)):
            for m, part in eps_split(e).items():
                out.setdefault(m, [JetExpr()] * self.n)
                out[m] = list(out[m])
                out[m][i] = part.canonical()
        return {m: tuple(v) for m, v in out.items()}

    def compose(self, first: "MiuraTransform", order: int) -> "MiuraTransform":
        """self ∘ first, as a near-identity transform (point parts must be trivial)."""
        if self.point or first.point:
            raise NotImplementedError("composition with point parts")
        inner = first.forward(order)
        outer = self.forward(order)
        base = _identity(self.n)
        delta = [eps_truncate(x - b, order) for x, b in zip(inner, base)]
        comp = [series_substitute(e, base, delta, order) for e in outer]
        corr: dict = {}
        for i, e in enumerate(comp):
            for m, part in eps_split(e).items():
                if m == 0:
                    continue
                corr.setdefault(m, [JetExpr()] * self.n)
                corr[m] = list(corr[m])
                corr[m][i] = part
        return MiuraTransform.near_identity(corr, self.n) if corr else MiuraTransform.identity(self.n)


def _invert(P, Pi, corr, order) -> tuple:
    """Solve P(u) + C(u) = ũ for u as a series in ũ."""
    n = len(P)
    ident = _identity(n)
    psi0 = tuple(Pi)
    psi = psi0
    if all(c.is_syntactic_zero() for c in corr):
        return psi
    point_trivial = all((p - q).is_zero() for p, q in zip(Pi, ident))
    for _ in range(order):
        delta = [eps_truncate(x - y, order) for x, y in zip(psi, psi0)]
        C = [series_substitute(c, psi0, delta, order) for c in corr]
        if point_trivial:
            psi = tuple(eps_truncate(u - c, order) for u, c in zip(ident, C))
        else:
            psi = tuple(series_substitute(p, ident, [-c for c in C], order) for p in Pi)
    return psi


# --------------------------------------------------------------------------
# pushforward


def pushforward(P: EpsSeries, T: MiuraTransform, order: int) -> EpsSeries:
    """Bivector in the new coordinates: (L P L*)(u(ũ)) truncated at ε^order."""
    if P.order < order:
        raise ValueError("input series truncated below the requested order")
    n = T.n
    phi = T.forward(order)
    L = _trunc_op(frechet(phi, n), order)
    Pe = _op_join(P.truncated(order))
    R = _trunc_op(_trunc_op(L.compose(Pe), order).compose(L.adjoint()), order)
    psi = T.inverse(order)
    base = tuple(eps_split(x).get(0, JetExpr()) for x in psi)
    delta = tuple(eps_truncate(x - b, order) for x, b in zip(psi, base))
    moved = R.map_coeffs(lambda c: series_substitute(c, base, delta, order))
    return _op_split(moved, order)


def pushforward_exp(P: EpsSeries, T: MiuraTransform, order: int) -> EpsSeries:
    """Exponential-of-adjoint form for near-identity transforms, order <= 2.

    With ũ = u + εA₁ + ε²F₂ the new bivector is
    P - ε[P,A₁] + ε²(½[[P,A₁],A₁] - [P,Ã₂]),  Ã₂ = F₂ - ½A₁'[A₁],
    where [P, A] = lie_bivector(P, A).
    """
    if order > 2:
        raise ValueError("exponential form implemented through ε²")
    if T.point is not None:
        raise ValueError("exponential form needs a near-identity transform")
    parts = T.forward_parts(order)
    zero = tuple(JetExpr() for _ in range(T.n))
    A1 = parts.get(1, zero)
    F2 = parts.get(2, zero)
    J1 = frechet(A1, T.n)
    A2 = tuple(f - a * Fraction(1, 2) for f, a in zip(F2, J1.apply(A1)))
    out: dict = {}
    for m in range(order + 1):
        acc = P.get(m, LocalBivector(T.n))
        if m >= 1 and P.get(m - 1) is not None:
            acc = acc - lie_bivector(P[m - 1], A1)
        if m >= 2 and P.get(m - 2) is not None:
            Pm = P[m - 2]
            acc = acc + lie_bivector(lie_bivector(Pm, A1), A1).scale(Fraction(1, 2))
            acc = acc - lie_bivector(Pm, A2)
        out[m] = LocalBivector(T.n, acc.map_coeffs(lambda c: c.canonical()).entries)
    return EpsSeries(out, order)


# --------------------------------------------------------------------------
# ansatz solver


def jet_monomials(n: int, degree: int, max_jet: int) -> list:
    """Products of jets u^{i,s} (1 <= s <= max_jet) of total degree ``degree``."""
    vars_ = [(i, s) for s in range(1, max_jet + 1) for i in range(1, n + 1)]
    out = []

    def rec(start, left, acc):
        if left == 0:
            out.append(acc)
            return
        for idx in range(start, len(vars_)):
            i, s = vars_[idx]
            if s <= left:
                rec(idx, left - s, acc * jet(i, s))

    rec(0, degree, const(1))
    return out


@dataclass(frozen=True)
class AnsatzSpec:
    """Per ε-order k the correction F_k^i ranges over basis·(jet monomial of degree k).

    ``max_jet`` bounds the jet order; ``basis`` lists coefficient functions
    of the coordinates.  ``components`` optionally restricts which F^i vary.
    """

    max_jet: int
    basis: tuple
    components: tuple | None = None

    @classmethod
    def polynomial(cls, n: int, max_jet: int, degree: int) -> "AnsatzSpec":
        basis = []
        for d in range(degree + 1):
            for combo in itertools.combinations_with_replacement(range(1, n + 1), d):
                e = const(1)
                for i in combo:
                    e = e * jet(i)
                basis.append(e)
        return cls(max_jet, tuple(basis))


@dataclass
class EquivalenceResult:
    transform: MiuraTransform       # free parameters set to zero
    family: MiuraTransform          # free parameters left symbolic
    free_params: tuple
    verified: bool


def _ansatz_fields(n: int, k: int, spec: AnsatzSpec, tag: str) -> tuple:
    comps = spec.components or tuple(range(1, n + 1))
    monos = jet_monomials(n, k, spec.max_jet)
    names = []
    F = []
    for i in range(1, n + 1):
        e = JetExpr()
        if i in comps:
            for a, b in enumerate(spec.basis):
                for c, mono in enumerate(monos):
                    name = f"{tag}{k}_{i}_{a}_{c}"
                    names.append(name)
                    e = e + param(name) * b * mono
        F.append(e)
    return tuple(F), names


def _equations(e: JetExpr, unknowns: set) -> list:
    """Coefficient equations (polynomials in unknowns) of e = 0."""
    e = _clear_denominators(e)
    groups: dict = {}
    for m, c in e.terms.items():
        pk = tuple((a, k) for a, k in m if isinstance(a, Param) and a.name in unknowns)
        rest = tuple((a, k) for a, k in m if not (isinstance(a, Param) and a.name in unknowns))
        groups.setdefault(rest, {})[pk] = groups.setdefault(rest, {}).get(pk, 0) + c
    return [g for g in groups.values() if any(v for v in g.values())]


def _to_sympy(eq: dict, syms: dict):
    return sum(sympy.Rational(c.numerator, c.denominator)
               * sympy.Mul(*[syms[a.name] ** k for a, k in pk]) for pk, c in eq.items())


def _solve(eqs: list, names: list):
    """Solve polynomial equations; returns ({name: sympy value}, free names) or None."""
    syms = {nm: sympy.Symbol(nm) for nm in names}
    polys = [_to_sympy(eq, syms) for eq in eqs]
    polys = [p for p in polys if p != 0]
    if not polys:
        return {}, list(names)
    used = sorted({s.name for p in polys for s in p.free_symbols})
    usyms = [syms[u] for u in used]
    linear = all(sympy.Poly(p, *usyms).total_degree() <= 1 for p in polys)
    if linear:
        sol = sympy.linsolve(polys, usyms)
        if not sol:
            return None
        (vals,) = sol
        assign = dict(zip(used, vals))
    else:
        sols = sympy.solve(polys, usyms, dict=True)
        sols = [s for s in sols if all(v.is_rational is not False for v in s.values())]
        if not sols:
            return None
        assign = {k.name: v for k, v in sols[0].items()}
        for u in used:
            assign.setdefault(u, syms[u])
    free = sorted({s.name for v in assign.values() for s in sympy.sympify(v).free_symbols}
                  | (set(names) - set(used)))
    return assign, free


def _apply_assign(e: JetExpr, assign: dict) -> JetExpr:
    if not assign:
        return e
    back = {}
    vals = {}
    for name, v in assign.items():
        v = sympy.sympify(v)
        expr = const(0)
        for term in sympy.Add.make_args(sympy.expand(v)):
            coeff, rest = term.as_coeff_Mul()
            t = const(Fraction(int(sympy.numer(coeff)), int(sympy.denom(coeff))))
            for f in sympy.Mul.make_args(rest):
                if f == 1:
                    continue
                b, k = f.as_base_exp()
                t = t * param(b.name) ** int(k)
            expr = expr + t
        vals[name] = expr
    return substitute(e, {}, vals)


def solve_equivalence(P: tuple, Q: tuple, ansatz: AnsatzSpec | dict, order: int,
                      n: int | None = None) -> EquivalenceResult:
    """Find ũ = u + Σ ε^k F_k mapping the pair P to the pair Q mod ε^{order+1}.

    ``ansatz`` is one spec for all orders or a dict k -> spec.
    """
    P1, P2 = P
    Q1, Q2 = Q
    n = n or max(p.n for _, p in P1.items())
    for m in (0,):
        if not (P1.get(m, LocalBivector(n)) == Q1.get(m, LocalBivector(n))
                and P2.get(m, LocalBivector(n)) == Q2.get(m, LocalBivector(n))):
            raise ValueError("pairs differ at ε-order 0")
    corrections: dict = {}
    all_names: list = []
    free: list = []
    for k in range(1, order + 1):
        spec = ansatz[k] if isinstance(ansatz, dict) else ansatz
        F, names = _ansatz_fields(n, k, spec, "a")
        corrections[k] = F
        all_names += names
        T = MiuraTransform.near_identity(corrections, n)
        unknowns = set(all_names)
        eqs = []
        for Ps, Qs in ((P1, Q1), (P2, Q2)):
            pushed = pushforward(Ps.truncated(k) if Ps.order >= k else Ps, T, k)
            diff = pushed.get(k, LocalBivector(n)) - Qs.get(k, LocalBivector(n))
            for _, _, _, c in diff.items():
                eqs += _equations(c, unknowns)
        res = _solve(eqs, all_names)
        if res is None:
            raise AnsatzExhausted(f"no solution at ε^{k} within the ansatz", order=k,
                                  residual=len(eqs))
        assign, free = res
        corrections = {j: tuple(_apply_assign(x, assign) for x in F_) for j, F_ in corrections.items()}
        all_names = list(free)
    family = MiuraTransform.near_identity(corrections, n)
    zero = {nm: 0 for nm in free}
    fixed = {j: tuple(_apply_assign(x, zero).canonical() for x in F_) for j, F_ in corrections.items()}
    fixed = {j: F_ for j, F_ in fixed.items() if any(not x.is_zero() for x in F_)}
    T = MiuraTransform.near_identity(fixed, n) if fixed else MiuraTransform.identity(n)
    ok = all(_series_equal(pushforward(Ps, T, order), Qs, order) for Ps, Qs in ((P1, Q1), (P2, Q2)))
    if not ok:
        raise AnsatzExhausted("solver output failed pushforward re-verification", order=order)
    return EquivalenceResult(T, family, tuple(free), ok)


def _series_equal(A: EpsSeries, B: EpsSeries, order: int) -> bool:
    n = max([p.n for _, p in A.items()] + [p.n for _, p in B.items()] + [1])
    return all(A.get(m, LocalBivector(n)) == B.get(m, LocalBivector(n)) for m in range(order + 1))


# --------------------------------------------------------------------------
# extension of deformations


def extend_deformation(omega1: EpsSeries, omega2: EpsSeries, order: int,
                       ansatz: AnsatzSpec) -> EpsSeries:
    """Extend ω₂ + Σ_{m<=order} ε^m P_m by one order, P_{order+1} = d₁Y."""
    n = max(p.n for _, p in omega1.items())
    if any(m > 0 for m, p in omega1.items() if not p.is_zero()):
        raise InvalidDeformation("the first bivector must be undeformed")
    rep = check_pencil(omega1, omega2, order)
    if not rep.ok:
        raise InvalidDeformation("input fails the deformation equations: "
                                 + ", ".join(f"{k[0]}@ε^{k[1]}" for k in rep.failures()))
    w1, w2 = omega1[0], omega2[0]
    N1 = order + 1
    rhs = None
    for k in range(1, N1):
        a, b = omega2.get(k), omega2.get(N1 - k)
        if a is None or b is None:
            continue
        t = schouten_bb(a, b)
        rhs = t if rhs is None else rhs + t
    if rhs is None or rhs.is_zero():
        return EpsSeries(dict(omega2.parts), N1)
    Y, names = _ansatz_fields(n, N1, ansatz, "y")
    P_new = lie_bivector(w1, Y)
    lhs = schouten_bb(w2, P_new).scale(2) + rhs
    eqs = []
    for c in lhs.coeffs.values():
        eqs += _equations(c, set(names))
    res = _solve(eqs, names)
    if res is None:
        raise AnsatzExhausted(f"no ε^{N1} extension within the ansatz", order=N1)
    assign, free = res
    assign = {k: sympy.sympify(v).subs({sympy.Symbol(f): 0 for f in free}) for k, v in assign.items()}
    assign.update({f: 0 for f in free})
    Yv = [_apply_assign(y, assign).canonical() for y in Y]
    P = lie_bivector(w1, Yv).map_coeffs(lambda c: c.canonical())
    parts = dict(omega2.parts)
    parts[N1] = LocalBivector(n, P.entries)
    return EpsSeries(parts, N1)


# --------------------------------------------------------------------------
# bihamiltonian recursion


@dataclass(frozen=True)
class RecursionStep:
    q: int
    hamiltonian: LocalFunctional   # density carries ε via EPS
    flow: EvoField                 # ε-series characteristics


def _leading_metric(omega1: EpsSeries, n: int) -> sympy.Matrix:
    W = omega1[0]
    G = sympy.zeros(n, n)
    for i, j, k, c in W.items():
        if c.is_zero():
            continue
        if k != 1 or not c.is_constant():
            raise ValueError("recursion needs a constant-coefficient ∂ leading term")
        v = c.constant_value()
        G[i - 1, j - 1] = sympy.Rational(v.numerator, v.denominator)
    if G.det() == 0:
        raise ValueError("degenerate leading term")
    return G.inv()


def _solve_omega1(omega1: EpsSeries, X: Sequence[JetExpr], order: int, n: int) -> list:
    """g with ω₁ g = X, ε-order by ε-order, integration constants zero."""
    Ginv = _leading_metric(omega1, n)
    Xs = [eps_split(x) for x in X]
    g: dict = {}
    for m in range(order + 1):
        r = [Xs[i].get(m, JetExpr()) for i in range(n)]
        for j in range(1, m + 1):
            W = omega1.get(j)
            if W is None or m - j not in g:
                continue
            r = [a - b for a, b in zip(r, W.apply(g[m - j]))]
        prim = [integrate_dx(x.canonical()) for x in r]
        g[m] = [sum((prim[b] * Fraction(int(sympy.numer(Ginv[a, b])), int(sympy.denom(Ginv[a, b])))
                     for b in range(n) if Ginv[a, b] != 0), JetExpr()) for a in range(n)]
    return [eps_join({m: g[m][i] for m in g}) for i in range(n)]


def recursion(omega1: EpsSeries, omega2: EpsSeries, casimir: LocalFunctional,
              factor: Callable[[int], Fraction], q_max: int, order: int) -> list:
    """Hamiltonians and flows from ω₁-flow_q = factor(q)·ω₂-flow of H_{q-1}."""
    n = max(p.n for _, p in omega1.items())
    W1 = _trunc_op(_op_join(omega1.truncated(order)), order)
    W2 = _trunc_op(_op_join(omega2.truncated(order)), order)
    if not all(x.is_zero() for x in ham_vf(W1, casimir).xi):
        raise ValueError("the starting functional is not a Casimir of ω₁")
    H = casimir
    steps = []
    for q in range(q_max + 1):
        X = [eps_truncate(x * factor(q), order) for x in ham_vf(W2, H).xi]
        g = _solve_omega1(omega1, X, order, n)
        parts = [eps_split(x) for x in g]
        dens = JetExpr()
        for m in range(order + 1):
            gm = [p.get(m, JetExpr()) for p in parts]
            if all(x.is_zero() for x in gm):
                continue
            dens = dens + homotopy_density(gm, n).density * (EPS ** m if m else 1)
        H = LocalFunctional(dens, n)
        for i in range(1, n + 1):
            if not eps_truncate(euler(H, i) - g[i - 1], order).is_zero():
                raise NotExact(f"H_{q} does not reproduce the gradient")
        flow = EvoField(eps_truncate(x, order).canonical() for x in ham_vf(W1, H).xi)
        if not all(eps_truncate(a - b, order).is_zero() for a, b in zip(flow.xi, X)):
            raise NotExact(f"flow {q} does not close")
        steps.append(RecursionStep(q, H, flow))
    return steps
