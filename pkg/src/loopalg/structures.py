"""Semisimple hydrodynamic pairs in canonical coordinates, the example
library and the quasitrivial deformation representative."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .multivec import (
    EpsSeries, EvoField, LocalBivector, bivector_from_upper, ham_vf,
    lie_bivector,
)
from .symexpr import (
    JetExpr, const, is_differential_polynomial, jet, jet_vars, log, partial,
    sqrt, total_derivative,
)
from .varcalc import LocalFunctional

__all__ = [
    "Degenerate", "NotSemisimple", "RepresentativeMismatch", "UnknownExample",
    "HydroPair", "DeformationRep", "Example", "NLSCoordinates", "make_pair",
    "example", "EXAMPLES", "canonical_coordinates_nls", "deformation_rep",
    "extract_central", "representative_closed_form",
]

HALF = Fraction(1, 2)


class Degenerate(ValueError):
    """Some f^i vanishes identically."""


class NotSemisimple(ValueError):
    """Two canonical coordinates coincide."""


class RepresentativeMismatch(RuntimeError):
    """Bracket route and closed form for the representative disagree."""


class UnknownExample(KeyError):
    pass


@dataclass(frozen=True)
class HydroPair:
    n: int
    f: tuple
    omega1: LocalBivector
    omega2: LocalBivector
    labels: tuple

    @property
    def g(self) -> tuple:
        return tuple(jet(i) * fi for i, fi in enumerate(self.f, start=1))


def _offdiag(f: tuple, weight) -> dict:
    """A^{ij} (weight = 1) or B^{ij} (weight = u) of the canonical form."""
    n = len(f)
    out = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            fi, fj = f[i - 1], f[j - 1]
            wi, wj = weight(i), weight(j)
            a = (wi * fi / fj * partial(fj, jet(i)) * jet(j, 1)
                 - wj * fj / fi * partial(fi, jet(j)) * jet(i, 1)) * HALF
            if not a.is_zero():
                out[(i, j)] = a
    return out


def make_pair(f, coords=None, labels=None) -> HydroPair:
    """Build (ω1, ω2) from the f^i in canonical coordinates.

    ``coords`` optionally names the canonical coordinates as expressions
    in another chart; it is only used for the semisimplicity test.
    """
    f = tuple(const(x) if not isinstance(x, JetExpr) else x for x in f)
    n = len(f)
    for i, fi in enumerate(f, start=1):
        if fi.is_zero():
            raise Degenerate(f"f^{i} vanishes identically")
        if any(v.s > 0 for v in jet_vars(fi)):
            raise ValueError(f"f^{i} must depend on the coordinates only")
    coords = [jet(i) for i in range(1, n + 1)] if coords is None else list(coords)
    for i in range(n):
        for j in range(i + 1, n):
            if (coords[i] - coords[j]).is_zero():
                raise NotSemisimple(f"coordinates {i + 1} and {j + 1} coincide")
    g = [jet(i) * fi for i, fi in enumerate(f, start=1)]
    e1: dict = {}
    e2: dict = {}
    for i in range(1, n + 1):
        fi, gi = f[i - 1], g[i - 1]
        e1[(i, i)] = {1: fi, 0: total_derivative(fi) * HALF}
        e2[(i, i)] = {1: gi, 0: total_derivative(gi) * HALF}
    for key, a in _offdiag(f, lambda i: const(1)).items():
        e1.setdefault(key, {})[0] = a
    for key, b in _offdiag(f, jet).items():
        e2.setdefault(key, {})[0] = b
    labels = tuple(labels or (f"u{i}" for i in range(1, n + 1)))
    return HydroPair(n, f, LocalBivector(n, e1), LocalBivector(n, e2), labels)


# --------------------------------------------------------------------------
# example library


@dataclass(frozen=True)
class Example:
    name: str
    n: int
    omega1: EpsSeries
    omega2: EpsSeries
    order: int
    labels: tuple


def _series(n: int, parts: dict, order: int) -> EpsSeries:
    return EpsSeries({m: bivector_from_upper(n, upper) for m, upper in parts.items()}, order)


def _kdv0(order=2):
    u, ux = jet(1), jet(1, 1)
    w1 = {0: {(1, 1): {1: const(1)}}}
    w2 = {0: {(1, 1): {1: u, 0: ux * HALF}}}
    return w1, w2


def _nls0():
    w1, w2 = jet(1), jet(2)
    o1 = {0: {(1, 2): {1: const(1)}}}
    o2 = {0: {(1, 1): {1: const(2)},
              (1, 2): {1: w1, 0: jet(1, 1)},
              (2, 2): {1: w2 * 2, 0: jet(2, 1)}}}
    return o1, o2


def _build(name: str):
    if name in ("kdv0", "kdv", "ch"):
        o1, o2 = _kdv0()
        if name == "kdv":
            o2[2] = {(1, 1): {3: const(Fraction(1, 8))}}
        elif name == "ch":
            o1[2] = {(1, 1): {3: const(Fraction(-1, 8))}}
        n, labels = 1, ("u",)
    elif name in ("nls0", "nls-case1", "nls-case2"):
        o1, o2 = _nls0()
        if name == "nls-case1":
            o2[1] = {(1, 2): {2: const(-1)}}
        elif name == "nls-case2":
            o1[1] = {(1, 2): {2: const(-1)}}
        n, labels = 2, ("w1", "w2")
    else:
        raise UnknownExample(name)
    order = 0 if name in ("kdv0", "nls0") else 2
    return Example(name, n, _series(n, o1, order), _series(n, o2, order), order, labels)


EXAMPLES = ("kdv0", "kdv", "ch", "nls0", "nls-case1", "nls-case2")


def example(name: str, order: int | None = None) -> Example:
    """Transcribed example pencils; ``order`` overrides the truncation."""
    ex = _build(name)
    if order is not None:
        ex = Example(ex.name, ex.n, EpsSeries(ex.omega1.parts, order),
                     EpsSeries(ex.omega2.parts, order), order, ex.labels)
    return ex


# --------------------------------------------------------------------------
# canonical coordinates of the nls pair


@dataclass(frozen=True)
class NLSCoordinates:
    u_of_w: tuple  # expressions in w1 = jet(1), w2 = jet(2)
    w_of_u: tuple  # expressions in u1 = jet(1), u2 = jet(2)
    f: tuple       # f^i in canonical coordinates

    def jacobian_u_of_w(self) -> list:
        return [[partial(e, jet(j)) for j in (1, 2)] for e in self.u_of_w]


def canonical_coordinates_nls() -> NLSCoordinates:
    w1, w2 = jet(1), jet(2)
    s = sqrt(w2)
    u1, u2 = jet(1), jet(2)
    d = u1 - u2
    f = (const(8) / d, const(-8) / d)
    return NLSCoordinates(
        u_of_w=(w1 + s * 2, w1 - s * 2),
        w_of_u=((u1 + u2) * HALF, d * d * Fraction(1, 16)),
        f=f,
    )


# --------------------------------------------------------------------------
# deformation representative


@dataclass(frozen=True)
class DeformationRep:
    c: tuple
    I: LocalFunctional
    J: LocalFunctional
    X: EvoField
    Q: EpsSeries

    @property
    def polynomial(self) -> bool:
        return all(is_differential_polynomial(x) for x in self.X.xi)


def _check_central(c: tuple, n: int):
    for i, ci in enumerate(c, start=1):
        bad = {v.i for v in jet_vars(ci)} - {i}
        if bad or any(v.s > 0 for v in jet_vars(ci)):
            raise ValueError(f"c_{i} must depend on u^{i} only")


def representative_closed_form(pair: HydroPair, c) -> EvoField:
    """Closed-form components of the representative field."""
    n, f = pair.n, pair.f
    c = tuple(const(x) if not isinstance(x, JetExpr) else x for x in c)
    A = _offdiag(f, lambda i: const(1))
    cu = [c[j - 1] * jet(j, 1) for j in range(1, n + 1)]
    dcu = [total_derivative(x) for x in cu]
    out = []
    for i in range(1, n + 1):
        fi = f[i - 1]
        xi = JetExpr()
        for j in range(1, n + 1):
            fj = f[j - 1]
            L = (jet(i) - jet(j)) * fi / fj * partial(fj, jet(i)) * HALF
            if i == j:
                L = L + fi * HALF
                a = total_derivative(fi) * HALF
                b = fi * 2 - L
            else:
                a = A.get((i, j), JetExpr())
                b = -L
            xi = xi + a * cu[j - 1] + b * dcu[j - 1]
        out.append(xi)
    return EvoField(out)


def deformation_rep(pair: HydroPair, c) -> DeformationRep:
    n = pair.n
    c = tuple(const(x) if not isinstance(x, JetExpr) else x for x in c)
    if len(c) != n:
        raise ValueError("need one central function per coordinate")
    _check_central(c, n)
    dI = JetExpr()
    dJ = JetExpr()
    for i in range(1, n + 1):
        ux = jet(i, 1)
        if c[i - 1].is_zero():
            continue
        t = c[i - 1] * ux * log(ux)
        dI = dI + t
        dJ = dJ + jet(i) * t
    I, J = LocalFunctional(dI, n), LocalFunctional(dJ, n)
    X = ham_vf(pair.omega2, I) - ham_vf(pair.omega1, J)
    X = EvoField(x.canonical() for x in X.xi)
    closed = representative_closed_form(pair, c)
    if not (X - closed).is_zero():
        raise RepresentativeMismatch(f"bracket route {X} != closed form {closed}")
    Q = EpsSeries({2: lie_bivector(pair.omega1, X)}, 2)
    return DeformationRep(c, I, J, X, Q)


# coefficient of u^{i}_{xx} in X^i is (2 f^i - L^{ii}) c_i = (3/2) f^i c_i
CENTRAL_WEIGHT = Fraction(3, 2)


def extract_central(pair: HydroPair, X) -> list:
    xi = list(X.xi) if isinstance(X, EvoField) else list(X)
    out = []
    for i in range(1, pair.n + 1):
        coeff = partial(xi[i - 1], jet(i, 2))
        out.append((coeff / (pair.f[i - 1] * CENTRAL_WEIGHT)).canonical())
    return out
