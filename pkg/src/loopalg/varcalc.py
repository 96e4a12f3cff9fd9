"""Variational calculus on densities: Euler operator, exactness, inversion of
the total derivative and homotopy reconstruction of densities."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .symexpr import (
    Func, Inv, Jet, JetExpr, const, jet, jet_vars, log, max_jet_order,
    partial, total_derivative, total_derivative_n,
)

__all__ = [
    "NotExact", "NotVariational", "LocalFunctional", "euler", "gradient",
    "functionals_equal", "is_total_derivative", "integrate_dx",
    "homotopy_density",
]


class NotExact(ValueError):
    """The expression is not a total x-derivative."""


class NotVariational(ValueError):
    """The vector of expressions is not the gradient of a local functional."""


@dataclass(frozen=True)
class LocalFunctional:
    """Integral of ``density`` dx; equality is modulo total derivatives."""

    density: JetExpr
    n: int = 1

    def __add__(self, other):
        return LocalFunctional(self.density + other.density, max(self.n, other.n))

    def __sub__(self, other):
        return LocalFunctional(self.density - other.density, max(self.n, other.n))

    def __mul__(self, c):
        return LocalFunctional(self.density * c, self.n)

    __rmul__ = __mul__

    def __neg__(self):
        return LocalFunctional(-self.density, self.n)

    def __str__(self):
        return f"∫ {self.density} dx"


def euler(F, i: int) -> JetExpr:
    """Variational derivative of ∫F dx with respect to u^i."""
    f = F.density if isinstance(F, LocalFunctional) else F
    top = max_jet_order(f, i)
    out = JetExpr()
    for s in range(top + 1):
        term = total_derivative_n(partial(f, Jet(i, s)), s)
        out = out - term if s % 2 else out + term
    return out


def gradient(F: LocalFunctional, n: int | None = None) -> list:
    n = F.n if n is None else n
    return [euler(F, i) for i in range(1, n + 1)]


def functionals_equal(F: LocalFunctional, G: LocalFunctional) -> bool:
    n = max(F.n, G.n)
    diff = F.density - G.density
    return all(euler(diff, i).is_zero() for i in range(1, n + 1))


def _coords(e: JetExpr) -> set:
    return {v.i for v in jet_vars(e)}


def is_total_derivative(e: JetExpr) -> bool:
    if e.is_zero():
        return True
    if e.constant_value() != 0:
        return False
    return all(euler(e, i).is_zero() for i in _coords(e))


# -- integration in one jet variable -----------------------------------------


def _antiderivative(a: JetExpr, v: Jet) -> JetExpr:
    """Antiderivative of a with respect to v, other variables fixed."""
    vexpr = jet(v.i, v.s)
    logv = log(vexpr)
    (lm, _), = logv.terms.items()
    log_atom = lm[0][0]
    out = JetExpr()
    groups: dict = {}
    for m, c in a.terms.items():
        k = j = 0
        rest = []
        for atom, e in m:
            if atom == v:
                k = e
            elif atom == log_atom:
                j = e
            elif v in _depends(atom):
                raise NotExact(f"cannot integrate {atom} with respect to {v}")
            else:
                rest.append((atom, e))
        if j < 0:
            raise NotExact("negative power of log")
        groups.setdefault((k, j), JetExpr())
        groups[(k, j)] = groups[(k, j)] + JetExpr({tuple(rest): c})
    for (k, j), coeff in groups.items():
        out = out + coeff * _int_power_log(vexpr, logv, k, j)
    return out


def _depends(atom) -> set:
    if isinstance(atom, Jet):
        return {atom}
    if isinstance(atom, (Func, Inv)):
        return jet_vars(JetExpr({((atom, 1),): Fraction(1)}))
    return set()


def _int_power_log(v: JetExpr, lg: JetExpr, k: int, j: int) -> JetExpr:
    """∫ v^k log(v)^j dv."""
    if k == -1:
        return lg ** (j + 1) * Fraction(1, j + 1)
    first = v ** (k + 1) * lg ** j * Fraction(1, k + 1)
    if j == 0:
        return first
    return first - _int_power_log(v, lg, k, j - 1) * Fraction(j, k + 1)


def integrate_dx(e: JetExpr) -> JetExpr:
    """Return g with total_derivative(g) == e (no constant term in g).

    Strips the highest jet order one coordinate at a time.
    """
    target = e
    rest = e
    g = JetExpr()
    for _ in range(200):
        if rest.is_zero():
            break
        top = max_jet_order(rest)
        if top <= 0:
            raise NotExact(f"not a total derivative: {e}")
        i = min(v.i for v in jet_vars(rest) if v.s == top)
        a = partial(rest, Jet(i, top))
        if max_jet_order(a) >= top and any(
                not partial(a, Jet(j, top)).is_zero() for j in _coords(a)):
            raise NotExact(f"not linear in the top jets: {e}")
        h = _antiderivative(a, Jet(i, top - 1))
        g = g + h
        rest = rest - total_derivative(h)
    else:
        raise NotExact(f"integration did not terminate for {e}")
    if not (total_derivative(g) - target).is_zero():
        raise NotExact(f"not a total derivative: {e}")
    g = g - g.constant_value()
    return g


# -- homotopy formula ---------------------------------------------------------


def homotopy_density(g: list, n: int | None = None) -> LocalFunctional:
    """Density ∫_0^1 Σ u^i g_i[λu] dλ for differential-polynomial g."""
    n = len(g) if n is None else n
    acc = JetExpr()
    for i, gi in enumerate(g, start=1):
        term = jet(i) * gi
        for m, c in term.terms.items():
            deg = 0
            for atom, e in m:
                if not isinstance(atom, Jet):
                    raise NotVariational(f"homotopy needs jet monomials only, got {atom}")
                deg += e
            if deg <= 0:
                raise NotVariational("homotopy integral diverges at λ=0")
            acc = acc + JetExpr({m: c / deg})
    F = LocalFunctional(acc, n)
    for i, gi in enumerate(g, start=1):
        if not (euler(F, i) - gi).is_zero():
            raise NotVariational(f"component {i} is not a variational derivative")
    return F
