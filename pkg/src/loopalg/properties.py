"""Seeded randomized property suites (shared by the CLI and the tests)."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .equiv import MiuraTransform, pushforward, pushforward_exp
from .multivec import (
    DiffOp, EpsSeries, EvoField, LocalBivector, check_pencil, commutator,
    ham_vf, jacobiator, lie_bivector, pairing, poisson_bracket, schouten_bb,
)
from .structures import example
from .symexpr import JetExpr, const, jet, total_derivative
from .varcalc import (
    LocalFunctional, euler, functionals_equal, homotopy_density, integrate_dx,
)

__all__ = [
    "random_coeff", "random_poly", "random_functional", "random_field",
    "random_skew", "random_poisson", "SuiteResult", "SUITES", "run_suite",
]

_COEFFS = (1, -1, 2, -2, 3, Fraction(1, 2), Fraction(-1, 3), Fraction(2, 5))


def random_coeff(rng: random.Random) -> Fraction:
    return Fraction(rng.choice(_COEFFS))


def random_poly(rng: random.Random, n: int, max_jet: int = 2, terms: int = 3,
                max_factors: int = 3, min_factors: int = 1) -> JetExpr:
    """Random polynomial in u^{i,s}, s <= max_jet."""
    e = JetExpr()
    for _ in range(terms):
        m = const(random_coeff(rng))
        for _ in range(rng.randint(min_factors, max_factors)):
            m = m * jet(rng.randint(1, n), rng.randint(0, max_jet))
        e = e + m
    return e


def random_functional(rng: random.Random, n: int, max_jet: int = 1) -> LocalFunctional:
    """Density with at least one genuinely nonlinear, non-exact term."""
    base = jet(rng.randint(1, n)) ** rng.randint(2, 3)
    return LocalFunctional(base * random_coeff(rng) + random_poly(rng, n, max_jet, 2, 3, 2), n)


def random_field(rng: random.Random, n: int, max_jet: int = 2) -> EvoField:
    return EvoField(random_poly(rng, n, max_jet, 2, 2) for _ in range(n))


def random_skew(rng: random.Random, n: int, max_order: int = 3, terms: int = 2) -> LocalBivector:
    entries: dict = {}
    for _ in range(terms):
        i, j = rng.randint(1, n), rng.randint(1, n)
        k = rng.randint(0, max_order)
        c = random_poly(rng, n, 1, 1, 2)
        slot = entries.setdefault((i, j), {})
        slot[k] = slot[k] + c if k in slot else c
    P = LocalBivector(n, entries).antisymmetrize()
    if P.is_zero():
        P = LocalBivector(n, {(1, 1): {1: jet(1)}}).antisymmetrize()
    return P


def random_poisson(rng: random.Random):
    """A Poisson bivector drawn from the example pencils (ε-free members)."""
    name = rng.choice(["kdv0", "nls0"])
    ex = example(name)
    lam = random_coeff(rng)
    return ex.n, ex.omega2[0] - ex.omega1[0].scale(lam), ex.omega1[0], ex.omega2[0]


@dataclass
class SuiteResult:
    suite: str
    seed: int
    cases: int
    failures: list = field(default_factory=list)  # (property, case index, detail)
    counts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def _zero_functional(F: LocalFunctional) -> bool:
    return functionals_equal(F, LocalFunctional(JetExpr(), F.n))


# -- bracket properties -------------------------------------------------------


def prop_schouten_symmetric(rng):
    n = rng.randint(1, 2)
    P, Q = random_skew(rng, n), random_skew(rng, n)
    return schouten_bb(P, Q) == schouten_bb(Q, P)


def prop_trivector_antisymmetric(rng):
    n = rng.randint(1, 2)
    T = schouten_bb(random_skew(rng, n, 2), random_skew(rng, n, 2))
    return all(T.permuted(s) == (T if _sign(s) > 0 else -T) for s in ((1, 0, 2), (0, 2, 1)))


def _sign(s):
    return -1 if sum(1 for i in range(3) for j in range(i + 1, 3) if s[i] > s[j]) % 2 else 1


def prop_jacobiator_oracle(rng):
    """pairing([P,P], F, G, H) = 2 Jacobiator for random skew P."""
    n = rng.randint(1, 2)
    P = random_skew(rng, n, 2)
    F, G, H = (random_functional(rng, n) for _ in range(3))
    lhs = pairing(schouten_bb(P, P), F, G, H)
    rhs = jacobiator(P, F, G, H) * 2
    return functionals_equal(lhs, rhs)


def prop_bracket_antisymmetry(rng):
    n = rng.randint(1, 2)
    P = random_skew(rng, n)
    F, G = random_functional(rng, n), random_functional(rng, n)
    return _zero_functional(poisson_bracket(P, F, G) + poisson_bracket(P, G, F))


def prop_commutator_jacobi(rng):
    n = rng.randint(1, 2)
    X, Y, Z = (random_field(rng, n, 1) for _ in range(3))
    tot = commutator(X, commutator(Y, Z)) + commutator(Y, commutator(Z, X)) + commutator(Z, commutator(X, Y))
    return tot.is_zero() and (commutator(X, Y) + commutator(Y, X)).is_zero()


def prop_d_squared(rng):
    """d² = 0 on functionals and on fields for a Poisson ω."""
    n, W, _, _ = random_poisson(rng)
    F = random_functional(rng, n)
    X = random_field(rng, n, 1)
    ok1 = lie_bivector(W, ham_vf(W, F)).is_zero()
    ok2 = schouten_bb(W, lie_bivector(W, X)).is_zero()
    return ok1 and ok2


def prop_d_anticommute(rng):
    """d₁d₂ + d₂d₁ = 0 on functionals for a compatible pair."""
    n, _, W1, W2 = random_poisson(rng)
    F = random_functional(rng, n)
    return (lie_bivector(W1, ham_vf(W2, F)) + lie_bivector(W2, ham_vf(W1, F))).is_zero()


def prop_graded_jacobi_fields(rng):
    """[[P, X], Y] - [[P, Y], X] = [P, [X, Y]] for a bivector and two fields."""
    n = rng.randint(1, 2)
    P = random_skew(rng, n, 2)
    X, Y = random_field(rng, n, 1), random_field(rng, n, 1)
    lhs = lie_bivector(lie_bivector(P, X), Y) - lie_bivector(lie_bivector(P, Y), X)
    rhs = lie_bivector(P, commutator(X, Y))
    return lhs == rhs or lhs == -rhs


def prop_flip_involution(rng):
    n = rng.randint(1, 2)
    entries = {(rng.randint(1, n), rng.randint(1, n)): {rng.randint(0, 3): random_poly(rng, n, 2, 2)}}
    P = LocalBivector(n, entries)
    A = P.antisymmetrize()
    return P.flip().flip() == P and A.antisymmetrize() == A


def prop_kernel_vs_jacobiator(rng):
    """[P,P] = 0 as a kernel iff the Jacobiator vanishes on a spanning family."""
    n = rng.randint(1, 2)
    if rng.random() < 0.5:
        _, P, _, _ = random_poisson(rng)
        n = P.n
    else:
        P = random_skew(rng, n, 2)
    kernel_zero = schouten_bb(P, P).is_zero()
    family = [jet(i) ** 2 for i in range(1, n + 1)]
    family += [jet(i) ** 3 for i in range(1, n + 1)]
    family += [jet(i) * jet(j) * jet(k, 1) ** 2
               for i in range(1, n + 1) for j in range(i, n + 1) for k in range(1, n + 1)]

    def generic():
        # the Jacobiator is trilinear, so a random combination of the family
        # is nonzero unless it vanishes on every triple of family members
        return LocalFunctional(sum((m * random_coeff(rng) * rng.randint(1, 97) for m in family), JetExpr()), n)

    jac_zero = _zero_functional(jacobiator(P, generic(), generic(), generic()))
    return kernel_zero == jac_zero


BRACKETS = {
    "schouten symmetric in its arguments": prop_schouten_symmetric,
    "trivector totally antisymmetric": prop_trivector_antisymmetric,
    "pairing oracle equals twice the Jacobiator": prop_jacobiator_oracle,
    "bracket of functionals antisymmetric": prop_bracket_antisymmetry,
    "commutator antisymmetry and Jacobi": prop_commutator_jacobi,
    "d² = 0 on functionals and fields": prop_d_squared,
    "d₁d₂ + d₂d₁ = 0": prop_d_anticommute,
    "graded Jacobi for bivector and fields": prop_graded_jacobi_fields,
    "flip involution and projection": prop_flip_involution,
    "kernel zero iff Jacobiator zero": prop_kernel_vs_jacobiator,
}


# -- varcalc properties -------------------------------------------------------


def prop_euler_kills_derivatives(rng):
    n = rng.randint(1, 2)
    g = random_poly(rng, n, 2, 3)
    d = total_derivative(g)
    return all(euler(d, i).is_zero() for i in range(1, n + 1))


def prop_integrate_round_trip(rng):
    n = rng.randint(1, 2)
    g = random_poly(rng, n, 2, 3)
    g = g - g.constant_value()
    h = integrate_dx(total_derivative(g))
    return (h - g).is_zero()


def prop_homotopy_round_trip(rng):
    n = rng.randint(1, 2)
    F = LocalFunctional(random_poly(rng, n, 2, 3, 3), n)
    grad = [euler(F, i) for i in range(1, n + 1)]
    if all(x.is_zero() for x in grad):
        return True
    H = homotopy_density(grad, n)
    return functionals_equal(H, F) or all(
        (euler(H, i) - grad[i - 1]).is_zero() for i in range(1, n + 1))


def prop_functional_equality(rng):
    n = rng.randint(1, 2)
    F = random_functional(rng, n)
    G = LocalFunctional(F.density + total_derivative(random_poly(rng, n, 2, 2)), n)
    return functionals_equal(F, G)


VARCALC = {
    "euler ∘ total_derivative = 0": prop_euler_kills_derivatives,
    "integrate_dx inverts total_derivative": prop_integrate_round_trip,
    "homotopy reconstructs densities": prop_homotopy_round_trip,
    "functionals equal modulo derivatives": prop_functional_equality,
}


# -- pushforward properties ---------------------------------------------------


def _random_miura(rng, n, order=2) -> MiuraTransform:
    corr = {}
    if rng.random() < 0.6:
        corr[1] = [random_coeff(rng) * jet(rng.randint(1, n), 1) * (jet(rng.randint(1, n)) if rng.random() < 0.5 else const(1))
                   for _ in range(n)]
    corr[2] = [random_coeff(rng) * jet(rng.randint(1, n), 2) + random_coeff(rng) * jet(rng.randint(1, n), 1) ** 2
               for _ in range(n)]
    return MiuraTransform.near_identity(corr, n)


def _pencil(rng):
    name = rng.choice(["kdv", "ch", "kdv0"])
    return example(name, 2)


def prop_functoriality(rng):
    ex = _pencil(rng)
    T1, T2 = _random_miura(rng, 1), _random_miura(rng, 1)
    a = pushforward(pushforward(ex.omega2, T1, 2), T2, 2)
    b = pushforward(ex.omega2, T2.compose(T1, 2), 2)
    return all(a.get(m, LocalBivector(1)) == b.get(m, LocalBivector(1)) for m in range(3))


def prop_poisson_preserved(rng):
    ex = _pencil(rng)
    T = _random_miura(rng, 1)
    return check_pencil(pushforward(ex.omega1, T, 2), pushforward(ex.omega2, T, 2), 2).ok


def prop_exp_matches_transport(rng):
    ex = _pencil(rng)
    T = _random_miura(rng, 1)
    a, b = pushforward(ex.omega2, T, 2), pushforward_exp(ex.omega2, T, 2)
    return all(a.get(m, LocalBivector(1)) == b.get(m, LocalBivector(1)) for m in range(3))


def prop_inverse_round_trip(rng):
    ex = _pencil(rng)
    T = _random_miura(rng, 1)
    back = MiuraTransform.from_substitution({k: v for k, v in T.corrections.items()}, 1)
    a = pushforward(pushforward(ex.omega2, T, 2), back, 2)
    return all(a.get(m, LocalBivector(1)) == ex.omega2.get(m, LocalBivector(1)) for m in range(3))


PUSHFORWARD = {
    "functoriality of pushforward": prop_functoriality,
    "pushforward preserves compatibility": prop_poisson_preserved,
    "exponential form equals transport": prop_exp_matches_transport,
    "substitution inverts near-identity map": prop_inverse_round_trip,
}

SUITES = {"brackets": BRACKETS, "varcalc": VARCALC, "pushforward": PUSHFORWARD}


def run_suite(suite: str, seed: int, cases: int,
              on_case: Callable | None = None, only: str | None = None,
              index: int | None = None) -> list:
    """Run ``cases`` seeded cases per property.

    ``only`` and ``index`` restrict the run to one property and one case,
    which is how a reported failure is reproduced.
    """
    names = list(SUITES) if suite == "all" else [suite]
    out = []
    for name in names:
        res = SuiteResult(name, seed, cases)
        for pname, prop in SUITES[name].items():
            if only is not None and pname != only:
                continue
            passed = 0
            for idx in range(cases) if index is None else (index,):
                rng = random.Random(f"{seed}:{name}:{pname}:{idx}")
                try:
                    ok = prop(rng)
                    detail = ""
                except Exception as exc:  # a crash is a property failure with context
                    ok, detail = False, f"{type(exc).__name__}: {exc}"
                if ok:
                    passed += 1
                else:
                    res.failures.append((pname, idx, detail))
                if on_case:
                    on_case(name, pname, idx, ok)
            res.counts[pname] = passed
        out.append(res)
    return out
