import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from loopalg.multivec import (
    DiffOp, EpsSeries, EvoField, LocalBivector, check_pencil, commutator,
    frechet, ham_vf, jacobiator, lie_bivector, pairing, poisson_bracket, schouten_bb,
)
from loopalg.properties import random_functional, random_skew
from loopalg.structures import example
from loopalg.symexpr import JetExpr, const, jet
from loopalg.varcalc import LocalFunctional, functionals_equal

u, ux, uxx, uxxx = jet(1), jet(1, 1), jet(1, 2), jet(1, 3)
KDV1 = LocalBivector(1, {(1, 1): {1: const(1)}})
KDV2 = LocalBivector(1, {(1, 1): {1: u, 0: ux / 2}})


def test_adjoint_oracle():
    A = DiffOp(1, {(1, 1): {1: u}})
    # (u ∂)* = -∂∘u = -u ∂ - u_x
    assert A.adjoint() == DiffOp(1, {(1, 1): {1: -u, 0: -ux}})
    assert KDV2.is_antisymmetric()
    assert not LocalBivector(1, {(1, 1): {1: u}}).is_antisymmetric()


def test_compose_and_apply():
    D = DiffOp(1, {(1, 1): {1: const(1)}})
    U = DiffOp(1, {(1, 1): {0: u}})
    assert D.compose(U) == DiffOp(1, {(1, 1): {1: u, 0: ux}})
    assert D.compose(U).apply([u]) == [2 * u * ux]


def test_frechet_oracle():
    L = frechet([u * uxx])
    assert L == DiffOp(1, {(1, 1): {0: uxx, 2: u}})


def test_hamiltonian_vector_fields():
    H = LocalFunctional(u ** 3 / 6 + u * uxx / 16)
    assert ham_vf(KDV1, LocalFunctional(u * u / 2)).xi == (ux,)
    X = ham_vf(KDV1, H)
    assert X.xi[0] == u * ux + uxxx / 8


def test_kdv_flows_commute():
    X = EvoField([ux])
    Y = EvoField([u * ux + uxxx])
    assert all(c.is_zero() for c in commutator(X, Y).xi)
    Z = EvoField([u * u])
    assert not all(c.is_zero() for c in commutator(Y, Z).xi)


def test_schouten_zero_on_poisson_pencil():
    for P in (KDV1, KDV2, KDV2 - KDV1.scale(Fraction(3, 7))):
        assert schouten_bb(P, P).is_zero()
    assert schouten_bb(KDV1, KDV2).is_zero()


def test_schouten_nonzero_on_non_poisson():
    # every one-component g(u)∂ + ½g'u_x is Poisson, the u ∂³ term is not
    P = LocalBivector(1, {(1, 1): {1: u * u, 3: u}}).antisymmetrize()
    assert not schouten_bb(P, P).is_zero()


def test_pairing_is_twice_the_jacobiator_on_fixed_instance():
    P = LocalBivector(1, {(1, 1): {1: u * u, 3: u}}).antisymmetrize()
    F, G, H = (LocalFunctional(x) for x in (u ** 3, u * ux * ux, u ** 4))
    lhs = pairing(schouten_bb(P, P), F, G, H)
    assert not functionals_equal(lhs, LocalFunctional(JetExpr()))
    assert functionals_equal(lhs, jacobiator(P, F, G, H) * 2)


def test_lie_derivative_sign_matches_first_order_transport():
    from loopalg.equiv import MiuraTransform, pushforward
    A = [ux * ux]
    T = MiuraTransform.near_identity({1: A})
    out = pushforward(EpsSeries({0: KDV2}, 1), T, 1)
    L = lie_bivector(KDV2, EvoField(A))
    assert not L.is_zero()
    assert out[1] == L.scale(-1)


def test_check_pencil_reports_corruption():
    kdv = example("kdv")
    assert check_pencil(kdv.omega1, kdv.omega2, 2).ok
    bad = EpsSeries({0: kdv.omega2[0], 2: LocalBivector(1, {(1, 1): {3: u / 8}}).antisymmetrize()}, 2)
    rep = check_pencil(kdv.omega1, bad, 2)
    assert not rep.ok
    assert set(rep.failures()) == {("[Q,Q]", 2)}
    T = rep.brackets[("[Q,Q]", 2)]
    assert T.nonzero_coeffs()[(1, 1, 0, 1, 1)] == uxxx * Fraction(3, 16)


def test_check_pencil_flags_non_antisymmetric_input():
    P = EpsSeries({0: LocalBivector(1, {(1, 1): {1: u}})}, 0)
    rep = check_pencil(KDV1, P, 0)
    assert not rep.ok
    assert ("Q", 0) in rep.asymmetry


def test_trivector_permutations():
    rng = random.Random(4)
    T = schouten_bb(random_skew(rng, 2, 2), random_skew(rng, 2, 2))
    assert T.permuted((1, 0, 2)) == -T
    assert T.permuted((1, 2, 0)) == T


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_bracket_of_functionals_antisymmetric(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 2)
    P = random_skew(rng, n, 2)
    F, G = random_functional(rng, n), random_functional(rng, n)
    s = poisson_bracket(P, F, G) + poisson_bracket(P, G, F)
    assert functionals_equal(s, LocalFunctional(JetExpr(), n))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_schouten_symmetric_in_bivectors(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 2)
    P, Q = random_skew(rng, n, 2), random_skew(rng, n, 2)
    assert schouten_bb(P, Q) == schouten_bb(Q, P)


def test_eps_series_convolution_truncates():
    a = EpsSeries({0: KDV1, 1: KDV2}, 2)
    out = a.convolve(a, lambda x, y: x.compose(y), 2)
    assert out[2] == KDV2.compose(KDV2)
    assert out[1] == KDV1.compose(KDV2) + KDV2.compose(KDV1)
    assert out.get(3) is None
