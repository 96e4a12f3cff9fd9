import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from loopalg.equiv import (
    EPS, AnsatzExhausted, AnsatzSpec, InvalidDeformation, MiuraTransform, NotInvertible,
    eps_join, eps_split, eps_truncate, extend_deformation, jet_monomials, pushforward,
    pushforward_exp, recursion, series_substitute, solve_equivalence,
)
from loopalg.multivec import EpsSeries, LocalBivector, check_pencil
from loopalg.structures import deformation_rep, example, make_pair
from loopalg.symexpr import const, jet, substitute
from loopalg.varcalc import LocalFunctional, functionals_equal

u, ux, uxx = jet(1), jet(1, 1), jet(1, 2)
Q = Fraction


def _rep_pencil(c, order=2):
    pair = make_pair([1])
    rep = deformation_rep(pair, [c])
    return EpsSeries({0: pair.omega1}, order), EpsSeries({0: pair.omega2, 2: rep.Q[2]}, order)


def _same(A, B, order):
    for m in range(order + 1):
        a, b = A.get(m), B.get(m)
        if a is None and b is None:
            continue
        if a is None or b is None:
            if not (a or b).is_zero():
                return False
        elif a != b:
            return False
    return True


def test_eps_helpers():
    e = u + EPS * ux + EPS ** 2 * uxx + EPS ** 3 * u
    assert eps_truncate(e, 1) == u + EPS * ux
    parts = eps_split(e)
    assert parts[2] == uxx and parts[3] == u
    assert eps_join(parts) == e


def test_series_substitute_is_taylor_expansion():
    out = series_substitute(u ** 3, [u], [EPS * ux], 2)
    assert out == u ** 3 + EPS * 3 * u * u * ux + EPS ** 2 * 3 * u * ux * ux


def test_near_identity_inverse():
    T = MiuraTransform.near_identity({1: [ux * u], 2: [uxx]})
    fwd, inv = T.forward(2)[0], T.inverse(2)[0]
    assert eps_truncate(substitute(inv, {1: fwd}), 2) == u


def test_substitution_reading_inverts_forward_reading():
    corr = {2: [uxx * Q(1, 16)]}
    A = MiuraTransform.near_identity(corr, 1)
    B = MiuraTransform.from_substitution(corr, 1)
    assert A.forward(2) == B.inverse(2)


def test_point_transform_checks_inverse():
    T = MiuraTransform.point_transform([u * 2], [u / 2])
    assert T.forward(0)[0] == 2 * u
    with pytest.raises(NotInvertible):
        MiuraTransform.point_transform([u * 2], [u / 3])


def test_pushforward_identity_and_scaling():
    kdv = example("kdv")
    assert _same(pushforward(kdv.omega2, MiuraTransform.identity(1), 2), kdv.omega2, 2)
    # u ↦ 2u doubles the δ' coefficient of the constant metric and rescales u
    T = MiuraTransform.point_transform([u * 2], [u / 2])
    out = pushforward(EpsSeries({0: example("kdv0").omega1[0]}, 0), T, 0)
    assert out[0] == example("kdv0").omega1[0].scale(4)


def test_exponential_form_agrees_with_transport():
    P = _rep_pencil(u * Q(-1, 24))[1]
    T = MiuraTransform.near_identity({1: [u * ux], 2: [uxx * Q(1, 16)]}, 1)
    assert _same(pushforward(P, T, 2), pushforward_exp(P, T, 2), 2)


def test_functoriality_on_fixed_pair():
    P = example("kdv").omega2
    T1 = MiuraTransform.near_identity({1: [ux], 2: [u * uxx]}, 1)
    T2 = MiuraTransform.near_identity({2: [ux * ux]}, 1)
    two_steps = pushforward(pushforward(P, T1, 2), T2, 2)
    assert _same(two_steps, pushforward(P, T2.compose(T1, 2), 2), 2)


def test_jet_monomials_counts():
    assert len(jet_monomials(1, 2, 2)) == 2      # u_xx, u_x^2
    assert len(jet_monomials(2, 1, 1)) == 2      # w1_x, w2_x
    assert len(jet_monomials(1, 3, 3)) == 3      # u_xxx, u_x u_xx, u_x^3


def test_solver_kdv_correspondence():
    P = _rep_pencil(const(Q(-1, 24)))
    kdv = example("kdv")
    res = solve_equivalence(P, (kdv.omega1, kdv.omega2), AnsatzSpec.polynomial(1, 2, 2), 2)
    assert res.verified
    assert _same(pushforward(P[1], res.transform, 2), kdv.omega2, 2)


def test_solver_reports_exhausted_ansatz():
    P = _rep_pencil(const(Q(-1, 24)))
    Pt = _rep_pencil(const(Q(1, 7)))
    with pytest.raises(AnsatzExhausted) as info:
        solve_equivalence(P, Pt, AnsatzSpec.polynomial(1, 2, 2), 2)
    assert info.value.order == 2


def test_extend_deformation_trivial_and_nontrivial():
    kdv = example("kdv", order=4)
    o1 = EpsSeries(kdv.omega1.parts, 4)
    o2 = extend_deformation(o1, EpsSeries(kdv.omega2.parts, 2), 2, AnsatzSpec.polynomial(1, 3, 3))
    o2 = extend_deformation(o1, o2, 3, AnsatzSpec.polynomial(1, 4, 4))
    assert check_pencil(o1, o2, 4).ok

    o1, o2 = _rep_pencil(u * Q(-1, 24), 4)
    o2 = EpsSeries(o2.parts, 2)
    o2 = extend_deformation(o1, o2, 2, AnsatzSpec.polynomial(1, 3, 3))
    o2 = extend_deformation(o1, o2, 3, AnsatzSpec.polynomial(1, 4, 4))
    assert o2.get(4) is not None and not o2[4].is_zero()
    assert check_pencil(o1, o2, 4).ok


def test_extend_deformation_rejects_inconsistent_input():
    o1, _ = _rep_pencil(const(0), 4)
    bad = EpsSeries({0: example("kdv0").omega2[0],
                     2: LocalBivector(1, {(1, 1): {3: u / 8}}).antisymmetrize()}, 2)
    with pytest.raises(InvalidDeformation):
        extend_deformation(o1, bad, 2, AnsatzSpec.polynomial(1, 3, 3))


def test_recursion_kdv_hamiltonians():
    kdv = example("kdv")
    steps = recursion(kdv.omega1, kdv.omega2, LocalFunctional(u), lambda q: Q(2, 2 * q + 1), 1, 2)
    assert functionals_equal(steps[0].hamiltonian, LocalFunctional(u * u / 2))
    H1 = LocalFunctional(u ** 3 / 6 + EPS ** 2 * u * uxx / 24)
    assert functionals_equal(steps[1].hamiltonian, H1)
    assert steps[1].flow.xi[0] == u * ux + EPS ** 2 * jet(1, 3) / 12


def test_recursion_requires_casimir():
    kdv = example("kdv")
    with pytest.raises(ValueError):
        recursion(kdv.omega1, kdv.omega2, LocalFunctional(u * u), lambda q: 1, 1, 2)


def test_recursion_from_common_casimir_is_trivial():
    # ∫w1 is a Casimir of both brackets of the two-component pencil
    ex = example("nls-case2")
    steps = recursion(ex.omega1, ex.omega2, LocalFunctional(jet(1), 2), lambda q: Q(1, q + 1), 1, 2)
    assert all(s.hamiltonian.density.is_zero() for s in steps)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_pushforward_preserves_compatibility(seed):
    from loopalg.properties import _random_miura
    rng = random.Random(seed)
    kdv = example("kdv")
    T = _random_miura(rng, 1)
    A, B = pushforward(kdv.omega1, T, 2), pushforward(kdv.omega2, T, 2)
    assert check_pencil(A, B, 2).ok
