from fractions import Fraction

import pytest

from loopalg.multivec import check_pencil, schouten_bb
from loopalg.structures import (
    CENTRAL_WEIGHT, EXAMPLES, Degenerate, NotSemisimple, UnknownExample,
    canonical_coordinates_nls, deformation_rep, example, extract_central, make_pair,
    representative_closed_form,
)
from loopalg.symexpr import const, func, is_differential_polynomial, jet, log, partial, substitute

u, ux, uxx = jet(1), jet(1, 1), jet(1, 2)


def test_make_pair_one_component():
    pair = make_pair([1])
    assert pair.omega1 == example("kdv0").omega1[0]
    assert pair.omega2 == example("kdv0").omega2[0]


def test_make_pair_rejects_bad_input():
    with pytest.raises(Degenerate):
        make_pair([0])
    with pytest.raises(NotSemisimple):
        make_pair([1, 1], coords=[u, u])
    with pytest.raises(ValueError):
        make_pair([ux])
    with pytest.raises(UnknownExample):
        example("sine-gordon")


@pytest.mark.parametrize("name", EXAMPLES)
def test_examples_are_compatible_pencils(name):
    ex = example(name)
    assert check_pencil(ex.omega1, ex.omega2, ex.order).ok


def test_canonical_nls_coordinates():
    nc = canonical_coordinates_nls()
    back = [substitute(e, {1: nc.u_of_w[0], 2: nc.u_of_w[1]}) for e in nc.w_of_u]
    assert back[0] == jet(1) and back[1] == jet(2)
    pair = make_pair(nc.f)
    assert check_pencil(pair.omega1, pair.omega2, 0).ok


def test_representative_constant_c():
    rep = deformation_rep(make_pair([1]), [Fraction(-1, 24)])
    assert rep.X.xi == (uxx * Fraction(-1, 16),)
    assert rep.polynomial
    assert rep.I.density == ux * log(ux) * Fraction(-1, 24)


def test_representative_symbolic_c():
    pair = make_pair([1])
    c = func("c", u)
    rep = deformation_rep(pair, [c])
    X = rep.X.xi[0]
    assert is_differential_polynomial(X)
    assert (X - representative_closed_form(pair, [c]).xi[0]).is_zero()
    assert partial(X, uxx) == c * CENTRAL_WEIGHT
    assert schouten_bb(pair.omega2, rep.Q[2]).is_zero()
    assert (extract_central(pair, rep.X)[0] - c).is_zero()


def test_representative_two_components_round_trip():
    nc = canonical_coordinates_nls()
    pair = make_pair(nc.f)
    c = [jet(1) * jet(1) * Fraction(-1, 24), func("c2", jet(2))]
    rep = deformation_rep(pair, c)
    assert rep.polynomial
    back = extract_central(pair, rep.X)
    assert all((a - b).is_zero() for a, b in zip(back, c))


def test_central_functions_must_depend_on_own_coordinate():
    with pytest.raises(ValueError):
        deformation_rep(make_pair([1, 2]), [jet(2), const(0)])
    with pytest.raises(ValueError):
        deformation_rep(make_pair([1]), [const(1), const(2)])


def test_zero_c_gives_zero_deformation():
    rep = deformation_rep(make_pair([1]), [0])
    assert rep.X.xi[0].is_zero()
    assert rep.Q[2].is_zero()
