import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from loopalg.properties import random_poly
from loopalg.serialize import (
    SchemaError, expr_from_doc, expr_to_doc, parse_infix, parse_infix_list,
    structure_from_doc, structure_to_doc, validate,
)
from loopalg.structures import EXAMPLES, example
from loopalg.symexpr import func, jet, log, root, sqrt

u1, u2 = jet(1), jet(2)


@pytest.mark.parametrize("text,expected", [
    ("-1/24", Fraction(-1, 24) + 0 * u1),
    ("-(u1)^2/24", u1 * u1 * Fraction(-1, 24)),
    ("u1^2/u2 - 3*u1", u1 * u1 / u2 - 3 * u1),
    ("2^-1", Fraction(1, 2) + 0 * u1),
    ("-u1^2", -(u1 * u1)),
    ("log(u1) + sqrt(u2)", log(u1) + sqrt(u2)),
    ("c(u1)", func("c", u1)),
])
def test_infix_grammar(text, expected):
    assert parse_infix(text, 2) == expected


def test_infix_lists_and_unicode_minus():
    assert parse_infix_list("−(u1)^2/24, −(u2)^2/24", 2) == [u1 * u1 * Fraction(-1, 24), u2 * u2 * Fraction(-1, 24)]


@pytest.mark.parametrize("text", [
    "", "u0", "x", "u3", "u1 ** 2", "u1^u2", "u1^(1/2)", "1/0", "lambda: 1", "[u1]", "u1(2)",
    "u1 if u1 else u2", "f(x=1)", "1.5",
])
def test_infix_rejects(text):
    with pytest.raises(SchemaError):
        parse_infix(text, 2)


def test_expr_doc_round_trip_with_atoms():
    e = u1 * u1 / (u1 - u2) + log(jet(1, 1)) * func("c", u1) + root("sqrt3", (-3, 0, 1)) * u2
    doc = expr_to_doc(e)
    validate({"n": 2, "f": [doc, "1"]}, "structure")
    assert expr_from_doc(json.loads(json.dumps(doc))) == e


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_expr_doc_round_trip_random(seed):
    e = random_poly(random.Random(seed), 2, 3, 4)
    assert expr_from_doc(expr_to_doc(e)) == e


@pytest.mark.parametrize("name", EXAMPLES)
def test_structure_round_trip(name):
    ex = example(name)
    doc = json.loads(json.dumps(structure_to_doc(ex.omega1, ex.omega2, ex.n, ex.order, ex.labels)))
    kind, n, order, o1, o2 = structure_from_doc(doc)
    assert (kind, n, order) == ("kernels", ex.n, ex.order)
    for A, B in ((o1, ex.omega1), (o2, ex.omega2)):
        for m, P in B.items():
            assert A[m] == P


def test_structure_rejects_non_antisymmetric_kernel():
    doc = {"n": 1, "order": 0, "kernels": [
        {"a": 1, "components": {"1,1": [{"k": 1, "eps": 0, "coeff": {"jet": [1, 0]}}]}},
        {"a": 2, "components": {"1,1": [{"k": 1, "eps": 0, "coeff": "1"}]}}]}
    with pytest.raises(SchemaError, match="antisymmetric"):
        structure_from_doc(doc)


def test_skew_completion_of_upper_triangle():
    doc = {"n": 1, "order": 0, "kernels": [
        {"a": 1, "components": {"1,1": [{"k": 1, "eps": 0, "coeff": "1"}]}},
        {"a": 2, "skew_complete": True, "components": {"1,1": [{"k": 1, "eps": 0, "coeff": {"jet": [1, 0]}}]}}]}
    _, _, _, _, o2 = structure_from_doc(doc)
    assert o2[0] == example("kdv0").omega2[0]


@pytest.mark.parametrize("doc", [
    {},
    {"n": 0, "f": ["1"]},
    {"n": 1, "f": ["1"], "kernels": []},
    {"n": 1, "f": ["1", "2"]},
    {"n": 1, "f": [{"op": "pow", "args": ["2", "1/2"]}]},
    {"n": 1, "f": ["1/0"]},
    {"n": 1, "order": 0, "kernels": [{"a": 1, "components": {"1,2": []}}, {"a": 2, "components": {}}]},
    {"n": 1, "order": 0, "kernels": [{"a": 1, "components": {}}, {"a": 1, "components": {}}]},
    {"n": 1, "order": 0, "kernels": [{"a": 1, "components": {"1,1": [{"k": 1, "eps": 2, "coeff": "1"}]}},
                                     {"a": 2, "components": {}}]},
])
def test_structure_schema_errors(doc):
    with pytest.raises(SchemaError):
        structure_from_doc(doc)
