from math import factorial

import numpy as np
import pytest

from nlsrelax.quadrature import collapsed_gauss, triangle_rule


def exact_monomial(a, b):
    """int x^a y^b over the reference triangle, normalised by its area 1/2."""
    return 2 * factorial(a) * factorial(b) / factorial(a + b + 2)


def check_exactness(rule, degree):
    x, y = rule.reference_xy.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = rule.weights @ (x**a * y**b)
            ref = exact_monomial(a, b)
            assert abs(got - ref) <= 1e-14 * ref, (a, b)


@pytest.mark.parametrize("degree,npoints", [(4, 6), (6, 12)])
def test_symmetric_rules(degree, npoints):
    rule = triangle_rule(degree)
    assert len(rule) == npoints
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(rule.weights > 0) and np.all(rule.points > 0)
    np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)
    check_exactness(rule, degree)


@pytest.mark.parametrize("degree", [7, 10, 14])
def test_collapsed_gauss(degree):
    rule = triangle_rule(degree)
    assert rule.degree == degree
    check_exactness(rule, degree)


def test_symmetric_rules_fail_one_degree_higher():
    x, y = triangle_rule(4).reference_xy.T
    errs = [abs(triangle_rule(4).weights @ (x**a * y**(5 - a)) - exact_monomial(a, 5 - a)) for a in range(6)]
    assert max(errs) > 1e-8


def test_collapsed_gauss_is_cached():
    assert collapsed_gauss(8) is collapsed_gauss(8)
