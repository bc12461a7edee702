"""Tests for the closed-form box moments."""

import numpy as np
import pytest

from mpecsos.boxmoments import box_moment, moment_vector
from mpecsos.polynomials import Polynomial, monomial_basis


def test_total_mass():
    assert box_moment((0, 0), 1.0) == 1.0


def test_odd_exponent_exactly_zero():
    assert box_moment((1, 0), 1.0) == 0.0
    # bitwise zero for any odd entry, any half-width
    for alpha in [(3, 0), (0, 1), (2, 5), (1, 1)]:
        assert box_moment(alpha, 1.7) == 0.0


def test_even_moment_closed_form():
    # integral of t^2/2 over [-1,1] is 1/3; t^4 gives 1/5
    assert box_moment((2, 4), 1.0) == pytest.approx(1.0 / 15.0, rel=1e-15)


def test_halfwidth_scaling():
    # c^a/(a+1) per axis
    assert box_moment((2,), 2.0) == pytest.approx(4.0 / 3.0)
    assert box_moment((2, 2), [1.0, 2.0]) == pytest.approx((1.0 / 3.0) * (4.0 / 3.0))


def test_moment_vector_degree_two():
    mv = moment_vector(2, 2, 1.0)
    assert mv.values == (1.0, 0.0, 0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0)


def test_moment_vector_single_constant():
    mv = moment_vector(1, 0, 5.0)
    assert mv.values == (1.0,)


def test_moment_vector_mixed_entry():
    mv = moment_vector(2, 4, 1.0)
    idx = mv.basis.index((2, 2))
    assert mv.values[idx] == pytest.approx(1.0 / 9.0)


def test_constant_polynomial_pairing_is_one():
    mv = moment_vector(3, 4, 0.8)
    one = Polynomial.constant(["a", "b", "c"], 1.0)
    assert mv.pairing(one.terms) == pytest.approx(1.0)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        moment_vector(2, 3, 1.0)  # odd degree
    with pytest.raises(ValueError):
        box_moment((2,), 0.0)
    with pytest.raises(ValueError):
        box_moment((2, 2), [1.0])


def test_quadrature_consistency():
    """Pairing against moments matches a dense tensor-grid quadrature."""
    rng = np.random.default_rng(7)
    basis = monomial_basis(2, 6)
    # midpoint rule on a 200x200 grid over [-1,1]^2
    nodes = -1.0 + (np.arange(200) + 0.5) * (2.0 / 200)
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    mv = moment_vector(2, 6, 1.0)
    for _ in range(5):
        coeffs = rng.uniform(-1, 1, size=len(basis))
        poly = Polynomial(["x", "y"], dict(zip(basis.monomials, coeffs)))
        exact = mv.pairing(poly.terms)
        grid = poly.evaluate_broadcast([X, Y]).mean()
        assert grid == pytest.approx(exact, abs=1e-4)
