"""Closed-form moments of the uniform probability measure on a box.

For the box with per-coordinate half-widths c_i the normalized moment of
the monomial z^alpha factorizes into 1-D integrals

    (1 / 2c) * integral_{-c}^{c} t^a dt  =  c^a / (a + 1)   (a even)
                                         =  0               (a odd),

so every moment is computed exactly, never by quadrature, and odd
exponents give a bitwise zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .polynomials import Exponent, MonomialBasis, monomial_basis

Halfwidths = Union[float, Sequence[float]]


def _per_axis(halfwidth: Halfwidths, num_vars: int) -> Tuple[float, ...]:
    if np.isscalar(halfwidth):
        widths = (float(halfwidth),) * num_vars
    else:
        widths = tuple(float(c) for c in halfwidth)
        if len(widths) != num_vars:
            raise ValueError(
                f"{len(widths)} half-widths for {num_vars} variables"
            )
    if any(c <= 0 for c in widths):
        raise ValueError("half-widths must be positive")
    return widths


def box_moment(alpha: Exponent, halfwidth: Halfwidths) -> float:
    """Moment of z^alpha under the uniform probability measure on the box."""
    widths = _per_axis(halfwidth, len(alpha))
    value = 1.0
    for a, c in zip(alpha, widths):
        if a % 2 == 1:
            return 0.0
        if a:
            value *= c**a / (a + 1)
    return value


@dataclass(frozen=True)
class MomentVector:
    """Box moments aligned with a graded-lex monomial basis."""

    basis: MonomialBasis
    values: Tuple[float, ...]
    halfwidths: Tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.basis):
            raise ValueError("one moment per basis monomial required")

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def pairing(self, coefficients: dict) -> float:
        """Sum of coefficient * moment over the given exponent->coeff map."""
        total = 0.0
        for alpha, c in coefficients.items():
            total += c * self.values[self.basis.index(alpha)]
        return total


def moment_vector(num_vars: int, degree: int, halfwidth: Halfwidths) -> MomentVector:
    """All moments up to the given (even) total degree."""
    if degree < 0 or degree % 2 != 0:
        raise ValueError("degree must be even and nonnegative")
    widths = _per_axis(halfwidth, num_vars)
    basis = monomial_basis(num_vars, degree)
    values = tuple(box_moment(alpha, widths) for alpha in basis.monomials)
    return MomentVector(basis=basis, values=values, halfwidths=widths)
