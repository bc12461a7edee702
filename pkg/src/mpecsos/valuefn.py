"""Polynomial under-approximation of the inner value function.

For an instance with coupling polynomial phi(x, y, v) and inner
constraints h_j, the order-k program searches for a polynomial p(x, y) of
degree at most 2k maximizing its integral against the uniform box measure
subject to the certificate

    phi(x, y, v) - p(x, y)  =  sigma_0 + sum_{j<=s} sigma_j h_j(x, v)
                                       + sum_j sigma'_j (M_y_j - y_j^2),

which forces p below the inner value function on the box.  The inner
constraints enter with v substituted for y; the x-coordinate box
constraints are deliberately left out of the multiplier list (the
certificate does not need them, and leaving them out keeps the program
smaller), while the y-coordinate box constraints are kept.

The optimal p is the order-k value-function approximation; its pairing
with the box moments is the program value rho_k.  Diagnostics compare p
against the brute-force oracle on a grid: p must stay below the oracle
everywhere (to tolerance) and the normalized L1 gap should shrink as k
grows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .boxmoments import moment_vector
from .oracle import OracleConfig, inner_value_grid, sym_grid
from .polynomials import Polynomial, grlex_key
from .problems import MpecProblem
from .sdp import SdpProblem, SolverOptions
from .sos import SosIdentityProgram, build_sos_identity, solve_sos_identity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ValueFunctionApprox:
    order: int
    fitted: Polynomial              # the solved polynomial over the fit variables
    polynomial: Polynomial          # equilibrium approximant over (x, y): fitted - offset
    rho: float                      # moment pairing of the fitted polynomial
    gap: float                      # solver gap achieved for the program
    multiplier_degrees: Tuple[int, ...]
    identity_error: float           # max-abs coefficient residual of the certificate

    def coefficient_table(self) -> List[dict]:
        """Graded-lex coefficient listing for golden-file comparison."""
        return [
            {"exponents": list(alpha), "coefficient": coeff}
            for alpha, coeff in sorted(
                self.fitted.terms.items(), key=lambda kv: grlex_key(kv[0])
            )
        ]


def build_value_program(
    problem: MpecProblem, order: int
) -> Tuple[SosIdentityProgram, SdpProblem]:
    """Assemble the order-k certificate program for the instance.

    The free polynomial ranges over the fit variables (all of x plus the
    y-variables that the coupling polynomial actually involves); the
    multipliers are the inner constraints with v substituted for y plus
    the box bounds of the fitted y-variables.  The x-coordinate box
    bounds are intentionally omitted.
    """
    k_min = problem.min_order()
    if order < k_min:
        raise ValueError(
            f"order {order} below the admissible threshold {k_min} "
            f"(half-degrees of the coupling polynomial and inner constraints)"
        )
    two_k = 2 * order
    fit_vars = problem.fit_variables()
    ambient = fit_vars + problem.v_vars
    target = problem.phi.in_variables(ambient)

    multipliers = []
    for h in problem.h_in_xv():
        bound = (two_k - h.degree) // 2
        multipliers.append((h.in_variables(ambient), bound))
    fit_y = [y for y in fit_vars if y in problem.y_vars]
    widths = dict(zip(problem.z_vars, problem.box.halfwidths))
    for name in fit_y:
        c = widths[name]
        ybox = Polynomial.constant(ambient, c * c) - Polynomial.variable(
            ambient, name
        ) ** 2
        multipliers.append((ybox, (two_k - 2) // 2))

    gamma = moment_vector(
        len(fit_vars), two_k, tuple(widths[name] for name in fit_vars)
    )
    prog, sdp = build_sos_identity(
        target=target,
        p_vars=fit_vars,
        p_degree=two_k,
        multipliers=multipliers,
        gamma=gamma,
    )
    return prog, sdp


def compute_value_approximation(
    problem: MpecProblem,
    order: int,
    options: Optional[SolverOptions] = None,
) -> ValueFunctionApprox:
    """Solve the order-k program and package the resulting polynomial."""
    prog, sdp = build_value_program(problem, order)
    sol = solve_sos_identity(prog, sdp, options)
    equilibrium = sol.p.in_variables(problem.z_vars) - problem.offset
    return ValueFunctionApprox(
        order=order,
        fitted=sol.p,
        polynomial=equilibrium,
        rho=sol.rho,
        gap=sol.gap,
        multiplier_degrees=tuple(2 * bound for _, bound in prog.multipliers),
        identity_error=sol.identity_residual(prog),
    )


def _evaluation_grid(problem: MpecProblem, points_per_dim: int) -> np.ndarray:
    axes = [sym_grid(c, points_per_dim) for c in problem.box.halfwidths]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _oracle_on_grid(problem, points, config):
    values = inner_value_grid(problem, points, config or OracleConfig())
    missing = int(np.isnan(values).sum())
    if missing:
        logger.warning(
            "inner slice empty at %d/%d grid points; those are skipped",
            missing,
            len(values),
        )
    return values


def lower_bound_violation(
    approx: ValueFunctionApprox,
    problem: MpecProblem,
    grid_points_per_dim: int = 41,
    config: Optional[OracleConfig] = None,
) -> float:
    """Largest amount by which the approximation exceeds the oracle.

    A correct certificate keeps this at roundoff level; values well above
    1e-6 mean the program (or the oracle) is wrong.
    """
    points = _evaluation_grid(problem, grid_points_per_dim)
    truth = _oracle_on_grid(problem, points, config)
    mask = ~np.isnan(truth)
    approx_vals = approx.polynomial.evaluate_array(points[mask])
    diff = approx_vals - truth[mask]
    return float(diff.max()) if diff.size else 0.0


def l1_distance(
    approx: ValueFunctionApprox,
    problem: MpecProblem,
    grid_points_per_dim: int = 41,
    config: Optional[OracleConfig] = None,
) -> float:
    """Grid estimate of the normalized L1 gap to the oracle value."""
    points = _evaluation_grid(problem, grid_points_per_dim)
    truth = _oracle_on_grid(problem, points, config)
    mask = ~np.isnan(truth)
    approx_vals = approx.polynomial.evaluate_array(points[mask])
    if not mask.any():
        return math.nan
    return float(np.abs(approx_vals - truth[mask]).mean())


def oracle_integral(
    problem: MpecProblem,
    grid_points_per_dim: int = 41,
    config: Optional[OracleConfig] = None,
) -> float:
    """Grid estimate of the oracle value integrated against the box measure."""
    points = _evaluation_grid(problem, grid_points_per_dim)
    truth = _oracle_on_grid(problem, points, config)
    return float(np.nanmean(truth))
