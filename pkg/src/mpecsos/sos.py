"""Positivity certificates and moment relaxations as block SDPs.

Two translations live here.  The identity builder encodes

    target(z) - p(z) = sigma_0(z) + sum_j sigma_j(z) h_j(z)

with sum-of-squares multipliers sigma_j (Gram matrices, one PSD block
each) and an unknown polynomial p whose coefficients enter as free scalar
variables; maximizing a moment pairing of p makes the optimal p the best
certified under-approximation of min-over-constrained-variables of the
target.  The relaxation builder encodes the order-t pseudo-moment problem
for  min f over {h_l >= 0}:  a free vector of moments y constrained by
y_0 = 1 plus one PSD moment matrix and one PSD localizing matrix per
generator, each tied entrywise to y.

A relaxation that the solver proves infeasible certifies the described
set empty, which is exactly the one-sided emptiness test the outer
algorithm needs.  When the solved moment matrix satisfies the rank
(flatness) condition, the generating atoms are recovered with the
shifted-basis multiplication-operator method and cross-checked by
rebuilding the moment vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .boxmoments import MomentVector
from .polynomials import (
    Exponent,
    MonomialBasis,
    Polynomial,
    monomial_basis,
)
from .sdp import (
    BlockKind,
    SdpBlock,
    SdpConstraint,
    SdpProblem,
    SdpSolution,
    SdpStatus,
    SolverOptions,
    solve,
)

RANK_TOL = 1e-6
ATOM_FEAS_TOL = 1e-6
MOMENT_REBUILD_TOL = 1e-5


class ExtractionError(RuntimeError):
    """Atom recovery failed; callers treat the solution as not flat."""


class RelaxationError(RuntimeError):
    """The SDP behind a relaxation could not be solved reliably."""


def _add_exponents(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


# ----------------------------------------------------------------------
# sum-of-squares identity programs


@dataclass
class SosIdentityProgram:
    """Structure of one identity program and its SDP index maps."""

    ambient: Tuple[str, ...]
    target: Polynomial
    p_vars: Tuple[str, ...]
    p_degree: int
    p_basis: MonomialBasis            # over p_vars
    p_exponents_ambient: Tuple[Exponent, ...]
    multipliers: Tuple[Tuple[Polynomial, int], ...]
    sigma_bases: Tuple[MonomialBasis, ...]  # sigma_0 first, then one per multiplier
    row_basis: MonomialBasis          # ambient monomials with one equality row each
    gamma: MomentVector

    @property
    def free_block_index(self) -> int:
        return len(self.sigma_bases)


def build_sos_identity(
    target: Polynomial,
    p_vars: Sequence[str],
    p_degree: int,
    multipliers: Sequence[Tuple[Polynomial, int]],
    gamma: MomentVector,
) -> Tuple[SosIdentityProgram, SdpProblem]:
    """Encode the weighted-SOS identity as a block SDP.

    ``p_degree`` bounds the unknown polynomial (an even integer 2k); each
    multiplier comes with the degree bound of its Gram basis, so
    deg(sigma_j h_j) <= 2 * bound + deg h_j must not exceed the row degree.
    """
    ambient = target.variables
    p_vars = tuple(p_vars)
    for name in p_vars:
        if name not in ambient:
            raise ValueError(f"free-polynomial variable {name!r} not in ambient")
    if p_degree < 0 or p_degree % 2 != 0:
        raise ValueError("free polynomial degree must be even and nonnegative")

    sigma0_deg = max(p_degree // 2, math.ceil(target.degree / 2))
    row_degree = max(2 * sigma0_deg, p_degree, target.degree)
    mult_list = []
    for h, bound in multipliers:
        if h.variables != ambient:
            h = h.in_variables(ambient)
        if bound < 0:
            raise ValueError("Gram degree bound must be nonnegative")
        if 2 * bound + h.degree > row_degree:
            raise ValueError(
                f"multiplier degree bound violated: 2*{bound} + {h.degree} "
                f"> {row_degree}"
            )
        mult_list.append((h, bound))

    p_basis = monomial_basis(len(p_vars), p_degree)
    if len(gamma.basis) != len(p_basis):
        raise ValueError("moment vector does not match the free-polynomial basis")
    positions = [ambient.index(v) for v in p_vars]
    p_exp_ambient = []
    for alpha in p_basis.monomials:
        beta = [0] * len(ambient)
        for pos, e in zip(positions, alpha):
            beta[pos] = e
        p_exp_ambient.append(tuple(beta))

    sigma_bases = [monomial_basis(len(ambient), sigma0_deg)]
    sigma_bases += [monomial_basis(len(ambient), bound) for _, bound in mult_list]
    row_basis = monomial_basis(len(ambient), row_degree)

    prog = SosIdentityProgram(
        ambient=ambient,
        target=target,
        p_vars=p_vars,
        p_degree=p_degree,
        p_basis=p_basis,
        p_exponents_ambient=tuple(p_exp_ambient),
        multipliers=tuple(mult_list),
        sigma_bases=tuple(sigma_bases),
        row_basis=row_basis,
        gamma=gamma,
    )

    # per-row coefficient matrices: Gram entries whose monomial products
    # land on the row monomial, plus the matching free p coefficient
    num_rows = len(row_basis)
    gram_coeffs: List[Dict[int, np.ndarray]] = [dict() for _ in range(num_rows)]

    def scatter(block: int, basis: MonomialBasis, weight_terms: Dict[Exponent, float]):
        n = len(basis)
        for a in range(n):
            for b in range(n):
                base = _add_exponents(basis.monomials[a], basis.monomials[b])
                for gamma_exp, coeff in weight_terms.items():
                    row_mono = _add_exponents(base, gamma_exp)
                    if row_mono not in row_basis:
                        continue
                    ri = row_basis.index(row_mono)
                    mat = gram_coeffs[ri].get(block)
                    if mat is None:
                        mat = np.zeros((n, n))
                        gram_coeffs[ri][block] = mat
                    mat[a, b] += coeff

    one = {(0,) * len(ambient): 1.0}
    scatter(0, sigma_bases[0], one)
    for j, (h, _) in enumerate(mult_list, start=1):
        scatter(j, sigma_bases[j], h.terms)

    free_index = prog.free_block_index
    constraints = []
    for ri, row_mono in enumerate(row_basis.monomials):
        coeffs = dict(gram_coeffs[ri])
        free_vec = np.zeros(len(p_basis))
        touched = False
        for pi, beta in enumerate(p_exp_ambient):
            if beta == row_mono:
                free_vec[pi] = 1.0
                touched = True
        if touched:
            coeffs[free_index] = free_vec
        if not coeffs:
            continue  # row can never be populated; target must be zero there
        constraints.append(SdpConstraint(coeffs, target.coefficient(row_mono)))

    blocks = [SdpBlock(BlockKind.PSD, len(b)) for b in sigma_bases]
    blocks.append(SdpBlock(BlockKind.FREE, len(p_basis)))
    objective = {free_index: -gamma.as_array()}
    sdp = SdpProblem(blocks=blocks, objective=objective, constraints=constraints)
    return prog, sdp


@dataclass
class SosIdentitySolution:
    p: Polynomial
    sigma_grams: List[np.ndarray]
    rho: float
    gap: float
    status: SdpStatus
    raw: SdpSolution

    def identity_residual(self, prog: SosIdentityProgram) -> float:
        """Max-abs coefficient of target - p - sigma_0 - sum sigma_j h_j."""
        ambient = prog.ambient
        total = prog.target - self.p.in_variables(ambient)
        for j, basis in enumerate(prog.sigma_bases):
            gram = self.sigma_grams[j]
            sigma = Polynomial.zero(ambient)
            terms: Dict[Exponent, float] = {}
            for a in range(len(basis)):
                for b in range(len(basis)):
                    mono = _add_exponents(basis.monomials[a], basis.monomials[b])
                    terms[mono] = terms.get(mono, 0.0) + gram[a, b]
            sigma = Polynomial(ambient, terms)
            if j == 0:
                total = total - sigma
            else:
                total = total - sigma * prog.multipliers[j - 1][0]
        if not total.terms:
            return 0.0
        return max(abs(c) for c in total.terms.values())


def solve_sos_identity(
    prog: SosIdentityProgram,
    sdp: SdpProblem,
    options: Optional[SolverOptions] = None,
) -> SosIdentitySolution:
    sol = solve(sdp, options)
    if sol.status not in (SdpStatus.OPTIMAL, SdpStatus.ITERATION_LIMIT):
        raise RelaxationError(f"identity program not solved: {sol.status.value}")
    if sol.status is SdpStatus.ITERATION_LIMIT:
        if max(sol.primal_residual, sol.dual_residual, sol.gap) > 1e-6:
            raise RelaxationError("identity program stalled with poor residuals")
    p_values = sol.primal[prog.free_block_index]
    terms = dict(zip(prog.p_basis.monomials, p_values))
    p = Polynomial(prog.p_vars, terms)
    grams = [np.array(sol.primal[j]) for j in range(len(prog.sigma_bases))]
    rho = float(prog.gamma.as_array() @ p_values)
    return SosIdentitySolution(
        p=p, sigma_grams=grams, rho=rho, gap=sol.gap, status=sol.status, raw=sol
    )


# ----------------------------------------------------------------------
# moment relaxations


@dataclass
class MomentRelaxation:
    variables: Tuple[str, ...]
    objective: Polynomial
    generators: Tuple[Polynomial, ...]
    order: int
    y_basis: MonomialBasis            # all moments up to degree 2t
    moment_basis: MonomialBasis       # rows/cols of the moment matrix
    localizing_bases: Tuple[MonomialBasis, ...]
    flat_step: int                    # v = max_j ceil(deg h_j / 2), at least 1
    scaling: Tuple[float, ...] = ()   # per-coordinate stretch applied on entry

    @property
    def free_block_index(self) -> int:
        return 1 + len(self.generators)

    def unscale_point(self, point: np.ndarray) -> np.ndarray:
        if not self.scaling:
            return point
        return point * np.array(self.scaling)


def build_moment_relaxation(
    f: Polynomial,
    generators: Sequence[Polynomial],
    order: int,
    scaling: Optional[Sequence[float]] = None,
) -> Tuple[MomentRelaxation, SdpProblem]:
    """Order-t moment relaxation of  min f  over  {h >= 0 for h in generators}.

    ``scaling`` stretches each coordinate before building (z_i = c_i w_i),
    which normalizes sets living in wide boxes to the unit box; high-order
    moments otherwise span c^(2t) in magnitude and wreck the solve.  Atoms
    are mapped back to the original coordinates by the solution path.
    """
    variables = f.variables
    gens = []
    for h in generators:
        if h.variables != variables:
            h = h.in_variables(variables)
        gens.append(h)
    scale_tuple: Tuple[float, ...] = ()
    if scaling is not None:
        scale_tuple = tuple(float(c) for c in scaling)
        if len(scale_tuple) != len(variables):
            raise ValueError("one scaling entry per variable required")
        if any(c <= 0 for c in scale_tuple):
            raise ValueError("scaling entries must be positive")
        mapping = {
            name: Polynomial.monomial(
                variables,
                tuple(1 if j == i else 0 for j in range(len(variables))),
                c,
            )
            for i, (name, c) in enumerate(zip(variables, scale_tuple))
        }
        f = f.substitute(mapping)
        gens = [h.substitute(mapping) for h in gens]
    t = order
    if t < math.ceil(f.degree / 2):
        raise ValueError(f"order {t} below objective half-degree")
    for h in gens:
        if t < math.ceil(h.degree / 2):
            raise ValueError(f"order {t} below half-degree of generator {h.render()}")

    n = len(variables)
    y_basis = monomial_basis(n, 2 * t)
    mm_basis = monomial_basis(n, t)
    loc_bases = [monomial_basis(n, t - math.ceil(h.degree / 2)) for h in gens]
    flat_step = max([1] + [math.ceil(h.degree / 2) for h in gens])

    relax = MomentRelaxation(
        variables=variables,
        objective=f,
        generators=tuple(gens),
        order=t,
        y_basis=y_basis,
        moment_basis=mm_basis,
        localizing_bases=tuple(loc_bases),
        flat_step=flat_step,
        scaling=scale_tuple,
    )

    free_index = relax.free_block_index
    ny = len(y_basis)
    constraints = []

    # normalization y_0 = 1
    e0 = np.zeros(ny)
    e0[y_basis.index((0,) * n)] = 1.0
    constraints.append(SdpConstraint({free_index: e0}, 1.0))

    def tie_block(block: int, basis: MonomialBasis, weight_terms: Dict[Exponent, float]):
        nb = len(basis)
        for a in range(nb):
            for b in range(a, nb):
                coeff = np.zeros((nb, nb))
                coeff[a, b] += 0.5
                coeff[b, a] += 0.5
                free_vec = np.zeros(ny)
                for gamma_exp, w in weight_terms.items():
                    mono = _add_exponents(
                        _add_exponents(basis.monomials[a], basis.monomials[b]),
                        gamma_exp,
                    )
                    free_vec[y_basis.index(mono)] -= w
                constraints.append(
                    SdpConstraint({block: coeff, free_index: free_vec}, 0.0)
                )

    tie_block(0, mm_basis, {(0,) * n: 1.0})
    for j, h in enumerate(gens, start=1):
        tie_block(j, loc_bases[j - 1], h.terms)

    blocks = [SdpBlock(BlockKind.PSD, len(mm_basis))]
    blocks += [SdpBlock(BlockKind.PSD, len(b)) for b in loc_bases]
    blocks.append(SdpBlock(BlockKind.FREE, ny))

    obj_vec = np.zeros(ny)
    for alpha, c in f.terms.items():
        obj_vec[y_basis.index(alpha)] = c
    sdp = SdpProblem(
        blocks=blocks, objective={free_index: obj_vec}, constraints=constraints
    )
    return relax, sdp


@dataclass
class MomentSolution:
    moments: np.ndarray               # aligned with relax.y_basis
    bound: float
    ranks: List[int]
    rank_tolerance: float
    flat: bool
    atoms: List[np.ndarray] = field(default_factory=list)
    status: SdpStatus = SdpStatus.OPTIMAL
    raw: Optional[SdpSolution] = None


def moment_matrix(
    moments: np.ndarray, relax: MomentRelaxation, degree: int
) -> np.ndarray:
    basis = monomial_basis(len(relax.variables), degree)
    n = len(basis)
    M = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            mono = _add_exponents(basis.monomials[a], basis.monomials[b])
            M[a, b] = M[b, a] = moments[relax.y_basis.index(mono)]
    return M


def _numeric_rank(mat: np.ndarray, tol: float) -> int:
    if mat.size == 0:
        return 0
    svals = np.linalg.svd(mat, compute_uv=False)
    top = svals.max() if len(svals) else 0.0
    if top <= 0:
        return 0
    return int(np.sum(svals > tol * top))


def check_flatness(
    moments: np.ndarray, relax: MomentRelaxation, tol: float = RANK_TOL
) -> Tuple[bool, List[int]]:
    """Rank test: the order-t and order-(t - v) moment matrices agree.

    Ranks are governed by the singular-value threshold tol * sigma_max,
    which rounds ambiguous spectra toward fewer atoms.
    """
    t = relax.order
    v = relax.flat_step
    ranks = [
        _numeric_rank(moment_matrix(moments, relax, s), tol) for s in range(t + 1)
    ]
    if t - v < 0:
        return False, ranks
    flat = ranks[t] == ranks[t - v]
    return flat, ranks


def extract_atoms(
    moments: np.ndarray, relax: MomentRelaxation, tol: float = RANK_TOL
) -> List[np.ndarray]:
    """Recover support points of a flat truncated moment sequence.

    Factors the moment matrix, selects a low-degree pivot basis, forms the
    per-variable multiplication operators and reads the atoms off a joint
    Schur decomposition.  Raises ExtractionError when the numerics do not
    cooperate; callers then treat the relaxation as not flat.
    """
    t = relax.order
    v = relax.flat_step
    nvars = len(relax.variables)
    M = moment_matrix(moments, relax, t)
    M = 0.5 * (M + M.T)
    low = moment_matrix(moments, relax, max(t - v, 0))
    r = _numeric_rank(low, tol)
    if r == 0:
        raise ExtractionError("moment matrix numerically zero")

    evals, evecs = np.linalg.eigh(M)
    idx = np.argsort(evals)[::-1][:r]
    lam = evals[idx]
    if lam.min() <= 0:
        raise ExtractionError("rank deficiency inconsistent with requested atoms")
    V = evecs[:, idx] * np.sqrt(lam)

    # greedy low-degree pivot rows, capped at degree t - v so every
    # variable shift stays inside the factored matrix
    basis = relax.moment_basis
    max_pivot_degree = t - v
    pivots: List[int] = []
    for i, mono in enumerate(basis.monomials):
        if sum(mono) > max_pivot_degree:
            break
        trial = pivots + [i]
        if np.linalg.matrix_rank(V[trial], tol=1e-8 * max(1.0, abs(V).max())) == len(
            trial
        ):
            pivots.append(i)
        if len(pivots) == r:
            break
    if len(pivots) < r:
        raise ExtractionError("no well-conditioned pivot basis of low degree")

    B = V[pivots]
    shift_ops = []
    for ell in range(nvars):
        rows = []
        for i in pivots:
            shifted = list(basis.monomials[i])
            shifted[ell] += 1
            rows.append(basis.index(tuple(shifted)))
        try:
            N_ell = np.linalg.solve(B.T, V[rows].T).T
        except np.linalg.LinAlgError as err:
            raise ExtractionError(f"singular pivot basis: {err}") from err
        shift_ops.append(N_ell)

    rng = np.random.default_rng(0)
    weights = rng.dirichlet(np.ones(nvars))
    combined = sum(w * N for w, N in zip(weights, shift_ops))
    T, Q = sla.schur(combined, output="real")
    off = np.tril(T, -1)
    if np.abs(off).max() > 1e-6 * max(1.0, np.abs(T).max()):
        raise ExtractionError("complex eigenvalues in the shift operator")

    atoms = []
    for i in range(r):
        q = Q[:, i]
        atoms.append(np.array([float(q @ N @ q) for N in shift_ops]))
    atoms.sort(key=lambda a: tuple(a))

    _verify_atoms(atoms, moments, relax)
    return atoms


def _verify_atoms(atoms, moments, relax):
    vdm = np.zeros((len(relax.y_basis), len(atoms)))
    for j, atom in enumerate(atoms):
        for i, mono in enumerate(relax.y_basis.monomials):
            val = 1.0
            for x, e in zip(atom, mono):
                if e:
                    val *= x**e
            vdm[i, j] = val
    wts, *_ = np.linalg.lstsq(vdm, moments, rcond=None)
    rebuilt = vdm @ wts
    err = np.abs(rebuilt - moments).max()
    if err > MOMENT_REBUILD_TOL:
        raise ExtractionError(f"atoms rebuild moments only to {err:.2e}")
    if wts.min() < -1e-4:
        raise ExtractionError("negative atom weight")
    for h in relax.generators:
        for atom in atoms:
            if h.evaluate(atom) < -ATOM_FEAS_TOL:
                raise ExtractionError(
                    f"atom {atom} violates generator {h.render()}"
                )


def solve_moment_relaxation(
    relax: MomentRelaxation,
    sdp: SdpProblem,
    options: Optional[SolverOptions] = None,
) -> MomentSolution:
    sol = solve(sdp, options)
    if sol.status is SdpStatus.PRIMAL_INFEASIBLE:
        return MomentSolution(
            moments=np.zeros(len(relax.y_basis)),
            bound=math.inf,
            ranks=[],
            rank_tolerance=RANK_TOL,
            flat=False,
            status=sol.status,
            raw=sol,
        )
    if sol.status not in (SdpStatus.OPTIMAL, SdpStatus.ITERATION_LIMIT):
        raise RelaxationError(f"moment relaxation not solved: {sol.status.value}")
    if sol.status is SdpStatus.ITERATION_LIMIT:
        if max(sol.primal_residual, sol.dual_residual, sol.gap) > 1e-6:
            raise RelaxationError("moment relaxation stalled with poor residuals")
    moments = np.array(sol.primal[relax.free_block_index])
    bound = sol.primal_objective
    flat, ranks = check_flatness(moments, relax)
    atoms: List[np.ndarray] = []
    if flat:
        try:
            atoms = [relax.unscale_point(a) for a in extract_atoms(moments, relax)]
        except ExtractionError:
            flat = False
            atoms = []
    return MomentSolution(
        moments=moments,
        bound=bound,
        ranks=ranks,
        rank_tolerance=RANK_TOL,
        flat=flat,
        atoms=atoms,
        status=sol.status,
        raw=sol,
    )


# ----------------------------------------------------------------------
# feasibility certification and the bounded hierarchy


class FeasibilityStatus(enum.Enum):
    NONEMPTY = "Nonempty"
    EMPTY_CERTIFIED = "EmptyCertified"
    UNKNOWN = "Unknown"


@dataclass
class FeasibilityResult:
    status: FeasibilityStatus
    witness: Optional[np.ndarray] = None
    certificate_residual: float = math.nan
    detail: str = ""


def certify_feasibility(
    generators: Sequence[Polynomial],
    order: int,
    options: Optional[SolverOptions] = None,
    scaling: Optional[Sequence[float]] = None,
) -> FeasibilityResult:
    """One-sided emptiness test for {h >= 0} via the order-t relaxation.

    Only the infeasibility direction is a proof: a certified-infeasible
    relaxation implies the set is empty, while a feasible relaxation of
    finite order says nothing definite unless the moments are flat and an
    actual witness point can be extracted.
    """
    if not generators:
        raise ValueError("at least one generator required")
    variables = generators[0].variables
    zero = Polynomial.zero(variables)
    relax, sdp = build_moment_relaxation(zero, generators, order, scaling)
    try:
        msol = solve_moment_relaxation(relax, sdp, options)
    except RelaxationError as err:
        return FeasibilityResult(FeasibilityStatus.UNKNOWN, detail=str(err))
    if msol.status is SdpStatus.PRIMAL_INFEASIBLE:
        return FeasibilityResult(
            FeasibilityStatus.EMPTY_CERTIFIED,
            certificate_residual=msol.raw.certificate_residual,
        )
    if msol.flat and msol.atoms:
        return FeasibilityResult(FeasibilityStatus.NONEMPTY, witness=msol.atoms[0])

    # the zero objective parks the interior-point iterate at a non-atomic
    # center; minimizing a linear probe pushes the moments to an extreme
    # point of the set, which extracts to an explicit witness when flat
    probe = Polynomial(
        variables,
        {
            tuple(1 if j == i else 0 for j in range(len(variables))): 1.0
            for i in range(len(variables))
        },
    )
    try:
        relax_p, sdp_p = build_moment_relaxation(probe, generators, order, scaling)
        probe_sol = solve_moment_relaxation(relax_p, sdp_p, options)
    except RelaxationError as err:
        return FeasibilityResult(FeasibilityStatus.UNKNOWN, detail=str(err))
    if probe_sol.status is SdpStatus.PRIMAL_INFEASIBLE:
        return FeasibilityResult(
            FeasibilityStatus.EMPTY_CERTIFIED,
            certificate_residual=probe_sol.raw.certificate_residual,
        )
    if probe_sol.flat and probe_sol.atoms:
        return FeasibilityResult(
            FeasibilityStatus.NONEMPTY, witness=probe_sol.atoms[0]
        )
    return FeasibilityResult(
        FeasibilityStatus.UNKNOWN, detail="feasible relaxation without flatness"
    )


@dataclass
class HierarchyResult:
    bound: float
    flat: bool
    atoms: List[np.ndarray]
    order: int
    bounds_by_order: List[Tuple[int, float]]
    infeasible: bool = False


def minimize_hierarchy(
    f: Polynomial,
    generators: Sequence[Polynomial],
    start_order: int,
    max_order: int,
    options: Optional[SolverOptions] = None,
    scaling: Optional[Sequence[float]] = None,
) -> HierarchyResult:
    """Solve relaxations of increasing order until the moments go flat.

    Returns the best (largest) certified lower bound over the orders tried
    together with extracted minimizers when flatness was reached.
    """
    bounds = []
    best = -math.inf
    flat = False
    atoms: List[np.ndarray] = []
    used = start_order
    failures = []
    for t in range(start_order, max_order + 1):
        relax, sdp = build_moment_relaxation(f, generators, t, scaling)
        try:
            msol = solve_moment_relaxation(relax, sdp, options)
        except RelaxationError as err:
            failures.append(f"order {t}: {err}")
            continue
        if msol.status is SdpStatus.PRIMAL_INFEASIBLE:
            return HierarchyResult(
                bound=math.inf,
                flat=False,
                atoms=[],
                order=t,
                bounds_by_order=bounds,
                infeasible=True,
            )
        bounds.append((t, msol.bound))
        if msol.bound > best:
            best = msol.bound
            used = t
        if msol.flat:
            flat = True
            atoms = msol.atoms
            used = t
            best = max(best, msol.bound)
            break
    if not bounds:
        raise RelaxationError("; ".join(failures) or "no relaxation order solved")
    return HierarchyResult(
        bound=best, flat=flat, atoms=atoms, order=used, bounds_by_order=bounds
    )
