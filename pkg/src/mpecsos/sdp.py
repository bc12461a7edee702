"""Primal-dual interior-point solver for block semidefinite programs.

Problems are stated in equality-standard form over a product cone of
dense PSD blocks, nonnegative vectors and free (unconstrained) vectors:

    minimize    sum_B <C_B, X_B>
    subject to  sum_B <A_iB, X_B> = b_i,   i = 1..m,
                X_B in K_B.

The solver runs the homogeneous self-dual embedding with HKM search
directions and a Mehrotra predictor-corrector, so a run ends either at an
optimal primal-dual pair or at a certificate of primal or dual
infeasibility (the Farkas ray needed to prove a relaxation empty).  Free
variables are kept in the Newton system as an unrestricted block of the
Schur complement rather than split into differences of nonnegative parts,
which keeps the system well conditioned when free coefficients span
several orders of magnitude.

All linear algebra is dense: the moment and Gram matrices that arise here
have at most a few dozen rows, where forming the Schur complement with
BLAS-backed batched products beats any sparse machinery.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla


class BlockKind(enum.Enum):
    PSD = "psd"
    NONNEG = "nonneg"
    FREE = "free"


class SdpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    NUMERICAL_TROUBLE = "NumericalTrouble"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class SdpBlock:
    kind: BlockKind
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("block size must be >= 1")


@dataclass
class SdpConstraint:
    """One equality row: sum over touched blocks of <coeff, X_block> = rhs."""

    coeffs: Dict[int, np.ndarray]
    rhs: float


@dataclass
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iterations: int = 200
    step_fraction: float = 0.98

    def __post_init__(self):
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")


class SdpProblem:
    """Validated block-structured SDP in equality-standard form."""

    def __init__(
        self,
        blocks: Sequence[SdpBlock],
        objective: Dict[int, np.ndarray],
        constraints: Sequence[SdpConstraint],
    ):
        self.blocks = tuple(blocks)
        if not constraints:
            raise ValueError("at least one constraint is required")
        self.objective = {}
        for bi, coeff in objective.items():
            self.objective[bi] = self._check_coeff(bi, coeff, "objective")
        self.constraints = []
        for ci, con in enumerate(constraints):
            if not con.coeffs:
                raise ValueError(f"constraint {ci} touches no block")
            coeffs = {
                bi: self._check_coeff(bi, cf, f"constraint {ci}")
                for bi, cf in con.coeffs.items()
            }
            self.constraints.append(SdpConstraint(coeffs, float(con.rhs)))

    def _check_coeff(self, block_index: int, coeff, where: str) -> np.ndarray:
        if not 0 <= block_index < len(self.blocks):
            raise ValueError(f"{where}: no block {block_index}")
        block = self.blocks[block_index]
        arr = np.asarray(coeff, dtype=float)
        if block.kind is BlockKind.PSD:
            if arr.shape != (block.size, block.size):
                raise ValueError(f"{where}: expected {block.size}x{block.size} matrix")
            if not np.allclose(arr, arr.T, atol=1e-12):
                raise ValueError(f"{where}: PSD coefficient matrix not symmetric")
            arr = 0.5 * (arr + arr.T)
        else:
            if arr.shape != (block.size,):
                raise ValueError(f"{where}: expected vector of length {block.size}")
        return arr

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def rhs(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints])

    def dump(self) -> str:
        """Sparse text form for differential testing against other solvers.

        Header lines give block kinds/sizes and the right-hand side; each
        following line is ``constraint block row col value`` with
        constraint index 0 reserved for the objective (vector blocks use
        col = 0).
        """
        lines = [
            "blocks " + " ".join(f"{b.kind.value}:{b.size}" for b in self.blocks),
            "rhs " + " ".join(repr(c.rhs) for c in self.constraints),
        ]

        def emit(index: int, coeffs: Dict[int, np.ndarray]):
            for bi in sorted(coeffs):
                arr = coeffs[bi]
                if arr.ndim == 2:
                    rows, cols = np.nonzero(arr)
                    for r, c in zip(rows, cols):
                        if r <= c:
                            lines.append(f"{index} {bi} {r} {c} {arr[r, c]!r}")
                else:
                    for r in np.nonzero(arr)[0]:
                        lines.append(f"{index} {bi} {r} 0 {arr[r]!r}")

        emit(0, self.objective)
        for ci, con in enumerate(self.constraints, start=1):
            emit(ci, con.coeffs)
        return "\n".join(lines) + "\n"


@dataclass
class SdpSolution:
    status: SdpStatus
    primal: Optional[List[np.ndarray]]
    y: Optional[np.ndarray]
    s: Optional[List[np.ndarray]]
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    mu_history: List[float] = field(default_factory=list)
    # for infeasible statuses: norm of the (normalized) ray residual
    certificate_residual: float = math.nan


# ----------------------------------------------------------------------
# public residual computation


def residuals(
    problem: SdpProblem,
    primal: Sequence[np.ndarray],
    y: np.ndarray,
    s: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[float, float, float]:
    """Scale-normalized primal/dual residuals and relative gap.

    Dual slacks default to C - sum y_i A_i when not supplied.
    """
    blocks = problem.blocks
    if len(primal) != len(blocks):
        raise ValueError("one primal value per block required")
    for bi, block in enumerate(blocks):
        want = (block.size, block.size) if block.kind is BlockKind.PSD else (block.size,)
        if np.asarray(primal[bi]).shape != want:
            raise ValueError(f"primal block {bi} has wrong shape")
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.num_constraints,):
        raise ValueError("dual vector length mismatch")

    b = problem.rhs()
    ax = np.zeros(problem.num_constraints)
    for i, con in enumerate(problem.constraints):
        for bi, coeff in con.coeffs.items():
            ax[i] += float(np.sum(coeff * primal[bi]))
    p_res = np.linalg.norm(ax - b) / (1.0 + np.linalg.norm(b))

    c_norm_sq = 0.0
    pobj = 0.0
    dual_gap_blocks = []
    for bi, block in enumerate(blocks):
        coeff = problem.objective.get(bi)
        if coeff is None:
            coeff = (
                np.zeros((block.size, block.size))
                if block.kind is BlockKind.PSD
                else np.zeros(block.size)
            )
        c_norm_sq += float(np.sum(coeff**2))
        pobj += float(np.sum(coeff * primal[bi]))
        resid = np.array(coeff, dtype=float)
        for i, con in enumerate(problem.constraints):
            if bi in con.coeffs:
                resid -= y[i] * con.coeffs[bi]
        if s is not None:
            resid -= np.asarray(s[bi], dtype=float)
            dual_gap_blocks.append(resid)
        elif block.kind is BlockKind.FREE:
            # free blocks carry no slack: C - A^T y must vanish on its own
            dual_gap_blocks.append(resid)
        else:
            # slack defaults to C - A^T y, so the equation holds exactly
            dual_gap_blocks.append(np.zeros_like(resid))
    d_res = math.sqrt(sum(float(np.sum(r**2)) for r in dual_gap_blocks)) / (
        1.0 + math.sqrt(c_norm_sq)
    )
    dobj = float(b @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return p_res, d_res, gap


# ----------------------------------------------------------------------
# solver internals


class _Cone:
    """Stacked per-block constraint data used by the iteration."""

    def __init__(self, problem: SdpProblem):
        blocks = problem.blocks
        m = problem.num_constraints

        self.psd: List[dict] = []
        self.nn: List[dict] = []
        free_cols: List[np.ndarray] = []
        free_c: List[np.ndarray] = []

        # constraint-wise Frobenius prescaling to unit norm
        norms = np.zeros(m)
        for i, con in enumerate(problem.constraints):
            norms[i] = math.sqrt(
                sum(float(np.sum(cf**2)) for cf in con.coeffs.values())
            )
        norms = np.where(norms > 1e-12, norms, 1.0)
        self.row_scale = norms
        self.b = problem.rhs() / norms
        self.b_unscaled = problem.rhs()

        for bi, block in enumerate(blocks):
            rows = [
                i for i, con in enumerate(problem.constraints) if bi in con.coeffs
            ]
            cobj = problem.objective.get(bi)
            if block.kind is BlockKind.PSD:
                mats = np.zeros((len(rows), block.size, block.size))
                for k, i in enumerate(rows):
                    mats[k] = problem.constraints[i].coeffs[bi] / norms[i]
                self.psd.append(
                    {
                        "index": bi,
                        "size": block.size,
                        "rows": np.array(rows, dtype=int),
                        "mats": mats,
                        "C": np.zeros((block.size, block.size))
                        if cobj is None
                        else np.array(cobj),
                    }
                )
            elif block.kind is BlockKind.NONNEG:
                vecs = np.zeros((len(rows), block.size))
                for k, i in enumerate(rows):
                    vecs[k] = problem.constraints[i].coeffs[bi] / norms[i]
                self.nn.append(
                    {
                        "index": bi,
                        "size": block.size,
                        "rows": np.array(rows, dtype=int),
                        "vecs": vecs,
                        "c": np.zeros(block.size) if cobj is None else np.array(cobj),
                    }
                )
            else:
                col = np.zeros((m, block.size))
                for i, con in enumerate(problem.constraints):
                    if bi in con.coeffs:
                        col[i] = con.coeffs[bi] / norms[i]
                free_cols.append(col)
                free_c.append(
                    np.zeros(block.size) if cobj is None else np.array(cobj)
                )

        self.free_blocks = [
            bi for bi, b in enumerate(blocks) if b.kind is BlockKind.FREE
        ]
        self.free_sizes = [blocks[bi].size for bi in self.free_blocks]
        self.A_free = (
            np.concatenate(free_cols, axis=1) if free_cols else np.zeros((m, 0))
        )
        self.c_free = np.concatenate(free_c) if free_c else np.zeros(0)
        self.num_free = self.A_free.shape[1]
        self.m = m
        self.nu = sum(p["size"] for p in self.psd) + sum(n["size"] for n in self.nn)
        self.c_norm = math.sqrt(
            sum(float(np.sum(p["C"] ** 2)) for p in self.psd)
            + sum(float(np.sum(n["c"] ** 2)) for n in self.nn)
            + float(np.sum(self.c_free**2))
        )
        self.b_norm = float(np.linalg.norm(self.b_unscaled))


class _State:
    """Iterate of the homogeneous embedding."""

    def __init__(self, cone: _Cone):
        self.X = [np.eye(p["size"]) for p in cone.psd]
        self.S = [np.eye(p["size"]) for p in cone.psd]
        self.xn = [np.ones(n["size"]) for n in cone.nn]
        self.sn = [np.ones(n["size"]) for n in cone.nn]
        self.xf = np.zeros(cone.num_free)
        self.y = np.zeros(cone.m)
        self.tau = 1.0
        self.kappa = 1.0

    def mu(self, cone: _Cone) -> float:
        total = self.tau * self.kappa
        for X, S in zip(self.X, self.S):
            total += float(np.sum(X * S))
        for x, s in zip(self.xn, self.sn):
            total += float(x @ s)
        return total / (cone.nu + 1)


def _sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def _min_eig_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest step with X + a*dX staying PSD (uses a Cholesky transform)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(X)
        shift = max(0.0, -w.min()) + 1e-14 * max(1.0, w.max())
        L = np.linalg.cholesky(X + shift * np.eye(X.shape[0]))
    W = sla.solve_triangular(L, dX, lower=True)
    B = sla.solve_triangular(L, W.T, lower=True)
    lam = np.linalg.eigvalsh(_sym(B)).min()
    if lam >= -1e-16:
        return math.inf
    return 1.0 / (-lam)


def _vector_step(x: np.ndarray, dx: np.ndarray) -> float:
    mask = dx < 0
    if not mask.any():
        return math.inf
    return float(np.min(-x[mask] / dx[mask]))


class _HsdSolver:
    def __init__(self, problem: SdpProblem, options: SolverOptions):
        self.problem = problem
        self.opts = options
        self.cone = _Cone(problem)
        self.state = _State(self.cone)
        self.mu_history: List[float] = []

    # -- residuals of the homogeneous model (scaled data) ----------------

    def _residuals(self, st: _State):
        cone = self.cone
        r_p = cone.b * st.tau - self._apply_A(st)
        r_d_psd = []
        for p, S in zip(cone.psd, st.S):
            acc = p["C"] * st.tau - S
            if len(p["rows"]):
                acc = acc - np.einsum("i,ijk->jk", st.y[p["rows"]], p["mats"])
            r_d_psd.append(acc)
        r_d_nn = []
        for n, s in zip(cone.nn, st.sn):
            acc = n["c"] * st.tau - s
            if len(n["rows"]):
                acc = acc - n["vecs"].T @ st.y[n["rows"]]
            r_d_nn.append(acc)
        r_d_free = cone.c_free * st.tau - cone.A_free.T @ st.y
        ctx = self._ctx(st)
        bty = float(cone.b @ st.y)
        r_g = st.kappa - bty + ctx
        return r_p, r_d_psd, r_d_nn, r_d_free, r_g, ctx, bty

    def _apply_A(self, st: _State) -> np.ndarray:
        cone = self.cone
        out = np.zeros(cone.m)
        for p, X in zip(cone.psd, st.X):
            if len(p["rows"]):
                out[p["rows"]] += np.einsum("ijk,kj->i", p["mats"], X)
        for n, x in zip(cone.nn, st.xn):
            if len(n["rows"]):
                out[n["rows"]] += n["vecs"] @ x
        out += cone.A_free @ st.xf
        return out

    def _ctx(self, st: _State) -> float:
        cone = self.cone
        total = float(cone.c_free @ st.xf)
        for p, X in zip(cone.psd, st.X):
            total += float(np.sum(p["C"] * X))
        for n, x in zip(cone.nn, st.xn):
            total += float(n["c"] @ x)
        return total

    # -- Newton machinery -------------------------------------------------

    def _factorize(self, st: _State):
        """Schur complement data shared by predictor and corrector."""
        cone = self.cone
        m = cone.m
        M = np.zeros((m, m))
        u = np.zeros(m)
        w_cc = 0.0
        psd_ws = []
        for p, X, S in zip(cone.psd, st.X, st.S):
            Sinv = np.linalg.inv(S)
            Sinv = _sym(Sinv)
            rows = p["rows"]
            mats = p["mats"]
            if len(rows):
                T = np.matmul(X, np.matmul(mats, Sinv))
                MB = mats.reshape(len(rows), -1) @ T.reshape(len(rows), -1).T
                M[np.ix_(rows, rows)] += _sym(MB)
            XCS = X @ p["C"] @ Sinv
            if len(rows):
                u[rows] += np.einsum("ijk,kj->i", mats, XCS)
            w_cc += float(np.sum(p["C"] * XCS))
            psd_ws.append({"Sinv": Sinv})
        for n, x, s in zip(cone.nn, st.xn, st.sn):
            d = x / s
            rows = n["rows"]
            if len(rows):
                M[np.ix_(rows, rows)] += (n["vecs"] * d) @ n["vecs"].T
                u[rows] += n["vecs"] @ (d * n["c"])
            w_cc += float(n["c"] @ (d * n["c"]))

        nf = cone.num_free
        K = np.zeros((m + nf, m + nf))
        K[:m, :m] = M
        if nf:
            K[:m, m:] = cone.A_free
            K[m:, :m] = cone.A_free.T

        # rank-deficient constraint sets (e.g. more equalities than block
        # degrees of freedom) make K exactly singular; escalate a diagonal
        # shift until the factorization has no zero pivot
        shift = 0.0
        K_reg = K
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu = sla.lu_factor(K_reg)
            scale = max(1.0, float(np.abs(np.diag(K)).max()))
            for _ in range(4):
                diag = np.abs(np.diag(lu[0]))
                if diag.min() > 1e-14 * max(1.0, diag.max()):
                    break
                shift = max(shift * 100.0, 1e-12 * scale)
                K_reg = K + shift * np.eye(K.shape[0])
                lu = sla.lu_factor(K_reg)
        return {"lu": lu, "K": K_reg, "u": u, "w_cc": w_cc, "psd_ws": psd_ws}

    def _solve_K(self, fact, rhs: np.ndarray) -> np.ndarray:
        sol = sla.lu_solve(fact["lu"], rhs)
        # mixed-precision iterative refinement: the Schur system's condition
        # number grows like 1/mu, and plain float64 refinement hits its
        # rounding floor exactly where the last decade of accuracy is won
        K128 = fact.get("K128")
        if K128 is None:
            K128 = fact["K"].astype(np.longdouble)
            fact["K128"] = K128
        rhs128 = rhs.astype(np.longdouble)
        for _ in range(2):
            resid = np.asarray(rhs128 - K128 @ sol.astype(np.longdouble), dtype=float)
            sol = sol + sla.lu_solve(fact["lu"], resid)
        return sol

    def _direction(self, st: _State, fact, resid, Rc_psd, rc_nn, rc_tau):
        cone = self.cone
        r_p, r_d_psd, r_d_nn, r_d_free, r_g, _, _ = resid
        m = cone.m

        R2 = []
        h1 = np.array(r_p)
        h3 = r_g + rc_tau / st.tau
        for p, X, Rc, rd, ws in zip(cone.psd, st.X, Rc_psd, r_d_psd, fact["psd_ws"]):
            Sinv = ws["Sinv"]
            R2_B = Rc @ Sinv
            R2.append(R2_B)
            core = R2_B - X @ rd @ Sinv
            if len(p["rows"]):
                h1[p["rows"]] -= np.einsum("ijk,kj->i", p["mats"], core)
            h3 += float(np.sum(p["C"] * core))
        rc_over_s = []
        for n, x, s, rc, rd in zip(cone.nn, st.xn, st.sn, rc_nn, r_d_nn):
            d = x / s
            core = rc / s - d * rd
            rc_over_s.append((d, rc / s))
            if len(n["rows"]):
                h1[n["rows"]] -= n["vecs"] @ core
            h3 += float(n["c"] @ core)
        h2 = r_d_free

        u = fact["u"]
        rhs_w = np.concatenate([h1, h2])
        w = self._solve_K(fact, rhs_w)
        wy, wf = w[:m], w[m:]

        # The tau pivot (b - u)^T K^{-1} (b + u) + c'Pc + kappa/tau cancels
        # catastrophically when assembled directly (c'Pc blows up like 1/mu
        # near optimality), so it is evaluated in the split form
        #     kappa/tau + p_b' K^{-1} p_b + (c'Pc - p_u' K^{-1} p_u),
        # whose pieces are individually nonnegative in exact arithmetic and
        # safe to clamp at their rounding floor.
        p_b = np.concatenate([cone.b, np.zeros(cone.num_free)])
        p_u = np.concatenate([u, cone.c_free])
        v_b = self._solve_K(fact, p_b)
        v_u = self._solve_K(fact, p_u)
        vy = v_b[:m] + v_u[:m]
        vf = v_b[m:] + v_u[m:]
        t1 = st.kappa / st.tau
        t2 = max(float(p_b @ v_b), 0.0)
        t3 = max(fact["w_cc"] - float(p_u @ v_u), 0.0)
        denom = t1 + t2 + t3
        numer = h3 - float((cone.b - u) @ wy) + float(cone.c_free @ wf)
        if denom <= 0 or not math.isfinite(denom):
            raise np.linalg.LinAlgError("singular tau pivot")
        d_tau = numer / denom
        d_y = wy + d_tau * vy
        d_xf = wf + d_tau * vf

        d_S = []
        d_X = []
        for p, X, rd, R2_B, ws in zip(cone.psd, st.X, r_d_psd, R2, fact["psd_ws"]):
            dS = np.array(rd)
            if len(p["rows"]):
                dS -= np.einsum("i,ijk->jk", d_y[p["rows"]], p["mats"])
            dS += p["C"] * d_tau
            dS = _sym(dS)
            dX = _sym(R2_B - X @ dS @ ws["Sinv"])
            d_S.append(dS)
            d_X.append(dX)
        d_sn = []
        d_xn = []
        for n, (d, rcs), rd in zip(cone.nn, rc_over_s, r_d_nn):
            ds = np.array(rd)
            if len(n["rows"]):
                ds -= n["vecs"].T @ d_y[n["rows"]]
            ds += n["c"] * d_tau
            d_sn.append(ds)
            d_xn.append(rcs - d * ds)
        d_kappa = (rc_tau - st.kappa * d_tau) / st.tau
        return {
            "X": d_X,
            "S": d_S,
            "xn": d_xn,
            "sn": d_sn,
            "xf": d_xf,
            "y": d_y,
            "tau": d_tau,
            "kappa": d_kappa,
        }

    def _newton_residuals(self, st: _State, d, resid, Rc_psd, rc_nn, rc_tau):
        """Residuals of the six Newton equations for a computed direction.

        All products here are well scaled (no S^{-1}), so these residuals
        expose the error introduced by the ill-conditioned elimination.
        """
        cone = self.cone
        r_p, r_d_psd, r_d_nn, r_d_free, r_g, _, _ = resid
        adx = np.zeros(cone.m)
        for p, dX in zip(cone.psd, d["X"]):
            if len(p["rows"]):
                adx[p["rows"]] += np.einsum("ijk,kj->i", p["mats"], dX)
        for n, dx in zip(cone.nn, d["xn"]):
            if len(n["rows"]):
                adx[n["rows"]] += n["vecs"] @ dx
        adx += cone.A_free @ d["xf"]
        rho1 = r_p - (adx - cone.b * d["tau"])

        rho2_psd = []
        for p, rd, dS in zip(cone.psd, r_d_psd, d["S"]):
            acc = np.zeros((p["size"], p["size"]))
            if len(p["rows"]):
                acc += np.einsum("i,ijk->jk", d["y"][p["rows"]], p["mats"])
            rho2_psd.append(rd - (acc + dS - p["C"] * d["tau"]))
        rho2_nn = []
        for n, rd, ds in zip(cone.nn, r_d_nn, d["sn"]):
            acc = np.zeros(n["size"])
            if len(n["rows"]):
                acc += n["vecs"].T @ d["y"][n["rows"]]
            rho2_nn.append(rd - (acc + ds - n["c"] * d["tau"]))
        rho2_free = r_d_free - (cone.A_free.T @ d["y"] - cone.c_free * d["tau"])

        cdx = float(cone.c_free @ d["xf"])
        for p, dX in zip(cone.psd, d["X"]):
            cdx += float(np.sum(p["C"] * dX))
        for n, dx in zip(cone.nn, d["xn"]):
            cdx += float(n["c"] @ dx)
        rho3 = r_g - (float(cone.b @ d["y"]) - cdx - d["kappa"])

        rho4 = [
            Rc - (dX @ S + X @ dS)
            for Rc, X, S, dX, dS in zip(Rc_psd, st.X, st.S, d["X"], d["S"])
        ]
        rho5 = [
            rc - (dx * s + x * ds)
            for rc, x, s, dx, ds in zip(rc_nn, st.xn, st.sn, d["xn"], d["sn"])
        ]
        rho6 = rc_tau - (d["tau"] * st.kappa + st.tau * d["kappa"])
        return rho1, rho2_psd, rho2_nn, rho2_free, rho3, rho4, rho5, rho6

    def _direction_refined(self, st: _State, fact, resid, Rc_psd, rc_nn, rc_tau):
        """Direction plus one refinement solve against its Newton residuals.

        The HKM elimination loses roughly cond(S) * eps of accuracy; a
        correction pass through the same factorization recovers it and lets
        the iteration certify 1e-8 residuals instead of stalling at ~1e-7.
        """
        d = self._direction(st, fact, resid, Rc_psd, rc_nn, rc_tau)
        r1, r2p, r2n, r2f, r3, r4, r5, r6 = self._newton_residuals(
            st, d, resid, Rc_psd, rc_nn, rc_tau
        )
        corr_resid = (r1, r2p, r2n, r2f, r3, 0.0, 0.0)
        dc = self._direction(st, fact, corr_resid, r4, r5, r6)
        for key in ("X", "S", "xn", "sn"):
            d[key] = [a + b for a, b in zip(d[key], dc[key])]
        d["xf"] = d["xf"] + dc["xf"]
        d["y"] = d["y"] + dc["y"]
        d["tau"] += dc["tau"]
        d["kappa"] += dc["kappa"]
        return d

    def _max_step(self, st: _State, d) -> float:
        alpha = math.inf
        for X, dX in zip(st.X, d["X"]):
            alpha = min(alpha, _min_eig_step(X, dX))
        for S, dS in zip(st.S, d["S"]):
            alpha = min(alpha, _min_eig_step(S, dS))
        for x, dx in zip(st.xn, d["xn"]):
            alpha = min(alpha, _vector_step(x, dx))
        for s, ds in zip(st.sn, d["sn"]):
            alpha = min(alpha, _vector_step(s, ds))
        if d["tau"] < 0:
            alpha = min(alpha, -st.tau / d["tau"])
        if d["kappa"] < 0:
            alpha = min(alpha, -st.kappa / d["kappa"])
        return alpha

    def _apply_step(self, st: _State, d, alpha: float):
        for i in range(len(st.X)):
            st.X[i] = _sym(st.X[i] + alpha * d["X"][i])
            st.S[i] = _sym(st.S[i] + alpha * d["S"][i])
        for i in range(len(st.xn)):
            st.xn[i] = st.xn[i] + alpha * d["xn"][i]
            st.sn[i] = st.sn[i] + alpha * d["sn"][i]
        st.xf = st.xf + alpha * d["xf"]
        st.y = st.y + alpha * d["y"]
        st.tau += alpha * d["tau"]
        st.kappa += alpha * d["kappa"]

    # -- termination -------------------------------------------------------

    def _convergence_metrics(self, st: _State, resid):
        cone = self.cone
        r_p, r_d_psd, r_d_nn, r_d_free, _, ctx, bty = resid
        tau = st.tau
        p_res = np.linalg.norm(cone.row_scale * r_p) / (tau * (1.0 + cone.b_norm))
        d_sq = sum(float(np.sum(r**2)) for r in r_d_psd)
        d_sq += sum(float(np.sum(r**2)) for r in r_d_nn)
        d_sq += float(np.sum(r_d_free**2))
        d_res = math.sqrt(d_sq) / (tau * (1.0 + cone.c_norm))
        y_unscaled = st.y / cone.row_scale
        pobj = ctx / tau
        dobj = float(cone.b_unscaled @ y_unscaled) / tau
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return p_res, d_res, gap, pobj, dobj

    def _certificates(self, st: _State, resid):
        """Check the two Farkas-ray conditions on the current iterate."""
        cone = self.cone
        r_p, r_d_psd, r_d_nn, r_d_free, _, ctx, bty_scaled = resid
        y_unscaled = st.y / cone.row_scale
        bty = float(cone.b_unscaled @ y_unscaled)
        out = {}
        if bty > 0:
            # C*tau - r_d equals sum_i y_i A_i + S in the original data scale
            num_sq = 0.0
            for p, rd in zip(cone.psd, r_d_psd):
                num_sq += float(np.sum((p["C"] * st.tau - rd) ** 2))
            for n, rd in zip(cone.nn, r_d_nn):
                num_sq += float(np.sum((n["c"] * st.tau - rd) ** 2))
            num_sq += float(np.sum((cone.c_free * st.tau - r_d_free) ** 2))
            out["primal"] = math.sqrt(num_sq) / bty
        if ctx < 0:
            ax = cone.row_scale * (cone.b * st.tau - r_p)
            out["dual"] = float(np.linalg.norm(ax)) / (-ctx)
        return out

    # -- main loop ----------------------------------------------------------

    @staticmethod
    def _snapshot(st: _State) -> _State:
        copy = _State.__new__(_State)
        copy.X = [np.array(X) for X in st.X]
        copy.S = [np.array(S) for S in st.S]
        copy.xn = [np.array(x) for x in st.xn]
        copy.sn = [np.array(s) for s in st.sn]
        copy.xf = np.array(st.xf)
        copy.y = np.array(st.y)
        copy.tau = st.tau
        copy.kappa = st.kappa
        return copy

    def run(self) -> SdpSolution:
        st = self.state
        cone = self.cone
        opts = self.opts
        status = SdpStatus.ITERATION_LIMIT
        iterations = 0
        cert_residual = math.nan
        best_state = self._snapshot(st)
        best_merit = math.inf
        best_iteration = 0

        for iterations in range(opts.max_iterations + 1):
            resid = self._residuals(st)
            mu = st.mu(cone)
            self.mu_history.append(mu)
            p_res, d_res, gap, pobj, dobj = self._convergence_metrics(st, resid)

            merit = max(p_res, d_res, gap)
            if math.isfinite(merit) and merit < best_merit:
                best_merit = merit
                best_state = self._snapshot(st)
                best_iteration = iterations

            if p_res <= opts.feas_tol and d_res <= opts.feas_tol and gap <= opts.gap_tol:
                status = SdpStatus.OPTIMAL
                break

            certs = self._certificates(st, resid)
            gate = st.tau < 1e-4 * max(1.0, st.kappa)
            if gate and certs.get("primal", math.inf) <= opts.feas_tol:
                status = SdpStatus.PRIMAL_INFEASIBLE
                cert_residual = certs["primal"]
                break
            if gate and certs.get("dual", math.inf) <= opts.feas_tol:
                status = SdpStatus.DUAL_INFEASIBLE
                cert_residual = certs["dual"]
                break

            if iterations == opts.max_iterations:
                st = best_state
                break
            # float64 has nothing left once the merit stops moving; return
            # the best iterate rather than wandering off the central path
            if iterations - best_iteration >= 25 and not gate:
                st = best_state
                break

            try:
                fact = self._factorize(st)
                # predictor: pure Newton step onto complementarity target 0
                Rc_aff = [-(X @ S) for X, S in zip(st.X, st.S)]
                rc_aff = [-(x * s) for x, s in zip(st.xn, st.sn)]
                aff = self._direction_refined(
                    st, fact, resid, Rc_aff, rc_aff, -(st.tau * st.kappa)
                )
                alpha_aff = min(1.0, self._max_step(st, aff))
                mu_aff = self._mu_after(st, aff, alpha_aff)
                sigma = min(max((mu_aff / mu) ** 3, 1e-8), 1.0 - 1e-8)

                Rc = [
                    sigma * mu * np.eye(p["size"]) - X @ S - dX @ dS
                    for p, X, S, dX, dS in zip(
                        cone.psd, st.X, st.S, aff["X"], aff["S"]
                    )
                ]
                rc = [
                    sigma * mu - x * s - dx * ds
                    for x, s, dx, ds in zip(st.xn, st.sn, aff["xn"], aff["sn"])
                ]
                rc_t = sigma * mu - st.tau * st.kappa - aff["tau"] * aff["kappa"]
                step = self._direction_refined(st, fact, resid, Rc, rc, rc_t)
            except (np.linalg.LinAlgError, ValueError):
                status = SdpStatus.NUMERICAL_TROUBLE
                st = best_state
                break

            alpha = opts.step_fraction * self._max_step(st, step)
            alpha = min(alpha, 1.0)
            if not math.isfinite(alpha) or alpha <= 0:
                status = SdpStatus.NUMERICAL_TROUBLE
                st = best_state
                break
            self._apply_step(st, step, alpha)
            if not math.isfinite(st.mu(cone)):
                status = SdpStatus.NUMERICAL_TROUBLE
                st = best_state
                break

        return self._package(st, status, iterations, cert_residual)

    def _mu_after(self, st: _State, d, alpha: float) -> float:
        total = (st.tau + alpha * d["tau"]) * (st.kappa + alpha * d["kappa"])
        for X, S, dX, dS in zip(st.X, st.S, d["X"], d["S"]):
            total += float(np.sum((X + alpha * dX) * (S + alpha * dS)))
        for x, s, dx, ds in zip(st.xn, st.sn, d["xn"], d["sn"]):
            total += float((x + alpha * dx) @ (s + alpha * ds))
        return total / (self.cone.nu + 1)

    # -- assembling the public solution --------------------------------------

    def _collect_blocks(self, st: _State, scale: float, dual: bool) -> List[np.ndarray]:
        cone = self.cone
        out: List[Optional[np.ndarray]] = [None] * len(self.problem.blocks)
        for p, X, S in zip(cone.psd, st.X, st.S):
            out[p["index"]] = (S if dual else X) / scale
        for n, x, s in zip(cone.nn, st.xn, st.sn):
            out[n["index"]] = (s if dual else x) / scale
        offset = 0
        for bi, size in zip(cone.free_blocks, cone.free_sizes):
            out[bi] = (
                np.zeros(size) if dual else st.xf[offset : offset + size] / scale
            )
            offset += size
        return out  # type: ignore[return-value]

    def _package(
        self, st: _State, status: SdpStatus, iterations: int, cert_residual: float
    ) -> SdpSolution:
        cone = self.cone
        resid = self._residuals(st)
        p_res, d_res, gap, pobj, dobj = self._convergence_metrics(st, resid)
        y_unscaled = st.y / cone.row_scale

        if status is SdpStatus.PRIMAL_INFEASIBLE:
            # normalize so the ray objective b^T y equals one
            bty = float(cone.b_unscaled @ y_unscaled)
            ray_y = y_unscaled / bty
            ray_s = self._collect_blocks(st, bty, dual=True)
            return SdpSolution(
                status=status,
                primal=None,
                y=ray_y,
                s=ray_s,
                primal_objective=math.nan,
                dual_objective=math.nan,
                gap=math.nan,
                primal_residual=p_res,
                dual_residual=d_res,
                iterations=iterations,
                mu_history=self.mu_history,
                certificate_residual=cert_residual,
            )
        if status is SdpStatus.DUAL_INFEASIBLE:
            ctx = self._ctx(st)
            ray_x = self._collect_blocks(st, -ctx, dual=False)
            return SdpSolution(
                status=status,
                primal=ray_x,
                y=None,
                s=None,
                primal_objective=math.nan,
                dual_objective=math.nan,
                gap=math.nan,
                primal_residual=p_res,
                dual_residual=d_res,
                iterations=iterations,
                mu_history=self.mu_history,
                certificate_residual=cert_residual,
            )

        tau = st.tau if st.tau > 0 else 1.0
        primal = self._collect_blocks(st, tau, dual=False)
        s_blocks = self._collect_blocks(st, tau, dual=True)
        return SdpSolution(
            status=status,
            primal=primal,
            y=y_unscaled / tau,
            s=s_blocks,
            primal_objective=pobj,
            dual_objective=dobj,
            gap=gap,
            primal_residual=p_res,
            dual_residual=d_res,
            iterations=iterations,
            mu_history=self.mu_history,
            certificate_residual=cert_residual,
        )


def solve(problem: SdpProblem, options: Optional[SolverOptions] = None) -> SdpSolution:
    """Solve the block SDP; deterministic for identical inputs and options."""
    return _HsdSolver(problem, options or SolverOptions()).run()
