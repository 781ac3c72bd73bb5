"""Semidefinite relaxation of the truncated moment system.

Variable blocks: occupation pseudo-moments (degree <= 2s, harmonic <= h,
with s = ceil((r+1)/2)), terminal pseudo-moments (same caps, no time), and
one slack per transport constraint.  Equalities: every assembled constraint
(with its slack), the terminal mass, and pure-time marginal stabilizers
m_{(j,0)} = 1/(j+1).  PSD blocks: occupation moment matrix at order s plus
localizing matrices for t(1-t) and R^2 - |x|^2 at order s-1, and the same
pair (minus the time factor) for the terminal measure.  Objective: minimize
the squared slack norm; a second polish phase re-minimizes the pseudo-moment
norm over the residual-optimal face, which selects a unique solution.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .liouville import (
    DiracAtFunction,
    Ensemble,
    GaussianProduct,
    InitialMeasureSpec,
    LiouvilleConstraint,
    assemble_system,
    initial_moments,
    residual,
)
from .moments import (
    MatrixTemplate,
    MomentSequence,
    MultiIndex,
    Polynomial,
    ZERO_INDEX,
    coord_mode,
    enumerate_monomials,
    evaluate_template,
    localizing_matrix,
    moment_matrix,
    n_coords,
)
from .solver import ConicData, PSDBlock, SolverOptions, solve_conic
from .spectral import drift_polynomials

__all__ = [
    "RelaxationOptions",
    "ConicProblem",
    "SolveReport",
    "MatchStats",
    "default_radius",
    "build_relaxation",
    "solve",
    "compare_moments",
]


@dataclass
class RelaxationOptions:
    slack_weight: float = 1.0  # lambda on sum e^2
    ridge: float = 0.0  # optional literal ridge on pseudo-moments
    polish: bool = True  # min-norm selection on the optimal face
    stabilizers: bool = True
    backend: str = "admm"
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class SolveReport:
    status: str
    objective: float  # sum of squared slacks
    objective_total: float
    max_abs_residual: float
    eq_violation: float
    min_psd_eigenvalue: float
    n_occ: int
    n_term: int
    n_slack: int
    n_equalities: int
    psd_block_sizes: list[int]
    moment_matrix_size: int
    iterations: int
    wall_time: float
    backend: str
    tolerances: dict
    r: int = 0
    h: int = 0
    K: int = 0

    def to_json_obj(self) -> dict:
        return dict(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=1, sort_keys=True)


class ConicProblem:
    """Assembled relaxation: variables, equalities, PSD templates, objective."""

    def __init__(
        self,
        r: int,
        h: int,
        K: int,
        eps: float,
        radius: float,
        measure: InitialMeasureSpec,
        constraints: list[LiouvilleConstraint],
        initial: MomentSequence,
        opts: RelaxationOptions,
    ):
        self.r, self.h, self.K, self.eps = r, h, K, eps
        self.radius = radius
        self.measure = measure
        self.opts = opts
        self.s = math.ceil((r + 1) / 2)
        self.caps_degree = 2 * self.s
        self.constraints = constraints
        self.initial = initial

        self.occ_indices = enumerate_monomials(K, self.caps_degree, h, include_time=True)
        self.term_indices = enumerate_monomials(K, self.caps_degree, h, include_time=False)
        self.occ_pos = {a: i for i, a in enumerate(self.occ_indices)}
        self.term_pos = {a: i for i, a in enumerate(self.term_indices)}
        self.n_occ = len(self.occ_indices)
        self.n_term = len(self.term_indices)
        self.n_slack = len(constraints)
        self.n = self.n_occ + self.n_term + self.n_slack

        self.templates = self._build_templates()
        self.A, self.b, self.row_kinds = self._build_equalities()
        self.blocks = [self._compile_block(lbl, T, which) for lbl, T, which in self.templates]

    # ---- structure -------------------------------------------------------

    def _ball_polynomial(self) -> Polynomial:
        g = Polynomial({ZERO_INDEX: self.radius**2})
        for j in range(n_coords(self.K)):
            if coord_mode(j) <= self.h:
                g.add_term(MultiIndex.from_dict(0, {j: 2}), -1.0)
        return g

    def _build_templates(self) -> list[tuple[str, MatrixTemplate, str]]:
        K, s, h = self.K, self.s, self.h
        g_time = Polynomial({MultiIndex(1): 1.0, MultiIndex(2): -1.0})
        g_ball = self._ball_polynomial()
        return [
            ("occ_moment", moment_matrix(K, s, h, include_time=True), "occ"),
            ("occ_loc_time", localizing_matrix(g_time, K, s - 1, h, include_time=True, label="t(1-t)"), "occ"),
            ("occ_loc_ball", localizing_matrix(g_ball, K, s - 1, h, include_time=True, label="ball"), "occ"),
            ("term_moment", moment_matrix(K, s, h, include_time=False), "term"),
            ("term_loc_ball", localizing_matrix(g_ball, K, s - 1, h, include_time=False, label="ball"), "term"),
        ]

    def var_pos(self, which: str, a: MultiIndex) -> int:
        if which == "occ":
            return self.occ_pos[a]
        return self.n_occ + self.term_pos[a]

    def slack_pos(self, slack_id: int) -> int:
        return self.n_occ + self.n_term + slack_id

    def var_names(self) -> list[str]:
        names = [f"occ:{a}" for a in self.occ_indices]
        names += [f"term:{a}" for a in self.term_indices]
        names += [f"slack:{c.test_index}" for c in self.constraints]
        return names

    def _build_equalities(self):
        rows, cols, vals, b, kinds = [], [], [], [], []
        rix = 0
        for c in self.constraints:
            for a, coef in sorted(c.occ_coeffs.items(), key=lambda kv: kv[0].sort_key()):
                rows.append(rix)
                cols.append(self.var_pos("occ", a))
                vals.append(-coef)
            rows.append(rix)
            cols.append(self.var_pos("term", c.terminal_index))
            vals.append(c.terminal_coeff)
            rows.append(rix)
            cols.append(self.slack_pos(c.slack_id))
            vals.append(-1.0)
            b.append(c.rhs)
            kinds.append(f"liouville:{c.test_index}")
            rix += 1
        if self.opts.stabilizers:
            for j in range(self.caps_degree + 1):
                rows.append(rix)
                cols.append(self.var_pos("occ", MultiIndex(j)))
                vals.append(1.0)
                b.append(1.0 / (j + 1))
                kinds.append(f"time_marginal:{j}")
                rix += 1
            rows.append(rix)
            cols.append(self.var_pos("term", ZERO_INDEX))
            vals.append(1.0)
            b.append(1.0)
            kinds.append("terminal_mass")
            rix += 1
        A = sp.csr_matrix(
            (np.array(vals), (np.array(rows), np.array(cols))), shape=(rix, self.n)
        )
        return A, np.array(b), kinds

    def _compile_block(self, label: str, T: MatrixTemplate, which: str) -> PSDBlock:
        er, ec, gr, gc, gv = [], [], [], [], []
        for eix, ((i, j), terms) in enumerate(
            sorted(T.entries.items(), key=lambda kv: kv[0])
        ):
            er.append(i)
            ec.append(j)
            for a, coef in terms:
                gr.append(eix)
                gc.append(self.var_pos(which, a))
                gv.append(coef)
        n_entries = len(er)
        G = sp.csr_matrix(
            (np.array(gv), (np.array(gr), np.array(gc))), shape=(n_entries, self.n)
        )
        return PSDBlock(label, T.size, np.array(er), np.array(ec), G, np.zeros(n_entries))

    # ---- objective and solver form --------------------------------------

    def objective_diag(self, slack_weight=None, ridge=None) -> np.ndarray:
        sw = self.opts.slack_weight if slack_weight is None else slack_weight
        rg = self.opts.ridge if ridge is None else ridge
        P = np.zeros(self.n)
        P[: self.n_occ + self.n_term] = 2.0 * rg
        P[self.n_occ + self.n_term :] = 2.0 * sw
        return P

    def to_conic_data(self) -> ConicData:
        return ConicData(
            n=self.n,
            P_diag=self.objective_diag(),
            q=np.zeros(self.n),
            A=self.A,
            b=self.b,
            blocks=self.blocks,
        )

    def polish_data(self, z: np.ndarray) -> ConicData:
        """Phase-2 problem: freeze slacks at their optimum, minimize the
        pseudo-moment norm over the remaining face."""
        nm = self.n_occ + self.n_term
        e_star = z[nm:].copy()
        # pure-time residuals are structurally zero once the time-marginal
        # stabilizers hold; zeroing them keeps the frozen system consistent
        if self.opts.stabilizers:
            for c in self.constraints:
                if not c.test_index.spatial:
                    e_star[c.slack_id] = 0.0
        A_m = self.A[:, :nm]
        A_e = self.A[:, nm:]
        b2 = self.b - A_e @ e_star
        blocks = []
        for blk in self.blocks:
            blocks.append(
                PSDBlock(blk.label, blk.size, blk.rows, blk.cols, blk.G[:, :nm], blk.const, blk.diag)
            )
        return ConicData(
            n=nm,
            P_diag=np.full(nm, 2.0),
            q=np.zeros(nm),
            A=A_m.tocsr(),
            b=b2,
            blocks=blocks,
        )

    # ---- recovery --------------------------------------------------------

    def sequences_from(self, z: np.ndarray) -> tuple[MomentSequence, MomentSequence]:
        occ = MomentSequence(self.caps_degree, self.h, self.K)
        for a, i in self.occ_pos.items():
            occ.set(a, z[i])
        term = MomentSequence(self.caps_degree, self.h, self.K)
        for a, i in self.term_pos.items():
            term.set(a, z[self.n_occ + i])
        return occ, term

    def slacks_from(self, z: np.ndarray) -> np.ndarray:
        return z[self.n_occ + self.n_term :]

    def evaluate_min_eig(self, z: np.ndarray) -> float:
        out = np.inf
        for blk in self.blocks:
            M = blk.materialize(blk.G @ z + blk.const)
            out = min(out, float(np.linalg.eigvalsh(M)[0]))
        return out

    def manifest(self) -> dict:
        return {
            "r": self.r,
            "h": self.h,
            "K": self.K,
            "eps": self.eps,
            "radius": self.radius,
            "s": self.s,
            "n_occ": self.n_occ,
            "n_term": self.n_term,
            "n_slack": self.n_slack,
            "n_equalities": int(self.A.shape[0]),
            "psd_blocks": {lbl: T.size for lbl, T, _ in self.templates},
        }


def default_radius(measure: InitialMeasureSpec, K: int) -> float:
    """Ball radius for the support set: covers the initial mass with margin."""
    if isinstance(measure, GaussianProduct):
        s2, mu = measure.params(K)
        return float(np.sqrt(1.0 + np.sum(9.0 * s2 + mu**2)))
    if isinstance(measure, DiracAtFunction):
        x0 = measure.coords(K)
        return float(np.sqrt(2.0 * np.dot(x0, x0) + 1.0))
    if isinstance(measure, Ensemble):
        worst = max(
            float(np.dot(x0, x0))
            for x0 in (DiracAtFunction(m).coords(K) for m in measure.members)
        )
        return float(np.sqrt(2.0 * worst + 1.0))
    raise TypeError(f"unknown measure spec {type(measure)!r}")


def build_relaxation(
    r: int,
    h: int,
    K: int,
    eps: float,
    measure: InitialMeasureSpec,
    radius: float | None = None,
    opts: RelaxationOptions | None = None,
) -> ConicProblem:
    if r < 2:
        raise ValueError("relaxation order must be >= 2")
    if h > K:
        raise ValueError("harmonic cap cannot exceed the spectral cutoff")
    opts = opts or RelaxationOptions()
    R = default_radius(measure, K) if radius is None else float(radius)
    if R <= 0:
        raise ValueError("ball radius must be positive")
    dp = drift_polynomials(K, eps)
    ini = initial_moments(measure, enumerate_monomials(K, r, h), K)
    constraints = assemble_system(r, h, K, dp, initial=ini)
    return ConicProblem(r, h, K, eps, R, measure, constraints, ini, opts)


def solve(
    problem: ConicProblem, backend: str | None = None, solver_opts: SolverOptions | None = None
) -> tuple[MomentSequence, MomentSequence, SolveReport]:
    """Solve the relaxation; returns occupation/terminal pseudo-moments and a
    report.  Non-convergence is surfaced in the report status (and in the
    'iteration_limit' naming), never clamped."""
    backend = backend or problem.opts.backend
    if backend != "admm":
        raise ValueError(f"unknown backend {backend!r} (built-in: 'admm')")
    sopts = solver_opts or problem.opts.solver
    t0 = time.perf_counter()
    res = solve_conic(problem.to_conic_data(), sopts)
    z = res.z
    status = res.status
    iters = res.iterations
    if status == "solved" and problem.opts.polish:
        # min-norm selection over the residual-optimal face; an escalating
        # penalty schedule handles the degenerate (rank-deficient) faces of
        # concentrated measures, where a fixed penalty converges sublinearly
        pd = problem.polish_data(z)
        warm = res.splitting
        rho = res.rho_final
        seg_iter = max(2000, sopts.max_iter // 8)
        pol = None
        for _ in range(6):
            popts = SolverOptions(
                **{
                    **sopts.__dict__,
                    "rho": rho,
                    "max_iter": seg_iter,
                    "eps_abs": 0.01 * sopts.eps_abs,
                    "eps_rel": 0.01 * sopts.eps_rel,
                    "rho_interval": 0,
                    "kkt_reg": max(sopts.kkt_reg, 1e-12),
                }
            )
            pol = solve_conic(pd, popts, warm=warm)
            iters += pol.iterations
            if pol.status == "solved":
                break
            # deliberately keep the scaled duals when raising the penalty:
            # the inflated dual pressure drives the degenerate faces tight
            rho *= 4.0
            warm = pol.splitting
        z = np.concatenate([pol.z, problem.slacks_from(z)])
    if status == "max_iterations":
        status = "iteration_limit"

    occ, term = problem.sequences_from(z)
    slacks = problem.slacks_from(z)
    max_res = max(
        (abs(residual(c, occ, term)) for c in problem.constraints), default=0.0
    )
    report = SolveReport(
        status=status,
        objective=float(np.sum(slacks**2)),
        objective_total=float(
            problem.opts.slack_weight * np.sum(slacks**2)
            + problem.opts.ridge * float(np.sum(z[: problem.n_occ + problem.n_term] ** 2))
        ),
        max_abs_residual=float(max_res),
        eq_violation=float(np.abs(problem.A @ z - problem.b).max()),
        min_psd_eigenvalue=problem.evaluate_min_eig(z),
        n_occ=problem.n_occ,
        n_term=problem.n_term,
        n_slack=problem.n_slack,
        n_equalities=int(problem.A.shape[0]),
        psd_block_sizes=[blk.size for blk in problem.blocks],
        moment_matrix_size=problem.blocks[0].size,
        iterations=iters,
        wall_time=time.perf_counter() - t0,
        backend=backend,
        tolerances={"eps_abs": sopts.eps_abs, "eps_rel": sopts.eps_rel, "max_iter": sopts.max_iter},
        r=problem.r,
        h=problem.h,
        K=problem.K,
    )
    return occ, term, report


@dataclass
class MatchStats:
    fraction: float
    n_shared: int
    n_matched: int
    rel_tol: float
    floor: float
    worst: list[tuple[str, float, float, float]]  # (index, computed, reference, error)

    def to_json_obj(self) -> dict:
        return {
            "fraction": self.fraction,
            "n_shared": self.n_shared,
            "n_matched": self.n_matched,
            "rel_tol": self.rel_tol,
            "floor": self.floor,
            "worst": [list(w) for w in self.worst],
        }


def compare_moments(
    computed: MomentSequence,
    reference: MomentSequence,
    rel_tol: float,
    floor: float = 1e-9,
    n_worst: int = 10,
) -> MatchStats:
    """Fraction of shared indices with |computed - reference| within
    max(rel_tol * |reference|, floor); floor is the absolute guard for
    entries whose reference is numerically zero."""
    shared = [a for a in computed.indices() if a in reference]
    if not shared:
        raise ValueError("no shared indices to compare")
    rows = []
    matched = 0
    for a in shared:
        c, rv = computed.get(a), reference.get(a)
        err = abs(c - rv)
        tol = max(rel_tol * abs(rv), floor)
        ok = err <= tol
        matched += ok
        rows.append((err / tol, str(a), c, rv, err))
    rows.sort(reverse=True)
    worst = [(a, c, rv, err) for _, a, c, rv, err in rows[:n_worst]]
    return MatchStats(
        fraction=matched / len(shared),
        n_shared=len(shared),
        n_matched=matched,
        rel_tol=rel_tol,
        floor=floor,
        worst=worst,
    )
