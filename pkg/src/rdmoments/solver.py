"""Built-in first-order conic backend: over-relaxed ADMM consensus splitting.

Canonical problem: over variables z,

    minimize   (1/2) z' diag(P) z + q' z
    subject to A z = b
               M_k(z) := C_k + mat(G_k z)  is PSD, for every block k

with each block entry a sparse linear form in z (entries stored for the
upper triangle only).  The z update is an equality-constrained quadratic
program solved exactly through a sparse KKT factorization (refactorized only
when the penalty parameter changes); the splitting variables are projected
onto the PSD cone by eigenvalue clipping.  Diagonal blocks (used by the SDPA
import path) project by clipping entries at zero.

Deterministic: no randomness; identical inputs and options give identical
iterates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["PSDBlock", "ConicData", "SolverOptions", "SolverResult", "solve_conic"]


@dataclass
class PSDBlock:
    """One PSD cone block; rows/cols index the stored upper-triangle entries."""

    label: str
    size: int
    rows: np.ndarray
    cols: np.ndarray
    G: sp.csr_matrix  # (n_entries, n_vars): entry values = G @ z + const
    const: np.ndarray
    diag: bool = False

    def entry_weights(self) -> np.ndarray:
        # Frobenius weight: off-diagonal entries appear twice in the matrix
        return np.where(self.rows == self.cols, 1.0, 2.0)

    def materialize(self, vals: np.ndarray) -> np.ndarray:
        M = np.zeros((self.size, self.size))
        M[self.rows, self.cols] = vals
        M[self.cols, self.rows] = vals
        return M

    def extract(self, M: np.ndarray) -> np.ndarray:
        return M[self.rows, self.cols]


@dataclass
class ConicData:
    n: int
    P_diag: np.ndarray
    q: np.ndarray
    A: sp.csr_matrix | None
    b: np.ndarray | None
    blocks: list[PSDBlock]


@dataclass
class SolverOptions:
    rho: float = 1.0
    alpha: float = 1.6  # over-relaxation
    max_iter: int = 50000
    eps_abs: float = 1e-7
    eps_rel: float = 1e-7
    rho_interval: int = 500  # adaptation cadence (0 disables)
    rho_bounds: tuple[float, float] = (1e-4, 1e4)
    check_every: int = 25
    kkt_reg: float = 0.0  # dual regularization for near-rank-deficient equalities
    verbose: bool = False


@dataclass
class SolverResult:
    z: np.ndarray
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    eq_violation: float
    min_eigenvalue: float
    objective: float
    wall_time: float
    rho_final: float
    history: list[tuple[int, float, float]] = field(default_factory=list)
    splitting: tuple[list[np.ndarray], list[np.ndarray]] | None = None


def _project_psd(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    if w[0] >= 0.0:
        return M
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T


class _KKT:
    """Factorized z-update system for a given rho."""

    def __init__(self, data: ConicData, rho: float, reg: float = 0.0):
        n = data.n
        H = sp.diags(data.P_diag, format="csc")
        for blk in data.blocks:
            W = sp.diags(blk.entry_weights())
            H = H + rho * (blk.G.T @ W @ blk.G)
        self.m = 0 if data.A is None else data.A.shape[0]
        self.reg = reg
        while True:
            if self.m:
                lower = -sp.identity(self.m, format="csc") * self.reg if self.reg else None
                K = sp.bmat([[H, data.A.T], [data.A, lower]], format="csc")
            else:
                K = H.tocsc()
            try:
                self.lu = spla.splu(K)
                break
            except RuntimeError:
                # singular KKT (rank-deficient equalities): escalate regularization
                self.reg = max(self.reg * 10.0, 1e-10)
                if self.reg > 1e-6:
                    raise
        self.n = n

    def solve(self, rhs_z: np.ndarray, b: np.ndarray | None) -> np.ndarray:
        if self.m:
            rhs = np.concatenate([rhs_z, b])
            return self.lu.solve(rhs)[: self.n]
        return self.lu.solve(rhs_z)


def solve_conic(
    data: ConicData,
    opts: SolverOptions | None = None,
    warm: tuple[list[np.ndarray], list[np.ndarray]] | None = None,
) -> SolverResult:
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    n = data.n
    rho = opts.rho
    kkt = _KKT(data, rho, opts.kkt_reg)

    blocks = data.blocks
    weights = [blk.entry_weights() for blk in blocks]
    if warm is not None:
        S = [s.copy() for s in warm[0]]
        U = [u.copy() for u in warm[1]]
    else:
        S = [np.zeros((blk.size, blk.size)) for blk in blocks]
        U = [np.zeros((blk.size, blk.size)) for blk in blocks]
    z = np.zeros(n)
    status = "max_iterations"
    it_done = opts.max_iter
    r_pri = r_dual = np.inf
    history: list[tuple[int, float, float]] = []

    n_entries = sum(int(np.sum(w)) for w in weights)  # Frobenius-weighted count
    sqrt_entries = np.sqrt(max(n_entries, 1))

    for it in range(1, opts.max_iter + 1):
        # z-update (exact equality-constrained QP)
        rhs = -data.q.copy()
        for blk, w, Sk, Uk in zip(blocks, weights, S, U):
            target = blk.extract(Sk - Uk) - blk.const
            rhs += rho * (blk.G.T @ (w * target))
        z = kkt.solve(rhs, data.b)

        if it == 1 and data.A is not None:
            eqv = np.abs(data.A @ z - data.b).max() if data.A.shape[0] else 0.0
            if not np.isfinite(eqv) or eqv > 1e-6 * (1.0 + np.abs(data.b).max()):
                status = "infeasible"
                it_done = it
                break

        # S/U updates with over-relaxation
        pri_sq = 0.0
        dual_vec_sq = 0.0
        v_norm_sq = 0.0
        s_norm_sq = 0.0
        for i, blk in enumerate(blocks):
            vals = blk.G @ z + blk.const
            V = blk.materialize(vals)
            X = opts.alpha * V + (1.0 - opts.alpha) * S[i]
            Y = X + U[i]
            S_old = S[i]
            if blk.diag:
                S_new = np.diag(np.clip(np.diag(Y), 0.0, None))
            else:
                S_new = _project_psd(Y)
            U[i] = Y - S_new
            S[i] = S_new
            pri_sq += float(np.sum((V - S_new) ** 2))
            dS = blk.extract(S_new - S_old)
            dual_vec_sq += float(np.sum((blk.G.T @ (weights[i] * dS)) ** 2))
            v_norm_sq += float(np.sum(V**2))
            s_norm_sq += float(np.sum(S_new**2))

        r_pri = np.sqrt(pri_sq)
        r_dual = rho * np.sqrt(dual_vec_sq)

        if it % opts.check_every == 0 or it == opts.max_iter:
            scale_pri = max(np.sqrt(v_norm_sq), np.sqrt(s_norm_sq), 1.0)
            u_sq = sum(
                float(np.sum((blk.G.T @ (w * blk.extract(Uk))) ** 2))
                for blk, w, Uk in zip(blocks, weights, U)
            )
            scale_dual = max(rho * np.sqrt(u_sq), 1.0)
            eps_pri = opts.eps_abs * sqrt_entries + opts.eps_rel * scale_pri
            eps_dual = opts.eps_abs * np.sqrt(n) + opts.eps_rel * scale_dual
            if opts.verbose and it % (opts.check_every * 40) == 0:
                print(f"  it {it}: r_pri={r_pri:.3e} r_dual={r_dual:.3e} rho={rho:g}")
            history.append((it, r_pri, r_dual))
            if r_pri <= eps_pri and r_dual <= eps_dual:
                status = "solved"
                it_done = it
                break

        if opts.rho_interval and it % opts.rho_interval == 0:
            lo, hi = opts.rho_bounds
            if r_pri > 10.0 * r_dual and rho * 2.0 <= hi:
                rho *= 2.0
                U = [Uk / 2.0 for Uk in U]
                kkt = _KKT(data, rho, opts.kkt_reg)
            elif r_dual > 10.0 * r_pri and rho / 2.0 >= lo:
                rho /= 2.0
                U = [Uk * 2.0 for Uk in U]
                kkt = _KKT(data, rho, opts.kkt_reg)
    else:
        it_done = opts.max_iter

    eqv = 0.0
    if data.A is not None and data.A.shape[0]:
        eqv = float(np.abs(data.A @ z - data.b).max())
    min_eig = np.inf
    for blk in blocks:
        M = blk.materialize(blk.G @ z + blk.const)
        if blk.diag:
            min_eig = min(min_eig, float(np.min(np.diag(M))))
        else:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(M)[0]))
    obj = float(0.5 * z @ (data.P_diag * z) + data.q @ z)
    return SolverResult(
        z=z,
        status=status,
        iterations=it_done,
        primal_residual=float(r_pri),
        dual_residual=float(r_dual),
        eq_violation=eqv,
        min_eigenvalue=float(min_eig) if blocks else 0.0,
        objective=obj,
        wall_time=time.perf_counter() - t0,
        rho_final=rho,
        history=history,
        splitting=(S, U),
    )
