"""Sparse SDPA (.dat-s) export of the assembled relaxation, plus a parser.

SDPA solves  min c'x  s.t.  sum_i x_i F_i - F_0 >= 0 (blockwise PSD),
negative block sizes denoting diagonal blocks.  The export maps the
relaxation variables to x = (pseudo-moments, slacks, tau):

* one PSD block per matrix template (F_0 = 0 there);
* the quadratic objective is reformulated exactly through the epigraph
  variable tau and one arrow block [[tau, w'], [w, I]] with
  w_i = sqrt(P_ii / 2) z_i, so tau >= sum w_i^2;
* equality rows appear twice in one diagonal block (A z - b >= 0 and
  b - A z >= 0).

Values are written with %.17g (exact float64 round trip); entries are sorted
by (matrix, block, i, j), so export -> parse -> export is byte identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .relaxation import ConicProblem
from .solver import ConicData, PSDBlock

__all__ = ["SDPAProblem", "export_sdpa", "parse_sdpa", "write_sdpa", "sdpa_to_conic"]


@dataclass
class SDPAProblem:
    n_vars: int
    block_sizes: list[int]  # negative = diagonal block
    c: np.ndarray
    # (matno, block, i, j) -> value; matno 0 is F_0; i <= j; 1-based blocks/indices
    entries: dict[tuple[int, int, int, int], float]
    comments: list[str] = field(default_factory=list)

    def format(self) -> str:
        lines = [f"*{c}" for c in self.comments]
        lines.append(f"{self.n_vars} = mDIM")
        lines.append(f"{len(self.block_sizes)} = nBLOCK")
        lines.append(" ".join(str(s) for s in self.block_sizes) + " = bLOCKsTRUCT")
        lines.append(" ".join(_fmt(v) for v in self.c))
        for (mat, blk, i, j), v in sorted(self.entries.items()):
            lines.append(f"{mat} {blk} {i} {j} {_fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def export_sdpa(problem: ConicProblem, path: str) -> SDPAProblem:
    """Write the relaxation to a sparse SDPA file; returns the structure."""
    sdpa = conic_problem_to_sdpa(problem)
    write_sdpa(sdpa, path)
    return sdpa


def write_sdpa(sdpa: SDPAProblem, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(sdpa.format())


def conic_problem_to_sdpa(problem: ConicProblem) -> SDPAProblem:
    P = problem.objective_diag()
    w_scale = np.sqrt(P / 2.0)
    quad_vars = np.nonzero(w_scale)[0]
    n_vars = problem.n + 1  # + tau
    tau = problem.n  # 0-based position

    entries: dict[tuple[int, int, int, int], float] = {}
    block_sizes: list[int] = []

    # template blocks
    for bix, blk in enumerate(problem.blocks, start=1):
        block_sizes.append(blk.size)
        Gc = blk.G.tocoo()
        for eix, var, val in zip(Gc.row, Gc.col, Gc.data):
            i, j = int(blk.rows[eix]) + 1, int(blk.cols[eix]) + 1
            key = (int(var) + 1, bix, min(i, j), max(i, j))
            entries[key] = entries.get(key, 0.0) + float(val)

    # arrow block for the quadratic objective
    arrow_blk = len(block_sizes) + 1
    m_arrow = quad_vars.size + 1
    block_sizes.append(m_arrow)
    entries[(tau + 1, arrow_blk, 1, 1)] = 1.0
    for pos, var in enumerate(quad_vars, start=2):
        entries[(int(var) + 1, arrow_blk, 1, pos)] = float(w_scale[var])
        entries[(0, arrow_blk, pos, pos)] = -1.0  # F_0 = -I -> adds +I

    # equality rows as paired diagonal entries
    m_eq = problem.A.shape[0]
    if m_eq:
        eq_blk = len(block_sizes) + 1
        block_sizes.append(-2 * m_eq)
        Ac = problem.A.tocoo()
        for r, v, a in zip(Ac.row, Ac.col, Ac.data):
            r, v = int(r), int(v)
            entries[(v + 1, eq_blk, r + 1, r + 1)] = float(a)
            entries[(v + 1, eq_blk, m_eq + r + 1, m_eq + r + 1)] = -float(a)
        for r, bv in enumerate(problem.b):
            if bv != 0.0:
                entries[(0, eq_blk, r + 1, r + 1)] = float(bv)
                entries[(0, eq_blk, m_eq + r + 1, m_eq + r + 1)] = -float(bv)

    # the objective weights are inside w, so min tau = min (1/2) z' P z
    c = np.zeros(n_vars)
    c[tau] = 1.0

    comments = [" rdmoments relaxation export", " variable ordering manifest:"]
    for i, name in enumerate(problem.var_names(), start=1):
        comments.append(f" var {i} = {name}")
    comments.append(f" var {n_vars} = tau (objective epigraph)")
    return SDPAProblem(n_vars, block_sizes, c, entries, comments)


def parse_sdpa(path: str) -> SDPAProblem:
    comments: list[str] = []
    body: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("*") or line.startswith('"'):
                comments.append(line[1:])
            elif line.strip():
                body.append(line)
    n_vars = int(body[0].split("=")[0].strip().split()[0])
    n_block = int(body[1].split("=")[0].strip().split()[0])
    sizes_txt = body[2].split("=")[0]
    for ch in "(){},":
        sizes_txt = sizes_txt.replace(ch, " ")
    block_sizes = [int(t) for t in sizes_txt.split()]
    if len(block_sizes) != n_block:
        raise ValueError("block structure line does not match nBLOCK")
    c_txt = body[3]
    for ch in "(){},":
        c_txt = c_txt.replace(ch, " ")
    c = np.array([float(t) for t in c_txt.split()])
    if c.size != n_vars:
        raise ValueError("objective vector length does not match mDIM")
    entries: dict[tuple[int, int, int, int], float] = {}
    for line in body[4:]:
        mat, blk, i, j, val = line.split()
        i, j = int(i), int(j)
        entries[(int(mat), int(blk), min(i, j), max(i, j))] = float(val)
    return SDPAProblem(n_vars, block_sizes, c, entries, comments)


def sdpa_to_conic(sdpa: SDPAProblem) -> ConicData:
    """Generic conic form of a parsed SDPA problem for the built-in solver."""
    n = sdpa.n_vars
    by_block: dict[int, dict[tuple[int, int], dict[int, float]]] = {}
    for (mat, blk, i, j), v in sdpa.entries.items():
        by_block.setdefault(blk, {}).setdefault((i - 1, j - 1), {})[mat] = v
    blocks = []
    for bix, size in enumerate(sdpa.block_sizes, start=1):
        diag = size < 0
        d = abs(size)
        ent = by_block.get(bix, {})
        keys = sorted(ent)
        rows = np.array([k[0] for k in keys], dtype=int)
        cols = np.array([k[1] for k in keys], dtype=int)
        const = np.zeros(len(keys))
        gr, gc, gv = [], [], []
        for eix, k in enumerate(keys):
            for mat, v in ent[k].items():
                if mat == 0:
                    const[eix] = -v  # M(x) = sum x_i F_i - F_0
                else:
                    gr.append(eix)
                    gc.append(mat - 1)
                    gv.append(v)
        G = sp.csr_matrix(
            (np.array(gv), (np.array(gr, dtype=int), np.array(gc, dtype=int))),
            shape=(len(keys), n),
        )
        blocks.append(PSDBlock(f"sdpa_block_{bix}", d, rows, cols, G, const, diag=diag))
    return ConicData(
        n=n,
        P_diag=np.zeros(n),
        q=sdpa.c.astype(float).copy(),
        A=None,
        b=None,
        blocks=blocks,
    )
