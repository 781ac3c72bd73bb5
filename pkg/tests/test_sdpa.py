import numpy as np
import pytest

from rdmoments.liouville import DiracAtFunction
from rdmoments.relaxation import build_relaxation, solve
from rdmoments.sdpa import (
    conic_problem_to_sdpa,
    export_sdpa,
    parse_sdpa,
    sdpa_to_conic,
    write_sdpa,
)
from rdmoments.solver import SolverOptions, solve_conic
from rdmoments.spectral import GridFunction


@pytest.fixture(scope="module")
def small_problem():
    return build_relaxation(2, 0, 0, 0.1, DiracAtFunction(GridFunction(np.zeros(8))))


class TestExport:
    def test_structure_matches_manifest(self, small_problem, tmp_path):
        path = tmp_path / "p.dat-s"
        sdpa = export_sdpa(small_problem, str(path))
        assert sdpa.n_vars == small_problem.n + 1
        # 5 template blocks + arrow + equality diagonal block
        assert len(sdpa.block_sizes) == len(small_problem.blocks) + 2
        assert sdpa.block_sizes[-1] == -2 * small_problem.A.shape[0]
        n_slack = small_problem.n_slack
        assert sdpa.block_sizes[-2] == 1 + n_slack  # arrow over the slacks
        assert path.exists()

    def test_roundtrip_reproduces_coefficients(self, small_problem, tmp_path):
        path = tmp_path / "p.dat-s"
        sdpa = export_sdpa(small_problem, str(path))
        back = parse_sdpa(str(path))
        assert back.n_vars == sdpa.n_vars
        assert back.block_sizes == sdpa.block_sizes
        assert np.array_equal(back.c, sdpa.c)
        assert back.entries == sdpa.entries  # exact float equality

    def test_export_parse_export_byte_identical(self, small_problem, tmp_path):
        p1, p2 = tmp_path / "a.dat-s", tmp_path / "b.dat-s"
        export_sdpa(small_problem, str(p1))
        write_sdpa(parse_sdpa(str(p1)), str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_feasible_point_residuals_consistent(self, small_problem, tmp_path):
        # any point: block values of the parsed problem reproduce the
        # original residuals exactly
        prob = small_problem
        path = tmp_path / "p.dat-s"
        sdpa = export_sdpa(prob, str(path))
        data = sdpa_to_conic(parse_sdpa(str(path)))
        rng = np.random.default_rng(0)
        z = rng.normal(size=prob.n)
        x = np.concatenate([z, [1.234]])
        # equality block must equal +/- (Az - b)
        eq_blk = data.blocks[-1]
        vals = eq_blk.G @ x + eq_blk.const
        m = prob.A.shape[0]
        direct = prob.A @ z - prob.b
        assert np.allclose(vals[:m], direct, rtol=0, atol=0)
        assert np.allclose(vals[m:], -direct, rtol=0, atol=0)
        # template blocks evaluate identically
        for blk, pblk in zip(prob.blocks, data.blocks):
            assert np.allclose(pblk.G @ x + pblk.const, blk.G @ z, rtol=0, atol=0)

    def test_manifest_comment_present(self, small_problem, tmp_path):
        path = tmp_path / "p.dat-s"
        export_sdpa(small_problem, str(path))
        head = path.read_text().splitlines()[:5]
        assert any("variable ordering manifest" in line for line in head)


class TestSolveParsed:
    def test_equilibrium_file_solved_by_generic_backend(self, small_problem, tmp_path):
        # write the equilibrium problem, parse it back, and solve the parsed
        # generic form: the epigraph objective must come out ~0
        path = tmp_path / "p.dat-s"
        export_sdpa(small_problem, str(path))
        data = sdpa_to_conic(parse_sdpa(str(path)))
        res = solve_conic(
            data,
            SolverOptions(rho=1.0, eps_abs=1e-8, eps_rel=1e-8, max_iter=60000),
        )
        tau = res.z[-1]
        assert res.objective == pytest.approx(tau)
        assert tau <= 1e-6
        # the parsed solution must satisfy the original equalities
        z = res.z[: small_problem.n]
        assert np.abs(small_problem.A @ z - small_problem.b).max() <= 1e-5

    def test_external_solver_cross_check(self, small_problem, tmp_path):
        cp = pytest.importorskip("cvxpy")

        path = tmp_path / "p.dat-s"
        export_sdpa(small_problem, str(path))
        parsed = parse_sdpa(str(path))
        x = cp.Variable(parsed.n_vars)
        cons = []
        for bix, size in enumerate(parsed.block_sizes, start=1):
            d = abs(size)
            mats: dict[int, np.ndarray] = {}
            for (mat, blk, i, j), v in parsed.entries.items():
                if blk != bix:
                    continue
                F = mats.setdefault(mat, np.zeros((d, d)))
                F[i - 1, j - 1] = v
                F[j - 1, i - 1] = v
            expr = -mats.get(0, np.zeros((d, d)))
            for mat, F in mats.items():
                if mat:
                    expr = expr + x[mat - 1] * F
            if size < 0:
                cons.append(cp.diag(expr) >= 0)
            else:
                cons.append(expr >> 0)
        prob = cp.Problem(cp.Minimize(parsed.c @ x), cons)
        prob.solve(solver=cp.SCS, eps=1e-8, max_iters=20000, verbose=False)
        assert prob.status in ("optimal", "optimal_inaccurate")
        assert prob.value <= 1e-6
