import math

import numpy as np
import pytest

from rdmoments.liouville import DiracAtFunction, GaussianProduct
from rdmoments.moments import MomentSequence, MultiIndex, enumerate_monomials
from rdmoments.oracle import reference_logistic_moments
from rdmoments.relaxation import (
    RelaxationOptions,
    build_relaxation,
    compare_moments,
    default_radius,
    solve,
)
from rdmoments.solver import SolverOptions
from rdmoments.spectral import GridFunction


def dirac_spec(level, N=8):
    return DiracAtFunction(GridFunction(np.full(N, level)))


def tight_opts(max_iter=60000, tol=1e-9):
    return SolverOptions(rho=5.0, eps_abs=tol, eps_rel=tol, max_iter=max_iter)


@pytest.fixture(scope="module")
def equilibrium_zero():
    prob = build_relaxation(4, 0, 0, 0.1, dirac_spec(0.0))
    return prob, *solve(prob, solver_opts=tight_opts())


class TestBuild:
    def test_dimensions_k0(self):
        prob = build_relaxation(2, 0, 0, 0.0, dirac_spec(0.0))
        # s = ceil(3/2) = 2: basis over (t, u0) up to degree 2 -> C(4,2) = 6
        assert prob.s == 2
        assert prob.blocks[0].size == math.comb(4, 2)
        assert prob.n_occ == len(enumerate_monomials(0, 4, 0))

    def test_dimensions_reported_k4(self):
        prob = build_relaxation(4, 4, 4, 0.1, GaussianProduct(0.1))
        man = prob.manifest()
        # our real parametrization: 10 variables, order-3 basis
        assert man["psd_blocks"]["occ_moment"] == math.comb(13, 3)
        assert man["n_slack"] == math.comb(14, 4) - 1
        assert man["n_occ"] == math.comb(16, 6)

    def test_order_precondition(self):
        with pytest.raises(ValueError):
            build_relaxation(1, 0, 0, 0.1, dirac_spec(0.0))
        with pytest.raises(ValueError):
            build_relaxation(4, 2, 1, 0.1, dirac_spec(0.0))  # h > K

    def test_default_radius(self):
        assert default_radius(dirac_spec(0.0), 0) == pytest.approx(1.0)
        assert default_radius(dirac_spec(0.5), 0) == pytest.approx(math.sqrt(1.5))
        r = default_radius(GaussianProduct(0.1), 2)
        assert r == pytest.approx(math.sqrt(1 + 0.9 * 5))

    def test_every_psd_entry_references_declared_variables(self):
        prob = build_relaxation(3, 1, 1, 0.1, GaussianProduct(0.1))
        for blk in prob.blocks:
            assert blk.G.shape[1] == prob.n


class TestEquilibriumSolve:
    def test_objective_and_moments(self, equilibrium_zero):
        prob, occ, term, rep = equilibrium_zero
        assert rep.status == "solved"
        assert rep.objective <= 1e-8
        assert rep.min_psd_eigenvalue >= -1e-6
        spatial = [abs(v) for a, v in occ.data.items() if a.spatial]
        assert max(spatial) < 1e-6
        assert occ.mass() == pytest.approx(1.0, abs=1e-9)

    def test_report_dimensions_match_problem(self, equilibrium_zero):
        prob, occ, term, rep = equilibrium_zero
        assert rep.n_occ == prob.n_occ
        assert rep.n_term == prob.n_term
        assert rep.n_slack == prob.n_slack
        assert rep.n_equalities == prob.A.shape[0]
        assert rep.psd_block_sizes == [b.size for b in prob.blocks]

    def test_slack_scale_invariance(self):
        # scaling the slack objective must not move the recovered moments
        results = []
        for w in (1.0, 10.0):
            prob = build_relaxation(
                4, 0, 0, 0.1, dirac_spec(0.0), None,
                RelaxationOptions(slack_weight=w),
            )
            occ, term, rep = solve(prob, solver_opts=tight_opts(40000))
            results.append([occ.get(a) for a in occ.indices()])
        assert np.abs(np.array(results[0]) - np.array(results[1])).max() < 1e-6


class TestLogisticRecovery:
    def test_pseudo_moments_track_logistic(self):
        prob = build_relaxation(4, 0, 0, 0.1, dirac_spec(0.5))
        occ, term, rep = solve(prob, solver_opts=tight_opts(100000))
        occ_ref, _ = reference_logistic_moments(0.5, 0.1, 6)
        u0 = MultiIndex.from_dict(0, {0: 1})
        tu0 = MultiIndex.from_dict(1, {0: 1})
        u0sq = MultiIndex.from_dict(0, {0: 2})
        for a in (u0, tu0, u0sq):
            assert occ.get(a) == pytest.approx(occ_ref.get(a), abs=1e-3)

    def test_monotone_residual_over_orders(self):
        # exactly feasible linear case: optimal residual stays at zero as the
        # order grows (nested liftings cannot improve below zero)
        objs = []
        for r in (2, 3, 4):
            prob = build_relaxation(r, 1, 1, 0.0, GaussianProduct(0.1))
            occ, term, rep = solve(prob, solver_opts=tight_opts(40000))
            objs.append(rep.objective)
        tol = 1e-8
        assert objs[1] <= objs[0] + tol
        assert objs[2] <= objs[1] + tol


class TestCompareMoments:
    def build(self, entries):
        m = MomentSequence(2, 0, 0)
        for (a0, p), v in entries.items():
            m.set(MultiIndex.from_dict(a0, {0: p} if p else None), v)
        return m

    def test_identical_sequences(self):
        m = self.build({(0, 0): 1.0, (0, 1): 0.5, (1, 1): 0.25})
        st = compare_moments(m, m, 1e-3)
        assert st.fraction == 1.0
        assert st.n_shared == 3

    def test_single_perturbed_entry(self):
        ref = self.build({(0, 0): 1.0, (0, 1): 0.5, (1, 1): 0.25, (2, 0): 1 / 3})
        cmp_ = self.build({(0, 0): 1.0, (0, 1): 0.5 * (1 + 1e-2), (1, 1): 0.25, (2, 0): 1 / 3})
        st = compare_moments(cmp_, ref, 1e-3)
        assert st.fraction == pytest.approx(3 / 4)
        assert st.worst[0][0] == "u0"

    def test_floor_guards_zero_references(self):
        ref = self.build({(0, 0): 1.0, (0, 1): 0.0})
        cmp_ = self.build({(0, 0): 1.0, (0, 1): 5e-7})
        assert compare_moments(cmp_, ref, 1e-3).fraction == pytest.approx(0.5)
        assert compare_moments(cmp_, ref, 1e-3, floor=1e-6).fraction == 1.0

    def test_disjoint_rejected(self):
        a = self.build({(0, 1): 1.0})
        b = self.build({(1, 0): 1.0})
        with pytest.raises(ValueError):
            compare_moments(a, b, 1e-3)


class TestManifest:
    def test_variable_names_cover_all(self):
        prob = build_relaxation(2, 1, 1, 0.1, GaussianProduct(0.1))
        names = prob.var_names()
        assert len(names) == prob.n
        assert names[0] == "occ:1"
        assert any(n.startswith("slack:") for n in names)
