import math

import numpy as np
import pytest

from rdmoments.liouville import DiracAtFunction, GaussianProduct
from rdmoments.moments import (
    MomentSequence,
    MultiIndex,
    enumerate_monomials,
    evaluate_template,
    moment_matrix,
)
from rdmoments.oracle import (
    contraction_check,
    dissipativity_check,
    fd_solve,
    invariance_check,
    logistic_solution,
    pushforward_moments,
    random_inset_states,
    reference_heat_moments,
    reference_logistic_moments,
)
from rdmoments.spectral import GridFunction


def cos_state(N, mean=0.5, amp=0.1):
    return GridFunction.from_callable(lambda x: mean + amp * np.cos(2 * np.pi * x), N)


class TestFdSolve:
    def test_exact_heat_mode(self):
        traj = fd_solve(cos_state(128), 0.0, 1e-4, T=0.1)
        x = np.arange(128) / 128
        exact = 0.5 + 0.1 * math.exp(-4 * np.pi**2 * 0.1) * np.cos(2 * np.pi * x)
        assert np.abs(traj.states[-1] - exact).max() < 1e-4

    def test_exact_logistic(self):
        traj = fd_solve(GridFunction(np.full(32, 0.3)), 0.1, 1e-3)
        exact = logistic_solution(0.3, 0.1, np.array([1.0]))[0]
        assert np.abs(traj.states[-1] - exact).max() < 1e-6

    def test_self_convergence_order_two(self):
        def run(N, dt):
            y0 = GridFunction.from_callable(
                lambda x: 0.5 + 0.2 * np.cos(2 * np.pi * x) + 0.1 * np.sin(4 * np.pi * x), N
            )
            return fd_solve(y0, 0.1, dt)

        c32, c64, c128 = run(32, 4e-3), run(64, 2e-3), run(128, 1e-3)
        e1 = np.abs(c32.states[-1] - c64.states[-1][::2]).max()
        e2 = np.abs(c64.states[-1] - c128.states[-1][::2]).max()
        assert math.log2(e1 / e2) >= 1.9

    def test_stability_guard(self):
        with pytest.raises(ValueError):
            fd_solve(GridFunction(np.full(16, 0.5)), 5.0, 0.5)

    def test_uniform_times(self):
        traj = fd_solve(GridFunction(np.zeros(16)), 0.0, 1e-2)
        assert traj.times[0] == 0.0 and traj.times[-1] == 1.0
        assert np.allclose(np.diff(traj.times), traj.dt)


class TestPushforward:
    def test_dirac_at_zero(self):
        emp = pushforward_moments(
            DiracAtFunction(GridFunction(np.zeros(64))), 0.1, 1, 1, 4, 1, N=64, dt=1e-2
        )
        assert emp.occ.mass() == pytest.approx(1.0)
        assert emp.term.mass() == pytest.approx(1.0)
        spatial = [v for a, v in emp.occ.data.items() if a.spatial]
        assert max(abs(v) for v in spatial) < 1e-14
        # pure-time occupation moments are the Lebesgue marginal
        assert emp.occ.get(MultiIndex(1)) == pytest.approx(0.5)

    def test_dirac_logistic_occupation(self):
        emp = pushforward_moments(
            DiracAtFunction(GridFunction(np.full(128, 0.5))), 0.1, 1, 0, 6, 0, N=128, dt=1e-3
        )
        occ_ref, term_ref = reference_logistic_moments(0.5, 0.1, 6)
        u0 = MultiIndex.from_dict(0, {0: 1})
        assert abs(emp.occ.get(u0) - occ_ref.get(u0)) < 1e-5
        worst = max(abs(emp.occ.get(a) - occ_ref.get(a)) for a in occ_ref.indices())
        assert worst < 1e-5

    def test_gaussian_heat_second_moments(self):
        # eps = 0, K = 1: occupation second moments match the analytic heat
        # push-forward within Monte-Carlo error
        n = 4000
        emp = pushforward_moments(
            GaussianProduct(0.1), 0.0, n, 1, 4, 1, N=64, dt=2e-3, seed=7
        )
        occ_ref, term_ref = reference_heat_moments(0.1, 0.0, 1, 4, 1)
        for name, coord in [("u1^2", {1: 2}), ("v1^2", {2: 2}), ("u0^2", {0: 2})]:
            a = MultiIndex.from_dict(0, coord)
            se = 3 * math.sqrt(2) * 0.1 / math.sqrt(n)  # 3 sigma of a chi^2 mean
            assert abs(emp.occ.get(a) - occ_ref.get(a)) < se, name

    def test_seed_reproducible(self):
        kw = dict(eps=0.1, n_samples=64, K=1, max_degree=2, max_harmonic=1, N=32, dt=1e-2)
        a = pushforward_moments(GaussianProduct(0.1), seed=5, **kw)
        b = pushforward_moments(GaussianProduct(0.1), seed=5, **kw)
        c = pushforward_moments(GaussianProduct(0.1), seed=6, **kw)
        assert a.occ.data == b.occ.data
        assert a.occ.data != c.occ.data

    def test_chunking_invariant(self):
        kw = dict(eps=0.1, n_samples=100, K=1, max_degree=2, max_harmonic=1, N=32, dt=1e-2, seed=1)
        a = pushforward_moments(GaussianProduct(0.1), chunk=7, **kw)
        b = pushforward_moments(GaussianProduct(0.1), chunk=100, **kw)
        assert np.allclose(
            [a.occ.get(k) for k in a.occ.indices()],
            [b.occ.get(k) for k in a.occ.indices()],
            rtol=0,
            atol=1e-15,
        )

    def test_empirical_moment_matrices_psd(self):
        emp = pushforward_moments(
            GaussianProduct(0.1), 0.1, 500, 1, 4, 1, N=32, dt=2e-3, seed=3
        )
        occ_mm = evaluate_template(moment_matrix(1, 2, 1, include_time=True), emp.occ)
        term_mm = evaluate_template(moment_matrix(1, 2, 1, include_time=False), emp.term)
        assert np.linalg.eigvalsh(occ_mm).min() >= -1e-9
        assert np.linalg.eigvalsh(term_mm).min() >= -1e-9


class TestChecks:
    def test_contraction_identical_rejected(self):
        y = cos_state(32)
        with pytest.raises(ValueError):
            contraction_check(y, y, 0.1)

    def test_contraction_heat(self):
        a = cos_state(64, 0.5, 0.2)
        b = GridFunction(np.full(64, 0.5))
        assert contraction_check(a, b, 0.0, dt=1e-3) <= 1 + 1e-6

    def test_contraction_random_pairs(self):
        states = random_inset_states(6, 64, seed=21)
        worst = 0.0
        for eps in (0.0, 0.1, 1.0):
            for i in range(0, 6, 2):
                worst = max(worst, contraction_check(states[i], states[i + 1], eps, dt=1e-3))
        assert worst <= 1 + 1e-4

    def test_contraction_requires_inset(self):
        bad = GridFunction(np.full(32, 1.5))
        with pytest.raises(ValueError):
            contraction_check(bad, cos_state(32), 0.1)

    def test_invariance_constants(self):
        for level in (0.0, 1.0):
            traj = fd_solve(GridFunction(np.full(32, level)), 0.1, 1e-2)
            lo, hi = invariance_check(traj)
            assert lo == pytest.approx(level, abs=1e-12)
            assert hi == pytest.approx(level, abs=1e-12)

    def test_invariance_wide_cosine(self):
        traj = fd_solve(cos_state(128, 0.5, 0.49), 0.1, 1e-3)
        lo, hi = invariance_check(traj)
        assert lo >= -1e-8 and hi <= 1 + 1e-8

    def test_dissipativity_cosine_decay(self):
        ver = dissipativity_check(cos_state(128, 0.0, 1.0), dt=1e-4, T=0.2)
        assert ver.monotone
        t = np.linspace(0, 0.2, len(ver.norms))
        exact = math.sqrt(0.5) * np.exp(-4 * np.pi**2 * t)
        assert np.abs(ver.norms - exact).max() < 1e-4

    def test_dissipativity_random(self):
        for y in random_inset_states(3, 64, seed=2):
            assert dissipativity_check(y, dt=1e-3).monotone

    def test_dissipativity_constant_exact(self):
        ver = dissipativity_check(GridFunction(np.full(64, 0.7)), dt=1e-2)
        assert np.all(ver.norms == ver.norms[0])


class TestReferences:
    def test_logistic_solution_exact_form(self):
        t = np.linspace(0, 1, 5)
        y = logistic_solution(0.3, 0.1, t)
        lhs = 0.3 * np.exp(0.1 * t) / (1 + 0.3 * (np.exp(0.1 * t) - 1))
        assert np.allclose(y, lhs)

    def test_logistic_moments_quadrature_converged(self):
        a, _ = reference_logistic_moments(0.5, 0.1, 6, n_quad=40)
        b, _ = reference_logistic_moments(0.5, 0.1, 6, n_quad=80)
        worst = max(abs(a.get(k) - b.get(k)) for k in a.indices())
        assert worst < 1e-14

    def test_heat_reference_against_quadrature(self):
        # independent oracle: 1-D Gauss-Hermite x Gauss-Legendre quadrature
        occ, term = reference_heat_moments(0.1, 0.0, 1, 4, 1)
        hn, hw = np.polynomial.hermite_e.hermegauss(40)
        ln, lw = np.polynomial.legendre.leggauss(60)
        tq = 0.5 * (ln + 1)
        wq = 0.5 * lw
        s = math.sqrt(0.1)
        lam = 4 * np.pi**2
        # index t^1 u1^2: int t E[u1(0)^2] e^{-2 lam t} dt
        a = MultiIndex.from_dict(1, {1: 2})
        m2 = float(np.sum(hw * (s * hn) ** 2) / math.sqrt(2 * math.pi))
        quad = float(np.sum(wq * tq * np.exp(-2 * lam * tq))) * m2
        assert occ.get(a) == pytest.approx(quad, rel=1e-10)
        # terminal u1^2 decays to ~0
        assert term.get(MultiIndex.from_dict(0, {1: 2})) == pytest.approx(
            0.1 * math.exp(-2 * lam), abs=1e-30
        )

    def test_random_inset_states_bounds(self):
        for y in random_inset_states(20, 64, seed=9):
            assert y.values.min() >= 0.0 and y.values.max() <= 1.0
