"""Reference finite-difference simulator, ensemble push-forward moments, and
numerical validators (invariance, dissipativity, contraction, concentration).

Time stepping is IMEX: Crank-Nicolson for the periodic second difference
(applied in Fourier space, where the circulant operator is diagonal; this is
algebraically identical to solving the banded system) and an explicit Heun
corrector for the reaction eps*y*(1-y).  Second order in both dx and dt.

Ensembles use the counter-based Philox generator keyed by (seed, sample), so
draws are bit-reproducible regardless of batching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .liouville import DiracAtFunction, Ensemble, GaussianProduct, InitialMeasureSpec
from .moments import (
    MomentSequence,
    MultiIndex,
    enumerate_monomials,
    gaussian_moment,
    n_coords,
)
from .spectral import FourierVector, GridFunction, dft, idft, to_real

__all__ = [
    "GridTrajectory",
    "EmpiricalMoments",
    "fd_solve",
    "pushforward_moments",
    "contraction_check",
    "invariance_check",
    "dissipativity_check",
    "nogap_check",
    "logistic_solution",
    "reference_logistic_moments",
    "reference_heat_moments",
    "random_inset_states",
]


@dataclass
class GridTrajectory:
    times: np.ndarray
    states: np.ndarray  # (M+1, N)
    dx: float
    dt: float
    method: str = "imex-cn-heun"

    @property
    def N(self) -> int:
        return self.states.shape[1]

    def snapshot(self, m: int) -> GridFunction:
        return GridFunction(self.states[m])

    def l2_norms(self) -> np.ndarray:
        return np.sqrt(np.mean(self.states**2, axis=1))


@dataclass
class EmpiricalMoments:
    occ: MomentSequence
    term: MomentSequence
    n_samples: int
    quadrature: str = "trapezoid"
    seed: int | None = None


class _Stepper:
    """Batched IMEX step for states stacked as rows of an (S, N) array."""

    def __init__(self, N: int, eps: float, dt: float):
        self.N, self.eps, self.dt = N, eps, dt
        dx = 1.0 / N
        k = np.arange(N // 2 + 1)
        lam = (2.0 * np.cos(2.0 * np.pi * k / N) - 2.0) / dx**2  # FD symbol <= 0
        a = 0.5 * dt * lam
        self.expl = (1.0 + a) / (1.0 - a)
        self.impl = 1.0 / (1.0 - a)

    def reaction(self, Y: np.ndarray) -> np.ndarray:
        return self.eps * Y * (1.0 - Y)

    def step(self, Y: np.ndarray) -> np.ndarray:
        dt = self.dt
        R1 = self.reaction(Y)
        Yh = np.fft.rfft(Y, axis=-1)
        pred = np.fft.irfft(self.expl * Yh + dt * self.impl * np.fft.rfft(R1, axis=-1), n=self.N, axis=-1)
        R2 = self.reaction(pred)
        out = np.fft.irfft(
            self.expl * Yh + 0.5 * dt * self.impl * np.fft.rfft(R1 + R2, axis=-1),
            n=self.N,
            axis=-1,
        )
        return out


def _check_stability(y0: np.ndarray, eps: float, dt: float) -> None:
    if dt <= 0:
        raise ValueError("dt must be positive")
    # explicit reaction: |d/dy eps y(1-y)| = eps|1-2y|; require a mild CFL-type bound
    slope = eps * (1.0 + 2.0 * float(np.abs(y0).max()) + 2.0)
    if dt * slope > 2.0:
        raise ValueError(
            f"explicit reaction unstable: dt*eps*|1-2y| ~ {dt * slope:.3g} > 2"
        )


def fd_solve(y0: GridFunction, eps: float, dt: float, T: float = 1.0) -> GridTrajectory:
    """Propagate y_t = y_xx + eps*y*(1-y) with periodic wrap-around."""
    if eps < 0:
        raise ValueError("reaction rate must be nonnegative")
    _check_stability(y0.values, eps, dt)
    M = max(1, int(round(T / dt)))
    dt_eff = T / M
    stepper = _Stepper(y0.N, eps, dt_eff)
    states = np.empty((M + 1, y0.N))
    states[0] = y0.values
    Y = y0.values[None, :].copy()
    for m in range(1, M + 1):
        Y = stepper.step(Y)
        if m % 64 == 0 and not np.all(np.isfinite(Y)):
            raise RuntimeError(f"finite-difference state blew up at step {m}")
        states[m] = Y[0]
    if not np.all(np.isfinite(states)):
        raise RuntimeError("finite-difference state blew up")
    return GridTrajectory(np.linspace(0.0, T, M + 1), states, 1.0 / y0.N, dt_eff)


# ---------------------------------------------------------------------------
# ensemble push-forward moments


def _monomial_plan(indices: list[MultiIndex]) -> list[tuple[int, int]]:
    """Evaluation order: each monomial = parent monomial * one coordinate."""
    pos = {a: i for i, a in enumerate(indices)}
    plan = []
    for a in indices:
        if a.is_zero:
            plan.append((-1, -1))
            continue
        c, e = a.spatial[-1]
        parent = MultiIndex.from_dict(
            0, {cc: (ee - 1 if cc == c else ee) for cc, ee in a.spatial}
        )
        plan.append((pos[parent], c))
    return plan


def _sample_initial(
    spec: InitialMeasureSpec, n_samples: int, K: int, N: int, seed: int
) -> np.ndarray:
    """(S, N) grid states drawn from the initial measure."""
    if isinstance(spec, DiracAtFunction):
        if spec.y0.N != N:
            raise ValueError("Dirac grid resolution must match the oracle grid")
        return np.repeat(spec.y0.values[None, :], n_samples, axis=0)
    if isinstance(spec, GaussianProduct):
        s2, mu = spec.params(K)
        rng = np.random.Generator(
            np.random.Philox(key=np.array([seed, 0x52444D], dtype=np.uint64))
        )
        X = mu[None, :] + np.sqrt(s2)[None, :] * rng.standard_normal((n_samples, n_coords(K)))
        out = np.empty((n_samples, N))
        for i in range(n_samples):
            out[i] = idft(FourierVector(X[i, 0], X[i, 1::2] + 1j * X[i, 2::2]), N).values
        return out
    if isinstance(spec, Ensemble):
        w = spec.normalized_weights()
        if n_samples != len(spec.members):
            raise ValueError("Ensemble specs propagate exactly their members")
        if any(m.N != N for m in spec.members):
            raise ValueError("Ensemble grid resolution must match the oracle grid")
        return np.stack([m.values for m in spec.members])
    raise TypeError(f"unknown initial measure spec {type(spec)!r}")


def pushforward_moments(
    spec: InitialMeasureSpec,
    eps: float,
    n_samples: int,
    K: int,
    max_degree: int,
    max_harmonic: int,
    N: int = 128,
    dt: float = 1e-3,
    seed: int = 0,
    chunk: int = 2048,
) -> EmpiricalMoments:
    """Empirical occupation/terminal moments of the push-forward measure.

    Every sample is propagated by the IMEX stepper; occupation moments use
    the composite trapezoid rule on the FD time grid, terminal moments the
    t = 1 snapshot; both are averaged over samples.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if isinstance(spec, DiracAtFunction):
        n_samples = 1
    if isinstance(spec, Ensemble):
        n_samples = len(spec.members)
    Y0 = _sample_initial(spec, n_samples, K, N, seed)
    _check_stability(Y0, eps, dt)
    spatial = enumerate_monomials(K, max_degree, max_harmonic, include_time=False)
    plan = _monomial_plan(spatial)
    n_mono = len(spatial)

    M = max(1, int(round(1.0 / dt)))
    dt_eff = 1.0 / M
    profiles = np.zeros((M + 1, n_mono))  # weighted sums of spatial monomials
    term_sum = np.zeros(n_mono)
    weights = _weights_for(spec, n_samples)

    for lo in range(0, n_samples, chunk):
        hi = min(lo + chunk, n_samples)
        Y = Y0[lo:hi].copy()
        w = weights[lo:hi]
        V = np.empty((hi - lo, n_mono))
        stepper = _Stepper(N, eps, dt_eff)
        for m in range(M + 1):
            if m > 0:
                Y = stepper.step(Y)
                if not np.all(np.isfinite(Y)):
                    bad = lo + int(np.nonzero(~np.isfinite(Y).all(axis=1))[0][0])
                    raise RuntimeError(f"sample {bad} blew up at step {m}")
            C = np.fft.rfft(Y, axis=1)[:, : K + 1] / N
            X = np.empty((hi - lo, n_coords(K)))
            X[:, 0] = C[:, 0].real
            if K:
                X[:, 1::2] = C[:, 1:].real
                X[:, 2::2] = C[:, 1:].imag
            for i, (parent, c) in enumerate(plan):
                V[:, i] = 1.0 if parent < 0 else V[:, parent] * X[:, c]
            profiles[m] += w @ V
            if m == M:
                term_sum += w @ V

    # trapezoid in t, then every time exponent via one power matrix
    tgrid = np.linspace(0.0, 1.0, M + 1)
    wq = np.full(M + 1, dt_eff)
    wq[0] = wq[-1] = 0.5 * dt_eff
    tpow = np.vstack([wq * tgrid**j for j in range(max_degree + 1)])
    occ_time = tpow @ profiles  # (a0, monomial)

    pos = {a: i for i, a in enumerate(spatial)}
    occ = MomentSequence(max_degree, max_harmonic, K)
    for a in enumerate_monomials(K, max_degree, max_harmonic, include_time=True):
        occ.set(a, occ_time[a.a0, pos[a.drop_time()]])
    term = MomentSequence(max_degree, max_harmonic, K)
    for a in spatial:
        term.set(a, term_sum[pos[a]])
    return EmpiricalMoments(occ, term, n_samples, "trapezoid", seed)


def _weights_for(spec: InitialMeasureSpec, n_samples: int) -> np.ndarray:
    if isinstance(spec, Ensemble):
        return spec.normalized_weights()
    return np.full(n_samples, 1.0 / n_samples)


# ---------------------------------------------------------------------------
# property checks


def contraction_check(
    y1_0: GridFunction,
    y2_0: GridFunction,
    eps: float,
    dt: float = 1e-3,
    T: float = 1.0,
) -> float:
    """Max over snapshots of ||y1(t)-y2(t)|| / (e^{eps t} ||y1(0)-y2(0)||).

    Both initial states must lie in the invariant band [0, 1], where eps is
    a valid one-sided Lipschitz constant of the reaction.
    """
    for y in (y1_0, y2_0):
        if y.values.min() < 0.0 or y.values.max() > 1.0:
            raise ValueError("initial states must lie in [0, 1]")
    if y1_0.N != y2_0.N:
        raise ValueError("grids must match")
    d0 = float(np.sqrt(np.mean((y1_0.values - y2_0.values) ** 2)))
    if d0 == 0.0:
        raise ValueError("initial states coincide; contraction ratio undefined")
    t1 = fd_solve(y1_0, eps, dt, T)
    t2 = fd_solve(y2_0, eps, dt, T)
    d = np.sqrt(np.mean((t1.states - t2.states) ** 2, axis=1))
    bound = d0 * np.exp(eps * t1.times)
    return float(np.max(d / bound))


def invariance_check(traj: GridTrajectory) -> tuple[float, float]:
    """(min, max) over all snapshots; initial data must start in [0, 1]."""
    y0 = traj.states[0]
    if y0.min() < 0.0 or y0.max() > 1.0:
        raise ValueError("invariance check needs initial data in [0, 1]")
    return float(traj.states.min()), float(traj.states.max())


@dataclass
class DissipativityVerdict:
    monotone: bool
    max_step_increase: float
    norms: np.ndarray


def dissipativity_check(
    y0: GridFunction, dt: float = 1e-3, T: float = 1.0, tol: float = 1e-10
) -> DissipativityVerdict:
    """Pure heat flow (eps = 0): the discrete L2 norm must not increase."""
    traj = fd_solve(y0, 0.0, dt, T)
    norms = traj.l2_norms()
    inc = float(np.max(np.diff(norms)))
    return DissipativityVerdict(inc <= tol, inc, norms)


def nogap_check(
    y0: GridFunction,
    eps: float,
    occ: MomentSequence,
    term: MomentSequence,
    rel_tol: float = 1e-3,
    floor: float = 1e-9,
    N: int | None = None,
    dt: float = 1e-3,
):
    """Concentration at Dirac initial data: relaxation pseudo-moments vs the
    push-forward moments of the single trajectory."""
    from .liouville import DiracAtFunction as _D
    from .relaxation import compare_moments

    K = occ.K
    emp = pushforward_moments(
        _D(y0), eps, 1, K, occ.max_degree, occ.max_harmonic, N=N or y0.N, dt=dt
    )
    occ_stats = compare_moments(occ, emp.occ, rel_tol, floor)
    term_stats = compare_moments(term, emp.term, rel_tol, floor)
    return occ_stats, term_stats


# ---------------------------------------------------------------------------
# closed-form references


def logistic_solution(y0: float, eps: float, t: np.ndarray) -> np.ndarray:
    """y' = eps*y*(1-y), y(0) = y0 (exact)."""
    if eps == 0.0:
        return np.full_like(np.asarray(t, dtype=float), y0)
    return y0 / (y0 + (1.0 - y0) * np.exp(-eps * np.asarray(t, dtype=float)))


def reference_logistic_moments(
    y0: float, eps: float, max_degree: int, n_quad: int = 80
) -> tuple[MomentSequence, MomentSequence]:
    """Occupation/terminal moments of the spatially constant trajectory
    (K = 0) by Gauss-Legendre quadrature of the exact logistic solution."""
    nodes, wts = np.polynomial.legendre.leggauss(n_quad)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * wts
    y = logistic_solution(y0, eps, t)
    occ = MomentSequence(max_degree, 0, 0)
    for a in enumerate_monomials(0, max_degree, 0, include_time=True):
        p = a.spatial[0][1] if a.spatial else 0
        occ.set(a, float(np.sum(w * t**a.a0 * y**p)))
    y1 = float(logistic_solution(y0, eps, np.array([1.0]))[0])
    term = MomentSequence(max_degree, 0, 0)
    for a in enumerate_monomials(0, max_degree, 0, include_time=False):
        p = a.spatial[0][1] if a.spatial else 0
        term.set(a, y1**p)
    return occ, term


def _int_poly_exp(j: int, c: float) -> float:
    """int_0^1 t^j e^{-c t} dt, exact recursion (c >= 0)."""
    if c == 0.0:
        return 1.0 / (j + 1)
    I = (1.0 - math.exp(-c)) / c
    for m in range(1, j + 1):
        I = (-math.exp(-c) + m * I) / c
    return I


def reference_heat_moments(
    sigma2: float | np.ndarray,
    mean: float | np.ndarray,
    K: int,
    max_degree: int,
    max_harmonic: int,
) -> tuple[MomentSequence, MomentSequence]:
    """Analytic push-forward moments for the pure heat flow (eps = 0) from a
    product Gaussian: coordinates evolve as u_k(t) = u_k(0) e^{-(2 pi k)^2 t}."""
    spec = GaussianProduct(sigma2, mean)
    s2, mu = spec.params(K)
    sigma = np.sqrt(s2)
    lam = np.array([(2.0 * math.pi * ((j + 1) // 2)) ** 2 for j in range(n_coords(K))])
    occ = MomentSequence(max_degree, max_harmonic, K)
    term = MomentSequence(max_degree, max_harmonic, K)
    for a in enumerate_monomials(K, max_degree, max_harmonic, include_time=True):
        g = 1.0
        rate = 0.0
        for c, e in a.spatial:
            g *= gaussian_moment(e, mu[c], sigma[c])
            rate += e * lam[c]
        occ.set(a, g * _int_poly_exp(a.a0, rate))
        if a.a0 == 0:
            term.set(a, g * math.exp(-rate))
    return occ, term


def random_inset_states(
    n: int, N: int, seed: int, modes: int = 6, margin: float = 0.02
) -> list[GridFunction]:
    """Smooth random states mapped into [margin, 1-margin]: random decaying
    Fourier coefficients rescaled to the band."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0x494E53], dtype=np.uint64)))
    out = []
    x = np.arange(N) / N
    for _ in range(n):
        y = np.zeros(N)
        for k in range(1, modes + 1):
            amp = rng.standard_normal(2) / k**2
            y += amp[0] * np.cos(2 * np.pi * k * x) + amp[1] * np.sin(2 * np.pi * k * x)
        lo, hi = y.min(), y.max()
        span = hi - lo if hi > lo else 1.0
        level = rng.uniform(0.2, 0.8)
        width = rng.uniform(0.1, 1.0 - 2 * margin)
        y = (y - lo) / span * width
        y += level - y.mean()
        y = np.clip(y, margin, 1.0 - margin)
        out.append(GridFunction(y))
    return out
