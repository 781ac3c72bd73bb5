import numpy as np
import pytest

from rdmoments.spectral import (
    FourierVector,
    GridFunction,
    RealCoordinates,
    dft,
    drift,
    drift_polynomials,
    from_real,
    idft,
    quad_convolution,
    to_real,
)


def random_state(rng, K):
    return from_real(rng.normal(size=1 + 2 * K))


class TestDft:
    def test_constant(self):
        f = dft(GridFunction(np.ones(16)), 2)
        assert f.c0 == pytest.approx(1.0)
        assert np.abs(f.c).max() < 1e-15

    def test_cosine(self):
        g = GridFunction.from_callable(lambda x: np.cos(2 * np.pi * x), 16)
        f = dft(g, 2)
        assert f.c[0] == pytest.approx(0.5, abs=1e-14)
        assert abs(f.c0) < 1e-14 and abs(f.c[1]) < 1e-14

    def test_sine_mode_two(self):
        g = GridFunction.from_callable(lambda x: np.sin(4 * np.pi * x), 32)
        f = dft(g, 4)
        assert f.c[1] == pytest.approx(-0.5j, abs=1e-14)
        others = [f.c0, f.c[0], f.c[2], f.c[3]]
        assert max(abs(v) for v in others) < 1e-14

    def test_resolution_precondition(self):
        with pytest.raises(ValueError):
            dft(GridFunction(np.ones(8)), 4)
        with pytest.raises(ValueError):
            idft(FourierVector.zeros(4), 8)

    def test_roundtrip(self):
        rng = np.random.default_rng(3)
        f = random_state(rng, 3)
        f2 = dft(idft(f, 8), 3)
        assert abs(f2.c0 - f.c0) < 1e-12
        assert np.abs(f2.c - f.c).max() < 1e-12

    def test_idft_constant_and_cosine(self):
        g = idft(FourierVector(1.0, np.zeros(0, dtype=complex)), 8)
        assert np.allclose(g.values, 1.0)
        g = idft(FourierVector(0.0, np.array([0.5 + 0j])), 16)
        x = np.arange(16) / 16
        assert np.allclose(g.values, np.cos(2 * np.pi * x), atol=1e-14)

    def test_parseval(self):
        rng = np.random.default_rng(11)
        f = random_state(rng, 4)
        g = idft(f, 32)
        lhs = f.c0**2 + 2 * np.sum(np.abs(f.c) ** 2)
        assert lhs == pytest.approx(np.mean(g.values**2), abs=1e-12)


class TestRealCoordinates:
    def test_roundtrip_is_identity(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=9)
        assert np.array_equal(to_real(from_real(x)), x)
        rc = RealCoordinates.from_fourier(from_real(x))
        assert rc.K == 4
        assert np.array_equal(to_real(rc.to_fourier()), x)


class TestConvolution:
    def test_constant_squares(self):
        f = FourierVector(1.0, np.zeros(3, dtype=complex))
        cv = quad_convolution(f)
        assert cv.c0 == pytest.approx(1.0)
        assert np.abs(cv.c).max() == 0.0

    def test_cosine_square(self):
        # z = cos(2 pi x): z^2 = 1/2 + cos(4 pi x)/2
        f = FourierVector(0.0, np.array([0.5, 0.0], dtype=complex))
        cv = quad_convolution(f)
        assert cv.c0 == pytest.approx(0.5)
        assert cv.c[0] == pytest.approx(0.0)
        assert cv.c[1] == pytest.approx(0.25)

    def test_grid_square_oracle(self):
        # truncated convolution of a band-limited state equals the dft of the
        # pointwise square once the grid resolves every product mode
        rng = np.random.default_rng(7)
        f = random_state(rng, 4)
        y = idft(f, 32).values
        ref = dft(GridFunction(y * y), 4)
        cv = quad_convolution(f)
        assert abs(cv.c0 - ref.c0) < 1e-10
        assert np.abs(cv.c - ref.c).max() < 1e-10

    def test_hermitian_symmetry_via_idft_realness(self):
        rng = np.random.default_rng(9)
        cv = quad_convolution(random_state(rng, 3))
        g = idft(cv, 16)  # idft output is real by construction
        ref = idft(random_state(rng, 3), 16)
        assert np.isrealobj(g.values) and np.isrealobj(ref.values)

    def test_zero_padding_consistency(self):
        rng = np.random.default_rng(13)
        f = random_state(rng, 3)
        padded = FourierVector(f.c0, np.concatenate([f.c, np.zeros(3, dtype=complex)]))
        cv_small = quad_convolution(f)
        cv_big = quad_convolution(padded)
        # padded coefficients vanish beyond K, so every retained mode agrees
        assert abs(cv_big.c0 - cv_small.c0) < 1e-14
        assert np.abs(cv_big.c[:3] - cv_small.c).max() < 1e-14


class TestDrift:
    def test_pure_heat_mode(self):
        f = FourierVector(0.0, np.array([1.0 + 0j]))
        F = drift(f, 0.0)
        assert F.c[0] == pytest.approx(-4 * np.pi**2)
        assert F.c0 == 0.0

    def test_equilibrium_one(self):
        F = drift(FourierVector(1.0, np.zeros(3, dtype=complex)), 0.1)
        assert abs(F.c0) < 1e-15 and np.abs(F.c).max() < 1e-15

    def test_grid_oracle(self):
        # compare against the pointwise evaluation y_xx + eps y(1-y) of the
        # band-limited state on a fine grid (spectral second derivative)
        rng = np.random.default_rng(17)
        eps, K, N = 0.1, 4, 64
        f = random_state(rng, K)
        y = idft(f, N).values
        spec = np.fft.rfft(y)
        k = np.arange(N // 2 + 1)
        d2 = np.fft.irfft(spec * -((2 * np.pi * k) ** 2), n=N)
        ref = dft(GridFunction(d2 + eps * y * (1 - y)), K)
        F = drift(f, eps)
        assert abs(F.c0 - ref.c0) < 1e-8
        assert np.abs(F.c - ref.c).max() < 1e-8

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            drift(FourierVector.zeros(2), -0.1)


class TestDriftPolynomials:
    def test_logistic_reduction_at_k0(self):
        (p,) = drift_polynomials(0, 0.1)
        x = np.array([0.3])
        assert p.evaluate(0.0, x) == pytest.approx(0.1 * 0.3 - 0.1 * 0.09)
        assert p.degree == 2

    def test_linear_heat_part(self):
        polys = drift_polynomials(1, 0.0)
        x = np.array([0.0, 2.0, -3.0])
        assert polys[1].evaluate(0.0, x) == pytest.approx(-4 * np.pi**2 * 2.0)
        assert polys[2].evaluate(0.0, x) == pytest.approx(-4 * np.pi**2 * -3.0)

    @pytest.mark.parametrize("K,eps", [(1, 0.1), (4, 0.1), (3, 0.0), (2, 1.0)])
    def test_matches_drift(self, K, eps):
        rng = np.random.default_rng(100 + K)
        polys = drift_polynomials(K, eps)
        assert len(polys) == 1 + 2 * K
        assert all(p.degree <= 2 for p in polys)
        for _ in range(100):
            x = rng.normal(size=1 + 2 * K)
            F = to_real(drift(from_real(x), eps))
            vals = np.array([p.evaluate(0.0, x) for p in polys])
            assert np.abs(vals - F).max() < 1e-10

    def test_sup_norm_agreement_many_states(self):
        rng = np.random.default_rng(23)
        K, eps = 3, 0.1
        polys = drift_polynomials(K, eps)
        worst = 0.0
        for _ in range(1000):
            x = rng.normal(size=1 + 2 * K)
            F = to_real(drift(from_real(x), eps))
            vals = np.array([p.evaluate(0.0, x) for p in polys])
            worst = max(worst, np.abs(vals - F).max())
        assert worst < 1e-9
