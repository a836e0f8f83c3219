import math

import numpy as np
import pytest

from miqes.intdist import (
    DoubleGeometricParam,
    chi_square_fit,
    mean_step_from_p,
    p_from_mean_step,
    pmf,
    sample_double_geometric,
    sample_double_geometric_many,
    sample_geometric,
    tail_mass,
)


class TestConversion:
    def test_zero_step_gives_p_one(self):
        assert p_from_mean_step(0.0, 1) == 1.0
        assert p_from_mean_step(0.0, 17) == 1.0

    def test_unit_step(self):
        assert p_from_mean_step(1.0, 1) == pytest.approx(2 - math.sqrt(2), rel=1e-15)

    def test_depends_only_on_ratio(self):
        assert p_from_mean_step(2.0, 2) == p_from_mean_step(1.0, 1)

    def test_inverse_examples(self):
        assert mean_step_from_p(1.0, 5) == 0.0
        assert mean_step_from_p(2 - math.sqrt(2), 1) == pytest.approx(1.0, rel=1e-12)
        assert mean_step_from_p(0.5, 1) == pytest.approx(4.0 / 3.0, rel=1e-15)

    @pytest.mark.parametrize("mean_step", [0.01, 0.1, 1.0, 10.0, 100.0])
    @pytest.mark.parametrize("n_z", [1, 4, 9])
    def test_round_trip(self, mean_step, n_z):
        p = p_from_mean_step(mean_step, n_z)
        assert mean_step_from_p(p, n_z) == pytest.approx(mean_step, rel=1e-12)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            p_from_mean_step(-0.1, 1)
        with pytest.raises(ValueError):
            mean_step_from_p(0.0, 1)
        with pytest.raises(ValueError):
            mean_step_from_p(1.1, 1)

    def test_param_dataclass(self):
        param = DoubleGeometricParam.from_mean_step(1.0, 1)
        assert param.p == pytest.approx(2 - math.sqrt(2), rel=1e-15)
        assert param.mean_step == pytest.approx(1.0, rel=1e-12)
        with pytest.raises(ValueError):
            DoubleGeometricParam(p=0.0)


class TestSampling:
    def test_geometric_hand_values(self):
        assert sample_geometric(1.0, 0.3) == 0
        assert sample_geometric(0.5, 0.7) == 1  # floor(log(0.3)/log(0.5)) = floor(1.737)
        assert sample_geometric(0.5, 0.0) == 0

    def test_geometric_rejects_bad_input(self):
        with pytest.raises(ValueError):
            sample_geometric(0.0, 0.5)
        with pytest.raises(ValueError):
            sample_geometric(0.5, 1.0)

    def test_double_geometric_degenerate(self):
        rng = np.random.default_rng(0)
        param = DoubleGeometricParam(p=1.0)
        assert all(sample_double_geometric(param, rng) == 0 for _ in range(100))
        assert np.all(sample_double_geometric_many(1.0, 1000, rng) == 0)

    def test_sampler_determinism(self):
        samples_a = sample_double_geometric_many(0.4, 5000, np.random.default_rng(99))
        samples_b = sample_double_geometric_many(0.4, 5000, np.random.default_rng(99))
        np.testing.assert_array_equal(samples_a, samples_b)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(7)
        u1 = rng.random(500)
        u2 = rng.random(500)
        from miqes import _kernels
        batch = _kernels.double_geometric_from_p(0.37, u1, u2)
        scalar = [sample_geometric(0.37, a) - sample_geometric(0.37, b)
                  for a, b in zip(u1, u2)]
        np.testing.assert_array_equal(batch, scalar)

    def test_symmetry_and_mean_abs(self):
        rng = np.random.default_rng(11)
        samples = sample_double_geometric_many(0.5, 200_000, rng)
        # mean zero within 3 standard errors
        se = samples.std() / math.sqrt(samples.size)
        assert abs(samples.mean()) <= 3 * se
        assert np.mean(np.abs(samples)) == pytest.approx(4.0 / 3.0, rel=0.02)


class TestPmf:
    def test_values(self):
        assert pmf(0, 1.0) == 1.0
        assert pmf(0, 0.5) == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_symmetry_exact(self):
        for k in range(0, 40):
            for p in (0.1, 0.3, 0.5, 0.9):
                assert pmf(k, p) == pmf(-k, p)

    def test_sums_to_one(self):
        total = sum(pmf(k, 0.5) for k in range(-50, 51))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_tail_mass_consistent(self):
        p = 0.3
        direct = sum(pmf(k, p) for k in range(31, 400))
        assert tail_mass(30, p) == pytest.approx(direct, rel=1e-10)

    @pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
    def test_chi_square_accepts_own_samples(self, p):
        rng = np.random.default_rng(123)
        samples = sample_double_geometric_many(p, 100_000, rng)
        _, p_value, dof = chi_square_fit(samples, p)
        assert p_value > 0.001
        assert dof >= 2

    def test_chi_square_rejects_wrong_p(self):
        rng = np.random.default_rng(321)
        samples = sample_double_geometric_many(0.5, 100_000, rng)
        _, p_value, _ = chi_square_fit(samples, 0.45)
        assert p_value < 1e-6
