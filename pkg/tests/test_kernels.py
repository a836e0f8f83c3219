"""Kernel backends: correctness against straightforward numpy formulas and
cross-backend agreement when the compiled extension is present."""

import numpy as np
import pytest

from miqes import _kernels
from miqes._kernels import _pyref
from miqes.quadforms import make_instance

BACKENDS = _kernels.available_backends()


def _random_inputs(rng, lam=64, n_r=3, n_z=5):
    return dict(
        x=rng.uniform(-10, 10, (lam, n_r)),
        s=rng.uniform(0.5, 2.0, (lam, n_r)),
        z=np.round(rng.uniform(-10, 10, (lam, n_z))),
        q=rng.uniform(1.0, 4.0, (lam, n_z)),
        norm_global_r=rng.standard_normal(lam),
        norm_s=rng.standard_normal((lam, n_r)),
        norm_x=rng.standard_normal((lam, n_r)),
        norm_global_z=rng.standard_normal(lam),
        norm_q=rng.standard_normal((lam, n_z)),
        u1=rng.random((lam, n_z)),
        u2=rng.random((lam, n_z)),
    )


class TestAgainstNumpyFormulas:
    @pytest.mark.parametrize("backend", sorted(BACKENDS))
    def test_quadform_batch(self, backend):
        impl = BACKENDS[backend]
        rng = np.random.default_rng(5)
        m = rng.standard_normal((6, 6))
        hessian = m @ m.T
        center = rng.standard_normal(6)
        points = np.ascontiguousarray(rng.standard_normal((40, 6)))
        got = impl.quadform_batch(hessian, center, 0.37, points)
        expected = 0.37 * np.einsum("ij,jk,ik->i", points - center, hessian,
                                    points - center)
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    @pytest.mark.parametrize("backend", sorted(BACKENDS))
    def test_penalized_batch_formula(self, backend):
        impl = BACKENDS[backend]
        inst = make_instance("TC1", 8, 100.0, 30.0)
        rng = np.random.default_rng(6)
        points = np.ascontiguousarray(rng.uniform(-12, 12, (300, 8)))
        cost, f, g = impl.penalized_batch(
            inst.objective.hessian, inst.objective.center, inst.objective.scale,
            inst.constraint.hessian, inst.constraint.center, inst.constraint.scale,
            inst.constraint_level, inst.penalty_coef, points)
        excess = np.maximum(g - inst.constraint_level, 0.0)
        np.testing.assert_allclose(cost, f + inst.penalty_coef * excess ** 2,
                                   rtol=1e-14)
        assert np.all(cost[g <= inst.constraint_level] == f[g <= inst.constraint_level])

    @pytest.mark.parametrize("backend", sorted(BACKENDS))
    def test_mutate_floors_and_formulas(self, backend):
        impl = BACKENDS[backend]
        rng = np.random.default_rng(7)
        data = _random_inputs(rng)
        taus = (0.3, 0.2, 0.25, 0.15)
        x2, s2, z2, q2 = impl.mies_mutate_batch(
            data["x"], data["s"], data["z"], data["q"],
            data["norm_global_r"], data["norm_s"], data["norm_x"],
            data["norm_global_z"], data["norm_q"], data["u1"], data["u2"],
            *taus, 1e-5, 1.0, 1.0)
        s_expected = np.maximum(1e-5, data["s"] * np.exp(
            taus[0] * data["norm_global_r"][:, None] + taus[1] * data["norm_s"]))
        np.testing.assert_allclose(s2, s_expected, rtol=1e-12)
        np.testing.assert_allclose(x2, data["x"] + s2 * data["norm_x"], rtol=1e-12)
        q_expected = np.maximum(1.0, data["q"] * np.exp(
            taus[2] * data["norm_global_z"][:, None] + taus[3] * data["norm_q"]))
        np.testing.assert_allclose(q2, q_expected, rtol=1e-12)
        steps = z2 - data["z"]
        assert np.all(steps == np.round(steps))

    @pytest.mark.parametrize("backend", sorted(BACKENDS))
    def test_mutate_floor_binds_exactly(self, backend):
        impl = BACKENDS[backend]
        lam, n_r = 4, 3
        x = np.zeros((lam, n_r))
        s = np.full((lam, n_r), 1e-5)
        empty = np.zeros((lam, 0))
        # strongly negative lognormal draws push s below the floor
        x2, s2, _, _ = impl.mies_mutate_batch(
            x, s, empty, empty,
            np.full(lam, -10.0), np.full((lam, n_r), -10.0), np.zeros((lam, n_r)),
            np.zeros(lam), empty, empty, empty,
            0.3, 0.2, 0.0, 0.0, 1e-5, 1.0, 1.0)
        np.testing.assert_array_equal(s2, np.full((lam, n_r), 1e-5))
        np.testing.assert_array_equal(x2, x)

    @pytest.mark.parametrize("backend", sorted(BACKENDS))
    def test_mutate_empty_blocks_passthrough(self, backend):
        impl = BACKENDS[backend]
        lam = 5
        rng = np.random.default_rng(8)
        z = np.round(rng.uniform(-5, 5, (lam, 3)))
        q = rng.uniform(1, 2, (lam, 3))
        empty = np.zeros((lam, 0))
        x2, s2, z2, q2 = impl.mies_mutate_batch(
            empty, empty, z, q,
            np.zeros(lam), empty, empty,
            rng.standard_normal(lam), rng.standard_normal((lam, 3)),
            rng.random((lam, 3)), rng.random((lam, 3)),
            0.0, 0.0, 0.25, 0.15, 1e-5, 1.0, 1.0)
        assert x2.shape == (lam, 0) and s2.shape == (lam, 0)
        assert np.all(q2 >= 1.0)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
class TestCrossBackend:
    def test_quadform_and_penalized_agree(self):
        core = BACKENDS["cython"]
        inst = make_instance("TC3", 8, 1e4, 50.0)
        rng = np.random.default_rng(9)
        points = np.ascontiguousarray(rng.uniform(-15, 15, (500, 8)))
        args = (inst.objective.hessian, inst.objective.center, inst.objective.scale,
                inst.constraint.hessian, inst.constraint.center, inst.constraint.scale,
                inst.constraint_level, inst.penalty_coef, points)
        for got, ref in zip(core.penalized_batch(*args), _pyref.penalized_batch(*args)):
            np.testing.assert_allclose(got, ref, rtol=1e-12)

    def test_double_geometric_agrees_exactly(self):
        core = BACKENDS["cython"]
        rng = np.random.default_rng(10)
        u1, u2 = rng.random(20_000), rng.random(20_000)
        for p in (0.05, 0.3, 0.7, 1.0):
            np.testing.assert_array_equal(core.double_geometric_from_p(p, u1, u2),
                                          _pyref.double_geometric_from_p(p, u1, u2))

    def test_mutate_agrees(self):
        core = BACKENDS["cython"]
        rng = np.random.default_rng(11)
        data = _random_inputs(rng, lam=200)
        args = (data["x"], data["s"], data["z"], data["q"],
                data["norm_global_r"], data["norm_s"], data["norm_x"],
                data["norm_global_z"], data["norm_q"], data["u1"], data["u2"],
                0.25, 0.18, 0.25, 0.18, 1e-5, 1.0, 2.0)
        got = core.mies_mutate_batch(*args)
        ref = _pyref.mies_mutate_batch(*args)
        for g, r in zip(got[:2], ref[:2]):
            np.testing.assert_allclose(g, r, rtol=1e-12)
        # integer steps must agree exactly for the determinism story
        np.testing.assert_array_equal(got[2], ref[2])
        np.testing.assert_allclose(got[3], ref[3], rtol=1e-12)


def test_backend_reported():
    assert _kernels.BACKEND in BACKENDS
